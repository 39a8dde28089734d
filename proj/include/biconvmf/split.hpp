// Copyright 2026 The BiConvMF Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "biconvmf/errors.hpp"
#include "biconvmf/random.hpp"
#include "biconvmf/ratings.hpp"

namespace biconvmf {

struct SplitSpec {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

/// Marks round(n * test_fraction) of n entries as test (1) by a seeded
/// shuffle; the rest are training (0).
inline std::vector<std::uint8_t> assign_split(std::size_t n, const SplitSpec& spec) {
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie in (0, 1), got " + std::to_string(spec.test_fraction));
  }
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.test_fraction));
  if (n_test >= n) throw DataError("split of " + std::to_string(n) + " ratings leaves the training set empty");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(stream_seed(spec.seed, "split"));
  rng.shuffle(order.begin(), order.end());

  std::vector<std::uint8_t> is_test(n, 0);
  for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = 1;
  return is_test;
}

inline std::pair<SparseRatings, SparseRatings> split(const SparseRatings& ratings, const SplitSpec& spec) {
  const auto is_test = assign_split(ratings.size(), spec);
  std::vector<Rating> train, test;
  for (std::size_t i = 0; i < ratings.size(); ++i) {
    (is_test[i] ? test : train).push_back(ratings.triplets()[i]);
  }
  return {SparseRatings(ratings.n_users(), ratings.n_items(), std::move(train)),
          SparseRatings(ratings.n_users(), ratings.n_items(), std::move(test))};
}

}  // namespace biconvmf
