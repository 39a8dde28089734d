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

// Synthetic review corpora with a planted low-rank rating structure whose
// latent coordinates are also written into the review text, so text-aware
// models have something real to find.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "biconvmf/corpus.hpp"
#include "biconvmf/random.hpp"

namespace biconvmf::testing {

struct SyntheticSpec {
  std::size_t users = 200;
  std::size_t items = 40;
  std::size_t ratings = 1500;
  std::size_t latent = 3;
  double noise = 0.3;
  std::size_t trait_words = 4;   // per side, per review
  std::size_t filler_words = 4;
  std::uint64_t seed = 7;
};

inline double normal(Rng& rng) {
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

inline std::vector<ReviewRecord> synthetic_reviews(const SyntheticSpec& spec) {
  Rng rng(spec.seed);
  auto draw = [&](std::size_t n, std::size_t d) {
    std::vector<std::vector<double>> v(n, std::vector<double>(d));
    for (auto& row : v)
      for (auto& x : row) x = normal(rng);
    return v;
  };
  const auto a = draw(spec.users, spec.latent);
  const auto b = draw(spec.items, spec.latent);

  // Bucket a coordinate into one of five levels.
  auto level = [](double x) { return std::clamp(static_cast<int>(std::floor(x * 1.25 + 2.5)), 0, 4); };
  auto trait_text = [&](const std::vector<double>& f, const char* side, std::string& out) {
    for (std::size_t w = 0; w < spec.trait_words; ++w) {
      const auto d = rng.below(spec.latent);
      out += fmt::format("{}{}lvl{} ", side, d, level(f[d]));
    }
  };

  std::vector<ReviewRecord> out;
  out.reserve(spec.ratings);
  for (std::size_t n = 0; n < spec.ratings; ++n) {
    // Mildly skewed activity: low indices are more active.
    const auto u = static_cast<std::size_t>(std::pow(rng.uniform(), 1.5) * static_cast<double>(spec.users));
    const auto i = static_cast<std::size_t>(std::pow(rng.uniform(), 1.3) * static_cast<double>(spec.items));
    double dot = 0.0;
    for (std::size_t d = 0; d < spec.latent; ++d) dot += a[u][d] * b[i][d];
    const double raw = 3.0 + dot / std::sqrt(static_cast<double>(spec.latent)) + spec.noise * normal(rng);
    const double rating = std::clamp(std::round(raw), 1.0, 5.0);

    std::string text;
    trait_text(a[u], "taste", text);
    trait_text(b[i], "trait", text);
    for (std::size_t w = 0; w < spec.filler_words; ++w) text += fmt::format("filler{} ", rng.below(40));
    text += rating >= 4 ? "good" : rating <= 2 ? "bad" : "fine";

    out.push_back({fmt::format("U{:05d}", u), fmt::format("I{:04d}", i), rating, text});
  }
  return out;
}

inline std::string to_jsonl(const std::vector<ReviewRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json j{{"reviewerID", r.user_id}, {"asin", r.item_id}, {"overall", r.rating}, {"reviewText", r.review_text}};
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace biconvmf::testing
