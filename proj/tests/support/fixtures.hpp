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

#include "biconvmf/bundle.hpp"
#include "biconvmf/factorize.hpp"
#include "support/synthetic.hpp"

namespace biconvmf::testing {

inline CorpusBundle small_corpus(std::size_t ratings = 400, std::uint64_t seed = 7, std::size_t users = 60,
                                 std::size_t items = 15) {
  SyntheticSpec spec;
  spec.users = users;
  spec.items = items;
  spec.ratings = ratings;
  spec.seed = seed;
  return build_corpus(synthetic_reviews(spec), {ratings, 500, 1, 40}, {0.2, seed});
}

/// Cheap hyperparameters for unit tests.
inline Hyperparams small_hyper(ModelKind kind, std::size_t k = 4) {
  auto h = Hyperparams::defaults_for(kind);
  h.k = k;
  h.outer_iters = 5;
  h.early_stop_patience = 0;
  h.cnn.window_sizes = {2, 3};
  h.cnn.n_filters = 6;
  h.cnn.embedding_dim = 8;
  h.cnn.k = k;
  h.optimizer.epochs = 2;
  h.optimizer.batch_size = 16;
  return h;
}

}  // namespace biconvmf::testing
