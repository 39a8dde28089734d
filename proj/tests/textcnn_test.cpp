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

#include <cmath>

#include <gtest/gtest.h>

#include "biconvmf/textcnn.hpp"
#include "support/cnn_cases.hpp"
#include "support/oracles.hpp"

namespace biconvmf {
namespace {

using testing::naive_forward;
using testing::relative_error;

using testing::random_case;

TEST(CnnForward, AllZeroGivesZero) {
  CnnConfig cfg{{3, 4, 5}, 4, 3, 2, 0.2, true};
  CnnParams params(cfg, 5);
  TokenDocument doc{std::vector<std::uint32_t>(8, 0), 0};
  const auto s = forward(params, doc);
  EXPECT_EQ(s, DenseVector::Zero(2));
}

TEST(CnnForward, HandComputedSingleToken) {
  CnnConfig cfg{{1}, 1, 2, 1, 0.0, true};
  CnnParams params(cfg, 2);
  params.embedding()[2] = 1.0;
  params.embedding()[3] = 1.0;
  std::fill(params.filters(0).begin(), params.filters(0).end(), 1.0);
  params.projection()[0] = 1.0;
  TokenDocument doc{{1, 0, 0}, 1};
  const auto s = forward(params, doc);
  EXPECT_NEAR(s(0), std::tanh(2.0), 1e-15);
  EXPECT_NEAR(s(0), 0.96403, 1e-5);
}

TEST(CnnForward, ProjectionBiasPassesThroughWhenWeightsZero) {
  Rng rng(5);
  auto c = random_case(rng, false, true);
  std::fill(c.params.projection().begin(), c.params.projection().end(), 0.0);
  for (std::size_t j = 0; j < c.params.config().k; ++j) c.params.projection_bias()[j] = 0.5 + static_cast<double>(j);
  const auto s = forward(c.params, c.doc);
  for (std::size_t j = 0; j < c.params.config().k; ++j) EXPECT_EQ(s(static_cast<Eigen::Index>(j)), 0.5 + static_cast<double>(j));
}

TEST(CnnForward, MatchesNaiveDefinition) {
  Rng rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = random_case(rng, trial % 2 == 0, true);
    const auto fast = detail::run_forward(c.params, c.doc, c.mask).output;
    const auto slow = naive_forward(c.params, c.doc, c.mask);
    for (std::size_t j = 0; j < slow.size(); ++j) EXPECT_NEAR(fast(static_cast<Eigen::Index>(j)), slow[j], 1e-12);
  }
}

TEST(CnnForward, PaddingInvariance) {
  Rng rng(7);
  CnnConfig cfg{{2, 3}, 3, 4, 2, 0.0, true};
  auto params = init_cnn_params(cfg, 9, 1);
  const Vocabulary vocab({"a", "b", "c", "d", "e", "f", "g", "h"});
  for (const char* text : {"", "a", "a b", "a b c d e", "h g f e d c b a"}) {
    const auto base = forward(params, tensorize(text, vocab, 8));
    for (std::size_t extra : {1, 5, 40}) {
      EXPECT_EQ(forward(params, tensorize(text, vocab, 8 + extra)), base) << text;
    }
  }
}

TEST(CnnForward, PooledFeaturesWithinTanhRange) {
  Rng rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    auto c = random_case(rng, false, true);
    for (auto& v : c.params.values()) v *= 5.0;
    for (double h : pooled_features(c.params, c.doc)) {
      EXPECT_GE(h, -1.0);
      EXPECT_LE(h, 1.0);
    }
  }
}

TEST(CnnForward, RejectsWindowWiderThanDocument) {
  CnnConfig cfg{{5}, 1, 2, 1, 0.0, true};
  CnnParams params(cfg, 3);
  TokenDocument doc{{1, 2, 0}, 2};
  EXPECT_THROW(forward(params, doc), std::invalid_argument);
}

TEST(CnnGradient, ZeroAtExactTarget) {
  Rng rng(19);
  auto c = random_case(rng, false, true);
  const auto target = forward(c.params, c.doc);
  const auto g = gradient(c.params, c.doc, target, 3.0, 0.0);
  EXPECT_EQ(g.loss, 0.0);
  for (double v : g.grads) EXPECT_EQ(v, 0.0);
}

TEST(CnnGradient, ZeroParamsHandDerivative) {
  CnnConfig cfg{{2}, 2, 3, 3, 0.0, true};
  CnnParams params(cfg, 4);
  TokenDocument doc{{1, 2, 3, 0}, 3};
  DenseVector t(3);
  t << 0.5, -1.0, 2.0;
  const double lambda = 4.0;
  const auto g = gradient(params, doc, t, lambda, 0.0);
  EXPECT_DOUBLE_EQ(g.loss, 0.5 * lambda * t.squaredNorm());
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_DOUBLE_EQ(g.grads[params.projection_bias_offset() + j], -lambda * t(static_cast<Eigen::Index>(j)));
  }
}

// Analytic gradients against central differences of the naive loss.
TEST(CnnGradient, MatchesFiniteDifferences) {
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    const bool frozen = trial % 4 == 3;
    auto c = random_case(rng, trial % 2 == 1, !frozen);
    const double lambda = rng.uniform(0.5, 5.0);
    const double lambda_w = trial % 3 == 0 ? 0.0 : rng.uniform(0.0, 0.5);
    const std::vector<double> target(c.target.data(), c.target.data() + c.target.size());

    const auto analytic = gradient(c.params, c.doc, c.target, lambda, lambda_w, c.mask);
    EXPECT_NEAR(analytic.loss, testing::naive_cnn_loss(c.params, c.doc, target, lambda, lambda_w, c.mask), 1e-12);
    const auto numeric = testing::finite_difference(c.params, [&](const CnnParams& p) {
      return testing::naive_cnn_loss(p, c.doc, target, lambda, lambda_w, c.mask);
    });
    for (const auto& sg : c.params.segments()) {
      if (!sg.trainable) continue;
      for (std::size_t i = sg.offset; i < sg.offset + sg.size; ++i) {
        if (sg.offset == c.params.embedding_offset() && i < sg.offset + c.params.config().embedding_dim) continue;
        const double err = relative_error(analytic.grads[i], numeric[i]);
        worst = std::max(worst, err);
        EXPECT_LT(err, 1e-4) << "trial " << trial << " entry " << i << " analytic " << analytic.grads[i]
                             << " numeric " << numeric[i];
      }
    }
  }
  RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(CnnGradient, FrozenEmbeddingHasNoGradient) {
  Rng rng(31);
  auto c = random_case(rng, false, false);
  const auto g = gradient(c.params, c.doc, c.target, 1.0, 0.1);
  for (std::size_t i = 0; i < c.params.embedding().size(); ++i) EXPECT_EQ(g.grads[c.params.embedding_offset() + i], 0.0);
}

std::vector<TokenDocument> random_docs(Rng& rng, std::size_t n, std::size_t vocab_rows, std::size_t max_len) {
  std::vector<TokenDocument> docs(n);
  for (auto& d : docs) {
    d.indices.assign(max_len, 0);
    d.true_len = 1 + rng.below(max_len);
    for (std::size_t t = 0; t < d.true_len; ++t) d.indices[t] = static_cast<std::uint32_t>(1 + rng.below(vocab_rows - 1));
  }
  return docs;
}

TEST(CnnFit, AlreadyAtTargetsStaysPut) {
  Rng rng(41);
  CnnConfig cfg{{2, 3}, 4, 3, 2, 0.2, true};
  const auto params = init_cnn_params(cfg, 10, 3);
  const auto docs = random_docs(rng, 20, 10, 8);
  Eigen::MatrixXd targets(2, 20);
  for (std::size_t i = 0; i < docs.size(); ++i) targets.col(static_cast<Eigen::Index>(i)) = forward(params, docs[i]);
  const auto fit = fit_to_targets(params, docs, targets, 10.0, 0.0, {3, 8, 1e-3, 0.9, 1e-8}, 5);
  EXPECT_LE(fit.final_loss, 1e-12);
  EXPECT_TRUE(fit.params == params);
}

TEST(CnnFit, ReducesLossOnSingleEntity) {
  Rng rng(43);
  CnnConfig cfg{{1, 2}, 3, 3, 1, 0.2, true};
  const auto params = init_cnn_params(cfg, 6, 9);
  const auto docs = random_docs(rng, 1, 6, 5);
  Eigen::MatrixXd targets(1, 1);
  targets(0, 0) = 2.0;
  const auto fit = fit_to_targets(params, docs, targets, 1.0, 1e-4, {50, 1, 1e-2, 0.9, 1e-8}, 1);
  EXPECT_LT(fit.final_loss, fit.initial_loss);
  EXPECT_LT(std::abs(forward(fit.params, docs[0])(0) - 2.0), std::abs(forward(params, docs[0])(0) - 2.0));
}

TEST(CnnFit, SameSeedIsBitwiseIdentical) {
  Rng rng(47);
  CnnConfig cfg{{2, 3}, 4, 3, 2, 0.2, true};
  const auto params = init_cnn_params(cfg, 10, 3);
  const auto docs = random_docs(rng, 30, 10, 8);
  Eigen::MatrixXd targets = Eigen::MatrixXd::Random(2, 30);
  const OptimizerConfig opt{3, 7, 1e-2, 0.9, 1e-8};
  const auto a = fit_to_targets(params, docs, targets, 5.0, 1e-4, opt, 99);
  const auto b = fit_to_targets(params, docs, targets, 5.0, 1e-4, opt, 99);
  EXPECT_TRUE(a.params == b.params);
  EXPECT_EQ(a.final_loss, b.final_loss);
  EXPECT_LT(a.final_loss, a.initial_loss);
  EXPECT_FALSE(a.params == params);
}

TEST(CnnFit, PadRowStaysZeroAndFrozenEmbeddingUntouched) {
  Rng rng(53);
  CnnConfig cfg{{2}, 3, 3, 2, 0.2, false};
  const auto params = init_cnn_params(cfg, random_embeddings(8, 3, 0.25, 4), 3);
  const auto docs = random_docs(rng, 10, 8, 6);
  const Eigen::MatrixXd targets = Eigen::MatrixXd::Random(2, 10);
  const auto fit = fit_to_targets(params, docs, targets, 5.0, 1e-2, {4, 3, 1e-2, 0.9, 1e-8}, 1);
  EXPECT_TRUE(std::equal(fit.params.embedding().begin(), fit.params.embedding().end(), params.embedding().begin()));

  cfg.train_embedding = true;
  const auto trainable = init_cnn_params(cfg, 8, 3);
  const auto fit2 = fit_to_targets(trainable, docs, targets, 5.0, 1e-2, {4, 3, 1e-2, 0.9, 1e-8}, 1);
  for (std::size_t d = 0; d < 3; ++d) EXPECT_EQ(fit2.params.embedding()[d], 0.0);
}

TEST(CnnFit, NonFiniteTargetsAbort) {
  Rng rng(59);
  CnnConfig cfg{{2}, 2, 2, 1, 0.0, true};
  const auto params = init_cnn_params(cfg, 5, 1);
  const auto docs = random_docs(rng, 3, 5, 4);
  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(1, 3);
  targets(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(fit_to_targets(params, docs, targets, 1.0, 0.0, {}, 1), TrainingError);
}

}  // namespace
}  // namespace biconvmf
