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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "biconvmf/checkpoint.hpp"
#include "biconvmf/config.hpp"
#include "biconvmf/eval.hpp"
#include "support/fixtures.hpp"

namespace biconvmf {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "biconvmf_eval_test";
  fs::create_directories(dir);
  return dir / name;
}

TEST(Rmse, WorkedExamples) {
  const std::vector<std::pair<double, double>> exact{{1, 1}, {4, 4}};
  EXPECT_EQ(rmse(exact), 0.0);
  const std::vector<std::pair<double, double>> two{{5, 3}, {1, 3}};
  EXPECT_DOUBLE_EQ(rmse(two), 2.0);
  const std::vector<std::pair<double, double>> mixed{{4, 3}, {2, 3}, {5, 4}};
  EXPECT_NEAR(rmse(mixed), std::sqrt(1.0), 1e-12);
  const std::vector<std::pair<double, double>> uneven{{4, 3}, {2, 3}, {5, 3}};
  EXPECT_NEAR(rmse(uneven), std::sqrt(6.0 / 3.0), 1e-12);
  const std::vector<std::pair<double, double>> third{{1, 2}, {2, 2}, {3, 1}};
  EXPECT_NEAR(rmse(third), 1.29099, 1e-5);
}

TEST(Rmse, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(rmse({}), std::invalid_argument);
  const std::vector<std::pair<double, double>> bad{{1, std::nan("")}};
  EXPECT_THROW(rmse(bad), std::invalid_argument);
}

TEST(Rmse, PermutationInvariantAndBoundsMeanError) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::pair<double, double>> p(1 + rng.below(30));
    double mean_err = 0.0;
    for (auto& [a, b] : p) {
      a = rng.uniform(1, 5);
      b = rng.uniform(0, 6);
      mean_err += a - b;
    }
    mean_err /= static_cast<double>(p.size());
    const double base = rmse(p);
    rng.shuffle(p.begin(), p.end());
    EXPECT_NEAR(rmse(p), base, 1e-12);
    EXPECT_GE(base + 1e-12, std::abs(mean_err));
  }
}

TEST(Split, TenRatingsGiveEightAndTwo) {
  const auto is_test = assign_split(10, {0.2, 3});
  EXPECT_EQ(std::count(is_test.begin(), is_test.end(), 1), 2);
  EXPECT_EQ(assign_split(10, {0.2, 3}), is_test);
  EXPECT_THROW(assign_split(10, {0.0, 3}), ConfigError);
  EXPECT_THROW(assign_split(10, {1.0, 3}), ConfigError);
}

TEST(Split, PartitionOfLargeSet) {
  Rng rng(9);
  std::vector<Rating> t;
  for (std::uint32_t q = 0; q < 20000; ++q) t.push_back({q % 997, q % 311, 1.0 + static_cast<double>(q % 5)});
  const SparseRatings all(997, 311, t);
  const auto [train_set, test_set] = split(all, {0.2, 42});
  EXPECT_EQ(train_set.size(), 16000u);
  EXPECT_EQ(test_set.size(), 4000u);
  const auto is_test = assign_split(20000, {0.2, 42});
  std::size_t a = 0, b = 0;
  for (std::size_t q = 0; q < t.size(); ++q) {
    const auto& part = is_test[q] ? test_set.triplets()[b++] : train_set.triplets()[a++];
    ASSERT_EQ(part.user, t[q].user);
    ASSERT_EQ(part.item, t[q].item);
  }
  EXPECT_NE(assign_split(20000, {0.2, 43}), is_test);
}

TEST(Evaluate, CountsColdEntities) {
  const auto corpus = testing::small_corpus(300);
  auto h = testing::small_hyper(ModelKind::kPMF);
  const auto model = train(corpus, corpus.train_ratings(), h);
  const auto test_set = corpus.test_ratings();
  const auto ev = evaluate(model, test_set);
  EXPECT_EQ(ev.n, test_set.size());
  EXPECT_TRUE(std::isfinite(ev.rmse));
  const auto clipped = evaluate(model, test_set, true);
  EXPECT_LE(clipped.rmse, ev.rmse + 1e-12);
}

std::vector<ModelSpec> toy_specs(std::initializer_list<ModelKind> kinds) {
  std::vector<ModelSpec> specs;
  for (const auto k : kinds) specs.push_back({testing::small_hyper(k)});
  return specs;
}

TEST(Experiment, SingleRunToyInstance) {
  const auto corpus = testing::small_corpus(300);
  const auto specs = toy_specs({ModelKind::kPMF, ModelKind::kConvMF, ModelKind::kBiConvMF});
  const auto report = run_experiment(specs, corpus, 1, 11);
  ASSERT_EQ(report.models.size(), 3u);
  for (const auto& m : report.models) {
    ASSERT_EQ(m.runs.size(), 1u);
    ASSERT_TRUE(m.runs[0].rmse.has_value()) << m.runs[0].error;
    EXPECT_TRUE(std::isfinite(*m.runs[0].rmse));
    EXPECT_EQ(m.runs[0].seed, 11u);
  }
  EXPECT_EQ(report.failed_runs(), 0u);
}

TEST(Experiment, FailedCellIsRecordedNotFatal) {
  const auto corpus = testing::small_corpus(200);
  const auto specs = toy_specs({ModelKind::kPMF, ModelKind::kBiConvMFPlus});
  const auto report = run_experiment(specs, corpus, 2, 1);
  EXPECT_EQ(report.failed_runs(), 2u);
  EXPECT_FALSE(report.models[1].runs[0].rmse.has_value());
  EXPECT_FALSE(report.models[1].runs[0].error.empty());
  EXPECT_FALSE(report.models[1].mean().has_value());
  EXPECT_TRUE(report.models[0].mean().has_value());
  EXPECT_NE(report_csv(report, false).find("BiConvMF+,1,failed,"), std::string::npos);
}

TEST(Experiment, PmfSeedSpreadIsSmall) {
  const auto corpus = testing::small_corpus(600, 21, 80, 20);
  auto specs = toy_specs({ModelKind::kPMF});
  specs[0].hyper.outer_iters = 30;
  specs[0].hyper.early_stop_patience = 3;
  const auto report = run_experiment(specs, corpus, 5, 100);
  double lo = 1e9, hi = -1e9;
  for (const auto& r : report.models[0].runs) {
    ASSERT_TRUE(r.rmse.has_value());
    lo = std::min(lo, *r.rmse);
    hi = std::max(hi, *r.rmse);
  }
  EXPECT_LT(hi - lo, 0.01);
}

TEST(Experiment, ReportsAreByteIdenticalAcrossRuns) {
  const auto corpus = testing::small_corpus(250);
  const auto specs = toy_specs({ModelKind::kPMF, ModelKind::kConvMF});
  const auto a = run_experiment(specs, corpus, 2, 5);
  const auto b = run_experiment(specs, corpus, 2, 5);
  EXPECT_EQ(report_csv(a, false), report_csv(b, false));
  EXPECT_EQ(report_plot_data(a), report_plot_data(b));
  const auto csv = report_csv(a, false);
  EXPECT_EQ(csv.rfind("model,run,rmse,seconds\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 3);
  EXPECT_NE(csv.find("PMF,mean,"), std::string::npos);
  EXPECT_NE(report_table(a).find("Average"), std::string::npos);
}

TEST(Checkpoint, RoundTripPredictsBitwise) {
  const auto corpus = testing::small_corpus(300);
  for (const auto kind : {ModelKind::kPMF, ModelKind::kConvMF, ModelKind::kBiConvMF}) {
    auto h = testing::small_hyper(kind);
    h.outer_iters = 2;
    const auto model = train(corpus, corpus.train_ratings(), h);
    const auto path = scratch("model.ckpt").string();
    save_model(model, path);
    const auto back = load_model(path);
    EXPECT_EQ(back.factors.U, model.factors.U);
    EXPECT_EQ(back.factors.V, model.factors.V);
    EXPECT_EQ(back.hyper.kind, kind);
    EXPECT_EQ(back.history.size(), model.history.size());
    EXPECT_EQ(back.cnn_item.has_value(), model.cnn_item.has_value());
    if (model.cnn_item) {
      EXPECT_TRUE(*back.cnn_item == *model.cnn_item);
    }
    Rng rng(10);
    for (int q = 0; q < 100; ++q) {
      const auto& u = corpus.user_ids[rng.below(corpus.user_ids.size())];
      const auto& i = corpus.item_ids[rng.below(corpus.item_ids.size())];
      ASSERT_EQ(predict(back, u, i), predict(model, u, i));
    }
  }
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  const auto corpus = testing::small_corpus(200);
  auto h = testing::small_hyper(ModelKind::kConvMF);
  h.outer_iters = 1;
  const auto path = scratch("corrupt.ckpt");
  save_model(train(corpus, corpus.train_ratings(), h), path.string());
  const auto bytes = slurp(path);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 9);
  spit(path, truncated);
  try {
    load_model(path.string());
    FAIL() << "truncated checkpoint loaded";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("CNNI"), std::string::npos) << e.what();
  }

  auto bumped = bytes;
  bumped[4] = static_cast<char>(bumped[4] + 1);
  spit(path, bumped);
  try {
    load_model(path.string());
    FAIL() << "future version loaded";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported format version 2"), std::string::npos) << e.what();
  }

  auto foreign = bytes;
  foreign[0] = 'X';
  spit(path, foreign);
  EXPECT_THROW(load_model(path.string()), DataError);
  EXPECT_THROW(load_model(scratch("does_not_exist.ckpt").string()), DataError);
}

fs::path write_ini(const std::string& name, const std::string& text) {
  const auto p = scratch(name);
  std::ofstream(p) << text;
  return p;
}

TEST(Config, DefaultsWhenEmpty) {
  const auto cfg = load_config(write_ini("empty.ini", "").string());
  EXPECT_EQ(cfg.corpus.first_n, 20000u);
  EXPECT_EQ(cfg.corpus.max_len, 300u);
  EXPECT_EQ(cfg.k, 50u);
  EXPECT_EQ(cfg.n_runs, 5u);
  EXPECT_EQ(cfg.cnn.window_sizes, (std::vector<std::size_t>{3, 4, 5}));
  EXPECT_EQ(cfg.models.size(), 3u);
  const auto h = cfg.hyper_for(ModelKind::kBiConvMF);
  EXPECT_EQ(h.lambda_u, 100.0);
  EXPECT_EQ(h.cnn.k, 50u);
  EXPECT_EQ(cfg.hyper_for(ModelKind::kPMF).lambda_u, 1.0);
}

TEST(Config, ParsesSectionsAndResolvesPaths) {
  const auto p = write_ini("full.ini",
                           "[data]\npath = reviews.json\nfirst_n = 100\nseed = 9\n"
                           "[cnn]\nwindow_sizes = 2, 3\nn_filters = 7\n"
                           "[train]\nk = 6\n"
                           "[compare]\nmodels = PMF, BiConvMF+\nn_runs = 2\n"
                           "[BiConvMF+]\nlambda_u = 3\n"
                           "[corpus]\npretrained = vec.txt\n");
  const auto cfg = load_config(p.string());
  EXPECT_EQ(cfg.dataset, (p.parent_path() / "reviews.json").string());
  EXPECT_EQ(cfg.pretrained, (p.parent_path() / "vec.txt").string());
  EXPECT_EQ(cfg.corpus.first_n, 100u);
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.cnn.window_sizes, (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(cfg.models, (std::vector<ModelKind>{ModelKind::kPMF, ModelKind::kBiConvMFPlus}));
  const auto h = cfg.hyper_for(ModelKind::kBiConvMFPlus);
  EXPECT_EQ(h.lambda_u, 3.0);
  EXPECT_EQ(h.lambda_v, 100.0);
  EXPECT_EQ(h.k, 6u);
  EXPECT_EQ(h.cnn.n_filters, 7u);
  EXPECT_FALSE(h.cnn.train_embedding);
  EXPECT_NO_THROW(cfg.validate(cfg.models));
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(load_config(write_ini("typo.ini", "[train]\nkk = 3\n").string()), ConfigError);
  EXPECT_THROW(load_config(write_ini("sect.ini", "[DeepCoNN]\nlambda_u = 1\n").string()), ConfigError);
  EXPECT_THROW(load_config(write_ini("num.ini", "[train]\nk = lots\n").string()), ConfigError);
  EXPECT_THROW(load_config(write_ini("neg.ini", "[train]\nk = -3\n").string()), ConfigError);
  EXPECT_THROW(load_config(write_ini("lam.ini", "[PMF]\nlambda_v = 0\n").string()), ConfigError);
  EXPECT_THROW(load_config(scratch("absent.ini").string()), ConfigError);

  auto cfg = load_config(write_ini("plus.ini", "[compare]\nmodels = BiConvMF+\n").string());
  EXPECT_THROW(cfg.validate(cfg.models), ConfigError);
  cfg = load_config(write_ini("frac.ini", "[data]\ntest_fraction = 1.5\n").string());
  EXPECT_THROW(cfg.validate(cfg.models), ConfigError);
}

TEST(Config, ShippedConfigsLoad) {
  const fs::path dir = fs::path(BICONVMF_SOURCE_DIR) / "configs";
  const auto full = load_config((dir / "movies_tv.ini").string());
  EXPECT_EQ(full.corpus.first_n, 20000u);
  EXPECT_EQ(full.hyper_for(ModelKind::kConvMF).lambda_v, 100.0);
  EXPECT_NO_THROW(full.validate(full.models));
  const auto smoke = load_config((dir / "smoke.ini").string());
  EXPECT_TRUE(fs::exists(smoke.dataset)) << smoke.dataset;
  EXPECT_NO_THROW(smoke.validate(smoke.models));
}

}  // namespace
}  // namespace biconvmf
