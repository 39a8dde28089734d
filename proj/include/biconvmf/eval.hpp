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

// RMSE and the repeated-run comparison protocol: one shared train/test split,
// n runs per model differing only in their initialization seed.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "biconvmf/bundle.hpp"
#include "biconvmf/errors.hpp"
#include "biconvmf/factorize.hpp"

namespace biconvmf {

/// sqrt(sum (actual - predicted)^2 / count) over (actual, predicted) pairs.
inline double rmse(std::span<const std::pair<double, double>> pairs) {
  if (pairs.empty()) throw std::invalid_argument("rmse: no pairs");
  double sum = 0.0;
  for (const auto& [actual, predicted] : pairs) {
    if (!std::isfinite(actual) || !std::isfinite(predicted)) throw std::invalid_argument("rmse: non-finite value");
    const double e = actual - predicted;
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(pairs.size()));
}

struct Evaluation {
  double rmse = 0.0;
  std::size_t n = 0;
  std::size_t cold_user = 0;  // pairs scored by a fallback because the user is unseen
  std::size_t cold_item = 0;
};

/// Scores every test rating; cold-start pairs go through the predict
/// fallbacks rather than being dropped.
inline Evaluation evaluate(const TrainedModel& model, const SparseRatings& test, bool clip = false) {
  Evaluation ev;
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(test.size());
  for (const auto& r : test.triplets()) {
    pairs.emplace_back(r.value, predict_index(model, r.user, r.item, clip));
    if (model.fallback.item_count.at(r.item) == 0) {
      ++ev.cold_item;
    } else if (model.fallback.user_count.at(r.user) == 0) {
      ++ev.cold_user;
    }
  }
  ev.rmse = rmse(pairs);
  ev.n = pairs.size();
  return ev;
}

struct ModelSpec {
  Hyperparams hyper;
  std::string name() const { return std::string(model_name(hyper.kind)); }
};

struct RunResult {
  std::size_t run = 0;  // 1-based
  std::uint64_t seed = 0;
  std::optional<double> rmse;  // empty when the run failed
  double seconds = 0.0;
  std::string error;
};

struct ModelResult {
  std::string name;
  Hyperparams hyper;
  std::vector<RunResult> runs;

  /// Arithmetic mean over successful runs.
  std::optional<double> mean() const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : runs) {
      if (r.rmse) {
        sum += *r.rmse;
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }
};

struct ExperimentReport {
  std::uint64_t base_seed = 0;
  std::size_t n_runs = 0;
  std::vector<ModelResult> models;

  std::size_t failed_runs() const {
    std::size_t n = 0;
    for (const auto& m : models)
      for (const auto& r : m.runs) n += r.rmse ? 0 : 1;
    return n;
  }
  std::size_t total_runs() const { return models.size() * n_runs; }
};

struct ExperimentOptions {
  bool clip = false;
  const EmbeddingTable* pretrained = nullptr;  // needed by BiConvMF+
  std::function<void(const ModelResult&, const RunResult&)> on_run;
};

/// Run r (0-based) of every model is initialized with seed base_seed + r; all
/// runs share the corpus' train/test split.
inline ExperimentReport run_experiment(std::span<const ModelSpec> models, const CorpusBundle& corpus, std::size_t n_runs,
                                       std::uint64_t base_seed, const ExperimentOptions& options = {}) {
  if (n_runs < 1) throw ConfigError("run_experiment: n_runs must be >= 1");
  const auto train_set = corpus.train_ratings();
  const auto test_set = corpus.test_ratings();

  ExperimentReport report{base_seed, n_runs, {}};
  for (const auto& spec : models) {
    ModelResult result{spec.name(), spec.hyper, {}};
    for (std::size_t r = 0; r < n_runs; ++r) {
      RunResult run;
      run.run = r + 1;
      run.seed = base_seed + r;
      auto hyper = spec.hyper;
      hyper.seed = run.seed;
      const auto start = std::chrono::steady_clock::now();
      try {
        const auto model = train(corpus, train_set, hyper, options.pretrained);
        run.rmse = evaluate(model, test_set, options.clip).rmse;
      } catch (const std::exception& e) {
        run.error = e.what();
      }
      run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.runs.push_back(run);
      if (options.on_run) options.on_run(result, run);
    }
    report.models.push_back(std::move(result));
  }
  return report;
}

/// `model,run,rmse,seconds`, then one `model,mean,...` row per model. With
/// `with_timing` false the seconds cells stay empty so the bytes depend only
/// on configuration and seeds.
inline std::string report_csv(const ExperimentReport& report, bool with_timing) {
  std::string out = "model,run,rmse,seconds\n";
  auto cell = [](const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : std::string("failed"); };
  for (const auto& m : report.models) {
    double total = 0.0;
    for (const auto& r : m.runs) {
      total += r.seconds;
      out += fmt::format("{},{},{},{}\n", m.name, r.run, cell(r.rmse), with_timing ? fmt::format("{:.3f}", r.seconds) : "");
    }
    out += fmt::format("{},mean,{},{}\n", m.name, cell(m.mean()), with_timing ? fmt::format("{:.3f}", total) : "");
  }
  return out;
}

/// Whitespace-separated columns: run index, then one RMSE column per model.
inline std::string report_plot_data(const ExperimentReport& report) {
  std::string out = "run";
  for (const auto& m : report.models) out += " " + m.name;
  out += "\n";
  for (std::size_t r = 0; r < report.n_runs; ++r) {
    out += std::to_string(r + 1);
    for (const auto& m : report.models) {
      const auto& v = m.runs.at(r).rmse;
      out += v ? fmt::format(" {:.6f}", *v) : std::string(" nan");
    }
    out += "\n";
  }
  return out;
}

/// Runs as rows, models as columns, with an Average row.
inline std::string report_table(const ExperimentReport& report) {
  std::string out = fmt::format("{:<8}", "");
  for (const auto& m : report.models) out += fmt::format("{:>12}", m.name);
  out += "\n";
  auto cell = [](const std::optional<double>& v) { return v ? fmt::format("{:>12.5f}", *v) : fmt::format("{:>12}", "failed"); };
  for (std::size_t r = 0; r < report.n_runs; ++r) {
    out += fmt::format("{:<8}", r + 1);
    for (const auto& m : report.models) out += cell(m.runs.at(r).rmse);
    out += "\n";
  }
  out += fmt::format("{:<8}", "Average");
  for (const auto& m : report.models) out += cell(m.mean());
  out += "\n";
  return out;
}

}  // namespace biconvmf
