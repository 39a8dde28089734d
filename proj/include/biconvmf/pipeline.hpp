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

// The four pipeline commands behind the CLI. Outputs live under
// <out>/corpus, <out>/models and <out>/reports; nothing is overwritten unless
// `force` is set.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "biconvmf/bundle.hpp"
#include "biconvmf/checkpoint.hpp"
#include "biconvmf/config.hpp"
#include "biconvmf/corpus.hpp"
#include "biconvmf/errors.hpp"
#include "biconvmf/eval.hpp"
#include "biconvmf/factorize.hpp"
#include "biconvmf/random.hpp"

namespace biconvmf {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitTraining = 4,
};

namespace fs = std::filesystem;

struct OutputLayout {
  fs::path root;
  fs::path corpus_dir() const { return root / "corpus"; }
  fs::path models_dir() const { return root / "models"; }
  fs::path reports_dir() const { return root / "reports"; }
  fs::path bundle() const { return corpus_dir() / "bundle.bin"; }
  fs::path stats() const { return corpus_dir() / "stats.txt"; }

  static std::string slug(ModelKind kind) {
    switch (kind) {
      case ModelKind::kPMF: return "pmf";
      case ModelKind::kConvMF: return "convmf";
      case ModelKind::kBiConvMF: return "biconvmf";
      case ModelKind::kBiConvMFPlus: return "biconvmf_plus";
    }
    return "model";
  }
  fs::path checkpoint(ModelKind kind) const { return models_dir() / (slug(kind) + ".ckpt"); }
  fs::path loss_log(ModelKind kind) const { return models_dir() / (slug(kind) + "_loss.csv"); }
  fs::path eval_report(ModelKind kind) const { return reports_dir() / (slug(kind) + "_eval.csv"); }
  fs::path compare_csv() const { return reports_dir() / "compare.csv"; }
  fs::path compare_plot() const { return reports_dir() / "compare_plot.dat"; }
  fs::path compare_meta() const { return reports_dir() / "compare_meta.txt"; }
};

namespace detail {

inline void refuse_overwrite(const std::vector<fs::path>& outputs, bool force) {
  if (force) return;
  for (const auto& p : outputs) {
    if (fs::exists(p)) throw ConfigError("refusing to overwrite '" + p.string() + "' (pass --force)");
  }
}

inline void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

inline CorpusBundle load_bundle_for(const OutputLayout& out) {
  if (!fs::exists(out.bundle())) {
    throw DataError("no corpus bundle at '" + out.bundle().string() + "'; run `biconvmf ingest` first");
  }
  return load_bundle(out.bundle().string());
}

inline std::optional<EmbeddingTable> pretrained_for(const RunConfig& cfg, const CorpusBundle& corpus,
                                                    std::span<const ModelKind> kinds) {
  if (std::find(kinds.begin(), kinds.end(), ModelKind::kBiConvMFPlus) == kinds.end()) return std::nullopt;
  return load_pretrained_embeddings(cfg.pretrained, corpus.vocab, cfg.embedding_dim,
                                    stream_seed(cfg.seed, "pretrained-missing"));
}

inline std::string hyper_summary(const Hyperparams& h) {
  std::string windows;
  for (auto w : h.cnn.window_sizes) windows += (windows.empty() ? "" : ",") + std::to_string(w);
  return fmt::format(
      "k={} lambda_u={} lambda_v={} lambda_wu={} lambda_wv={} outer_iters={} early_stop_tol={} patience={} "
      "windows={} n_filters={} p={} dropout={} train_embedding={} epochs={} batch={} lr={} decay={}",
      h.k, h.lambda_u, h.lambda_v, h.lambda_wu, h.lambda_wv, h.outer_iters, h.early_stop_tol, h.early_stop_patience,
      windows, h.cnn.n_filters, h.cnn.embedding_dim, h.cnn.dropout_rate, h.cnn.train_embedding, h.optimizer.epochs,
      h.optimizer.batch_size, h.optimizer.learning_rate, h.optimizer.decay);
}

}  // namespace detail

inline std::string format_stats(const std::string& name, const DatasetStats& s) {
  return fmt::format("{:<16}{:>10}{:>10}{:>10}{:>10}\n{:<16}{:>10}{:>10}{:>10}{:>9.2f}%\n", "DataSet", "#users",
                     "#items", "#ratings", "density", name, s.users, s.items, s.ratings, 100.0 * s.density);
}

inline int cmd_ingest(const RunConfig& cfg, bool force) {
  const OutputLayout out{cfg.out_dir};
  if (cfg.dataset.empty()) throw ConfigError("no dataset path (set data.path)");
  cfg.validate({});
  detail::refuse_overwrite({out.bundle(), out.stats()}, force);

  const auto records = parse_reviews_file(cfg.dataset);
  const auto bundle = build_corpus(records, cfg.corpus, cfg.split());

  fs::create_directories(out.corpus_dir());
  save_bundle(bundle, out.bundle().string());
  const auto table = format_stats(fs::path(cfg.dataset).stem().string(), bundle.stats);
  const auto train_n = bundle.train_ratings().size();
  detail::write_text(out.stats(),
                     table + fmt::format("seed {}\ntest_fraction {}\ntrain {}\ntest {}\nvocabulary {}\n", cfg.seed,
                                         cfg.test_fraction, train_n, bundle.ratings.size() - train_n,
                                         bundle.vocab.size()));
  fmt::print("{}", table);
  fmt::print("split: {} train / {} test (seed {}), vocabulary {} tokens\n", train_n, bundle.ratings.size() - train_n,
             cfg.seed, bundle.vocab.size());
  return kExitOk;
}

inline int cmd_train(const RunConfig& cfg, ModelKind kind, bool force) {
  const OutputLayout out{cfg.out_dir};
  const ModelKind kinds[] = {kind};
  cfg.validate(kinds);
  detail::refuse_overwrite({out.checkpoint(kind), out.loss_log(kind)}, force);

  const auto corpus = detail::load_bundle_for(out);
  const auto pretrained = detail::pretrained_for(cfg, corpus, kinds);
  const auto hyper = cfg.hyper_for(kind);

  TrainOptions opts;
  opts.on_iteration = [&](std::size_t iter, const IterationRecord& r) {
    fmt::print(stderr, "[{}] iter {:>3}  loss {:.6e}\n", model_name(kind), iter + 1, r.loss);
  };
  const auto model = train(corpus, corpus.train_ratings(), hyper, pretrained ? &*pretrained : nullptr, opts);

  fs::create_directories(out.models_dir());
  save_model(model, out.checkpoint(kind).string());
  std::string log = "iteration,loss_before_u,loss_after_u,loss_after_v,loss\n";
  for (std::size_t i = 0; i < model.history.size(); ++i) {
    const auto& r = model.history[i];
    log += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}\n", i + 1, r.loss_before_u, r.loss_after_u, r.loss_after_v, r.loss);
  }
  detail::write_text(out.loss_log(kind), log);
  fmt::print("{}: {} outer iterations, final loss {:.6e}, seed {}\n", model_name(kind), model.history.size(),
             model.history.empty() ? 0.0 : model.history.back().loss, hyper.seed);
  return kExitOk;
}

inline int cmd_evaluate(const RunConfig& cfg, ModelKind kind, bool force) {
  const OutputLayout out{cfg.out_dir};
  detail::refuse_overwrite({out.eval_report(kind)}, force);
  const auto corpus = detail::load_bundle_for(out);
  if (!fs::exists(out.checkpoint(kind))) {
    throw DataError("no checkpoint at '" + out.checkpoint(kind).string() + "'; run `biconvmf train` first");
  }
  const auto model = load_model(out.checkpoint(kind).string());
  if (model.user_ids != corpus.user_ids || model.item_ids != corpus.item_ids) {
    throw DataError("checkpoint was trained on a different corpus bundle");
  }
  const auto ev = evaluate(model, corpus.test_ratings(), cfg.clip);
  detail::write_text(out.eval_report(kind),
                     fmt::format("model,seed,rmse,n_test,cold_user,cold_item\n{},{},{:.6f},{},{},{}\n", model_name(kind),
                                 model.hyper.seed, ev.rmse, ev.n, ev.cold_user, ev.cold_item));
  fmt::print("{} test RMSE {:.5f} over {} ratings ({} cold users, {} cold items)\n", model_name(kind), ev.rmse, ev.n,
             ev.cold_user, ev.cold_item);
  return kExitOk;
}

inline int cmd_compare(const RunConfig& cfg, bool force) {
  const OutputLayout out{cfg.out_dir};
  cfg.validate(cfg.models);
  detail::refuse_overwrite({out.compare_csv(), out.compare_plot(), out.compare_meta()}, force);
  const auto corpus = detail::load_bundle_for(out);
  const auto pretrained = detail::pretrained_for(cfg, corpus, cfg.models);

  std::vector<ModelSpec> specs;
  for (const auto kind : cfg.models) specs.push_back({cfg.hyper_for(kind)});

  ExperimentOptions opts;
  opts.clip = cfg.clip;
  opts.pretrained = pretrained ? &*pretrained : nullptr;
  opts.on_run = [](const ModelResult& m, const RunResult& r) {
    if (r.rmse) {
      fmt::print(stderr, "[{}] run {} (seed {}): RMSE {:.5f} in {:.1f}s\n", m.name, r.run, r.seed, *r.rmse, r.seconds);
    } else {
      fmt::print(stderr, "[{}] run {} (seed {}) failed: {}\n", m.name, r.run, r.seed, r.error);
    }
  };
  const auto report = run_experiment(specs, corpus, cfg.n_runs, cfg.seed, opts);

  std::string meta = fmt::format("base_seed {}\nn_runs {}\ntest_fraction {}\nsplit_seed {}\nclip {}\n", cfg.seed,
                                 cfg.n_runs, corpus.split.test_fraction, corpus.split.seed, cfg.clip);
  for (const auto& s : specs) meta += fmt::format("{}: {}\n", s.name(), detail::hyper_summary(s.hyper));
  detail::write_text(out.compare_meta(), meta);
  detail::write_text(out.compare_csv(), report_csv(report, cfg.record_timing));
  detail::write_text(out.compare_plot(), fmt::format("# base_seed {}\n", cfg.seed) + report_plot_data(report));
  fmt::print("{}", report_table(report));
  return report.failed_runs() == report.total_runs() ? kExitTraining : kExitOk;
}

}  // namespace biconvmf
