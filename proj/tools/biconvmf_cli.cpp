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

#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "biconvmf/pipeline.hpp"

namespace {

using namespace biconvmf;

struct Flags {
  std::string config;
  std::string model;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;
  bool clip = false;
};

RunConfig resolve(const Flags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : load_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (f.clip) cfg.clip = true;
  return cfg;
}

ModelKind model_flag(const Flags& f) {
  if (f.model.empty()) throw ConfigError("--model is required (PMF, ConvMF, BiConvMF or BiConvMF+)");
  return parse_model_kind(f.model);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BiConvMF: review-aware probabilistic matrix factorization"};
  app.require_subcommand(1);
  Flags flags;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "INI run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "base seed (split and initialization)");
    sub->add_option("--out", flags.out, "output root; artifacts go to <out>/{corpus,models,reports}");
    sub->add_flag("--force", flags.force, "overwrite existing outputs");
  };

  auto* ingest = app.add_subcommand("ingest", "parse reviews, split, and build the corpus bundle");
  common(ingest);
  auto* train_cmd = app.add_subcommand("train", "train one model and write its checkpoint");
  common(train_cmd);
  train_cmd->add_option("--model", flags.model, "PMF, ConvMF, BiConvMF or BiConvMF+")->required();
  auto* evaluate_cmd = app.add_subcommand("evaluate", "test RMSE of a trained checkpoint");
  common(evaluate_cmd);
  evaluate_cmd->add_option("--model", flags.model, "PMF, ConvMF, BiConvMF or BiConvMF+")->required();
  evaluate_cmd->add_flag("--clip", flags.clip, "clip predictions to [1, 5]");
  auto* compare = app.add_subcommand("compare", "repeated-run RMSE comparison across models");
  common(compare);
  compare->add_flag("--clip", flags.clip, "clip predictions to [1, 5]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    const auto cfg = resolve(flags);
    if (ingest->parsed()) return cmd_ingest(cfg, flags.force);
    if (train_cmd->parsed()) return cmd_train(cfg, model_flag(flags), flags.force);
    if (evaluate_cmd->parsed()) return cmd_evaluate(cfg, model_flag(flags), flags.force);
    if (compare->parsed()) return cmd_compare(cfg, flags.force);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    fmt::print(stderr, "data error: {}\n", e.what());
    return kExitData;
  } catch (const TrainingError& e) {
    fmt::print(stderr, "training failed: {}\n", e.what());
    return kExitTraining;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitData;
  }
  return kExitConfig;
}
