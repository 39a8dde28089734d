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

// Run configuration: an INI file with the sections below. Every key is
// optional; unknown sections or keys are rejected.
//
//   [data]     path, first_n, test_fraction, seed
//   [corpus]   max_vocab, min_doc_freq, max_len, embedding_dim, pretrained,
//              train_pretrained_embedding
//   [cnn]      window_sizes (comma list), n_filters, dropout, epochs,
//              batch_size, learning_rate, decay, epsilon, lambda_wu, lambda_wv
//   [train]    k, outer_iters, early_stop_tol, early_stop_patience, threads,
//              clip
//   [compare]  models (comma list), n_runs, record_timing
//   [output]   dir
//   [PMF] [ConvMF] [BiConvMF] [BiConvMF+]   lambda_u, lambda_v

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "biconvmf/bundle.hpp"
#include "biconvmf/errors.hpp"
#include "biconvmf/factorize.hpp"

namespace biconvmf {

struct RunConfig {
  std::string dataset;
  CorpusConfig corpus;
  double test_fraction = 0.2;
  std::uint64_t seed = 1;

  std::size_t embedding_dim = 200;
  std::string pretrained;
  bool train_pretrained_embedding = false;

  CnnConfig cnn;
  OptimizerConfig optimizer;
  double lambda_wu = 1e-4;
  double lambda_wv = 1e-4;

  std::size_t k = 50;
  std::size_t outer_iters = 30;
  double early_stop_tol = 1e-4;
  std::size_t early_stop_patience = 3;
  std::size_t threads = 1;
  bool clip = false;

  std::vector<ModelKind> models{ModelKind::kPMF, ModelKind::kConvMF, ModelKind::kBiConvMF};
  std::size_t n_runs = 5;
  bool record_timing = false;

  std::string out_dir = "out";

  std::map<ModelKind, std::pair<double, double>> lambdas{
      {ModelKind::kPMF, {1.0, 100.0}},
      {ModelKind::kConvMF, {1.0, 100.0}},
      {ModelKind::kBiConvMF, {100.0, 100.0}},
      {ModelKind::kBiConvMFPlus, {100.0, 100.0}},
  };

  SplitSpec split() const { return {test_fraction, seed}; }

  Hyperparams hyper_for(ModelKind kind) const {
    auto h = Hyperparams::defaults_for(kind);
    h.k = k;
    std::tie(h.lambda_u, h.lambda_v) = lambdas.at(kind);
    h.lambda_wu = lambda_wu;
    h.lambda_wv = lambda_wv;
    h.outer_iters = outer_iters;
    h.early_stop_tol = early_stop_tol;
    h.early_stop_patience = early_stop_patience;
    h.seed = seed;
    h.threads = threads;
    h.cnn = cnn;
    h.cnn.k = k;
    h.cnn.embedding_dim = embedding_dim;
    h.cnn.train_embedding = kind == ModelKind::kBiConvMFPlus ? train_pretrained_embedding : true;
    h.optimizer = optimizer;
    return h;
  }

  /// Checks that must pass before any work starts for `kinds`.
  void validate(std::span<const ModelKind> kinds) const {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("data.test_fraction must lie in (0, 1)");
    if (corpus.max_vocab < 1) throw ConfigError("corpus.max_vocab must be >= 1");
    if (corpus.max_len < cnn.max_window()) throw ConfigError("corpus.max_len is shorter than the widest window");
    for (const auto kind : kinds) {
      if (kind == ModelKind::kBiConvMFPlus && pretrained.empty()) {
        throw ConfigError("BiConvMF+ needs corpus.pretrained (a word-vector file)");
      }
      hyper_for(kind).validate();
    }
  }
};

namespace detail {

template <typename T>
T parse_value(const std::string& section, const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T v{};
  if constexpr (std::is_same_v<T, bool>) {
    std::string s;
    in >> s;
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(section + "." + key + ": expected a boolean, got '" + text + "'");
  } else {
    if (!(in >> v) || !(in >> std::ws).eof()) {
      throw ConfigError(section + "." + key + ": cannot parse '" + text + "'");
    }
    if constexpr (std::is_unsigned_v<T>) {
      if (text.find('-') != std::string::npos) throw ConfigError(section + "." + key + ": must be non-negative");
    }
    return v;
  }
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace detail

inline RunConfig load_config(const std::string& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }

  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("config: key '" + section + "' outside any section");
    for (const auto& [key, node] : body) {
      const auto& v = node.data();
      auto as_size = [&] { return detail::parse_value<std::size_t>(section, key, v); };
      auto as_double = [&] { return detail::parse_value<double>(section, key, v); };
      auto as_bool = [&] { return detail::parse_value<bool>(section, key, v); };
      auto unknown = [&] { throw ConfigError("config: unknown key '" + section + "." + key + "'"); };

      if (section == "data") {
        if (key == "path") cfg.dataset = v;
        else if (key == "first_n") cfg.corpus.first_n = as_size();
        else if (key == "test_fraction") cfg.test_fraction = as_double();
        else if (key == "seed") cfg.seed = detail::parse_value<std::uint64_t>(section, key, v);
        else unknown();
      } else if (section == "corpus") {
        if (key == "max_vocab") cfg.corpus.max_vocab = as_size();
        else if (key == "min_doc_freq") cfg.corpus.min_doc_freq = as_size();
        else if (key == "max_len") cfg.corpus.max_len = as_size();
        else if (key == "embedding_dim") cfg.embedding_dim = as_size();
        else if (key == "pretrained") cfg.pretrained = v;
        else if (key == "train_pretrained_embedding") cfg.train_pretrained_embedding = as_bool();
        else unknown();
      } else if (section == "cnn") {
        if (key == "window_sizes") {
          cfg.cnn.window_sizes.clear();
          for (const auto& w : detail::split_list(v)) cfg.cnn.window_sizes.push_back(detail::parse_value<std::size_t>(section, key, w));
        } else if (key == "n_filters") cfg.cnn.n_filters = as_size();
        else if (key == "dropout") cfg.cnn.dropout_rate = as_double();
        else if (key == "epochs") cfg.optimizer.epochs = as_size();
        else if (key == "batch_size") cfg.optimizer.batch_size = as_size();
        else if (key == "learning_rate") cfg.optimizer.learning_rate = as_double();
        else if (key == "decay") cfg.optimizer.decay = as_double();
        else if (key == "epsilon") cfg.optimizer.epsilon = as_double();
        else if (key == "lambda_wu") cfg.lambda_wu = as_double();
        else if (key == "lambda_wv") cfg.lambda_wv = as_double();
        else unknown();
      } else if (section == "train") {
        if (key == "k") cfg.k = as_size();
        else if (key == "outer_iters") cfg.outer_iters = as_size();
        else if (key == "early_stop_tol") cfg.early_stop_tol = as_double();
        else if (key == "early_stop_patience") cfg.early_stop_patience = as_size();
        else if (key == "threads") cfg.threads = as_size();
        else if (key == "clip") cfg.clip = as_bool();
        else unknown();
      } else if (section == "compare") {
        if (key == "models") {
          cfg.models.clear();
          for (const auto& name : detail::split_list(v)) cfg.models.push_back(parse_model_kind(name));
        } else if (key == "n_runs") cfg.n_runs = as_size();
        else if (key == "record_timing") cfg.record_timing = as_bool();
        else unknown();
      } else if (section == "output") {
        if (key == "dir") cfg.out_dir = v;
        else unknown();
      } else {
        const auto kind = [&] {
          try {
            return parse_model_kind(section);
          } catch (const ConfigError&) {
            throw ConfigError("config: unknown section '[" + section + "]'");
          }
        }();
        auto& [lu, lv] = cfg.lambdas[kind];
        if (key == "lambda_u") lu = as_double();
        else if (key == "lambda_v") lv = as_double();
        else unknown();
        if (!(lu > 0.0) || !(lv > 0.0)) throw ConfigError("config: [" + section + "] lambdas must be > 0");
      }
    }
  }
  // Relative paths in the file resolve against the file's directory.
  const auto base = std::filesystem::path(path).parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  resolve(cfg.dataset);
  resolve(cfg.pretrained);
  return cfg;
}

}  // namespace biconvmf
