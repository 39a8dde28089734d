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

// Model checkpoints.
//
//   magic "BCMF", version 1
//   HYPR  kind:u8 k:u64 lambda_u lambda_v lambda_wu lambda_wv:f64
//         outer_iters:u64 early_stop_tol:f64 patience:u64 seed:u64
//         optimizer: epochs:u64 batch:u64 lr decay eps:f64
//   IDSU / IDSI  user and item keys
//   FACT  U:f64[] V:f64[]                (column-major, k x N and k x M)
//   FALL  global_mean:f64 item_mean:f64[] item_count:u32[] user_count:u32[]
//   HIST  before_u:f64[] after_u:f64[] after_v:f64[] loss:f64[]
//   CNNU / CNNI (optional)
//         windows:u64[] n_filters:u64 p:u64 k:u64 dropout:f64
//         train_embedding:u8 vocab_rows:u64 values:f64[]

#include <cstdint>
#include <string>

#include "biconvmf/binary_io.hpp"
#include "biconvmf/bundle.hpp"
#include "biconvmf/factorize.hpp"

namespace biconvmf {

inline constexpr io::Tag kModelMagic = io::make_tag("BCMF");
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

inline void put_cnn(io::Writer& w, const CnnParams& cnn) {
  const auto& c = cnn.config();
  std::vector<std::uint64_t> windows(c.window_sizes.begin(), c.window_sizes.end());
  w.put_array<std::uint64_t>(windows);
  w.put<std::uint64_t>(c.n_filters);
  w.put<std::uint64_t>(c.embedding_dim);
  w.put<std::uint64_t>(c.k);
  w.put(c.dropout_rate);
  w.put<std::uint8_t>(c.train_embedding ? 1 : 0);
  w.put<std::uint64_t>(cnn.vocab_rows());
  w.put_array<double>(cnn.values());
}

inline CnnParams get_cnn(io::Reader& r) {
  CnnConfig c;
  const auto windows = r.get_array<std::uint64_t>();
  c.window_sizes.assign(windows.begin(), windows.end());
  c.n_filters = r.get<std::uint64_t>();
  c.embedding_dim = r.get<std::uint64_t>();
  c.k = r.get<std::uint64_t>();
  c.dropout_rate = r.get<double>();
  c.train_embedding = r.get<std::uint8_t>() != 0;
  const auto vocab_rows = r.get<std::uint64_t>();
  auto values = r.get_array<double>();
  r.expect_end();
  try {
    CnnParams p(c, vocab_rows);
    if (values.size() != p.values().size()) r.fail("parameter count does not match the stored configuration");
    std::copy(values.begin(), values.end(), p.values().begin());
    return p;
  } catch (const ConfigError& e) {
    r.fail(e.what());
  } catch (const std::invalid_argument& e) {
    r.fail(e.what());
  }
}

}  // namespace detail

inline void save_model(const TrainedModel& m, const std::string& path) {
  if (!m.trained()) throw std::logic_error("save_model: model is not trained");
  io::ContainerWriter out(kModelMagic, kModelVersion);
  const auto& h = m.hyper;
  {
    io::Writer w;
    w.put<std::uint8_t>(static_cast<std::uint8_t>(h.kind));
    w.put<std::uint64_t>(h.k);
    w.put(h.lambda_u);
    w.put(h.lambda_v);
    w.put(h.lambda_wu);
    w.put(h.lambda_wv);
    w.put<std::uint64_t>(h.outer_iters);
    w.put(h.early_stop_tol);
    w.put<std::uint64_t>(h.early_stop_patience);
    w.put<std::uint64_t>(h.seed);
    w.put<std::uint64_t>(h.optimizer.epochs);
    w.put<std::uint64_t>(h.optimizer.batch_size);
    w.put(h.optimizer.learning_rate);
    w.put(h.optimizer.decay);
    w.put(h.optimizer.epsilon);
    out.add(io::make_tag("HYPR"), w);
  }
  {
    io::Writer w;
    detail::put_strings(w, m.user_ids);
    out.add(io::make_tag("IDSU"), w);
  }
  {
    io::Writer w;
    detail::put_strings(w, m.item_ids);
    out.add(io::make_tag("IDSI"), w);
  }
  {
    io::Writer w;
    w.put_array<double>(std::span<const double>(m.factors.U.data(), static_cast<std::size_t>(m.factors.U.size())));
    w.put_array<double>(std::span<const double>(m.factors.V.data(), static_cast<std::size_t>(m.factors.V.size())));
    out.add(io::make_tag("FACT"), w);
  }
  {
    io::Writer w;
    w.put(m.fallback.global_mean);
    w.put_array<double>(m.fallback.item_mean);
    w.put_array<std::uint32_t>(m.fallback.item_count);
    w.put_array<std::uint32_t>(m.fallback.user_count);
    out.add(io::make_tag("FALL"), w);
  }
  {
    io::Writer w;
    std::vector<double> cols[4];
    for (const auto& r : m.history) {
      cols[0].push_back(r.loss_before_u);
      cols[1].push_back(r.loss_after_u);
      cols[2].push_back(r.loss_after_v);
      cols[3].push_back(r.loss);
    }
    for (const auto& c : cols) w.put_array<double>(c);
    out.add(io::make_tag("HIST"), w);
  }
  if (m.cnn_user) {
    io::Writer w;
    detail::put_cnn(w, *m.cnn_user);
    out.add(io::make_tag("CNNU"), w);
  }
  if (m.cnn_item) {
    io::Writer w;
    detail::put_cnn(w, *m.cnn_item);
    out.add(io::make_tag("CNNI"), w);
  }
  out.save(path);
}

inline TrainedModel load_model(const std::string& path) {
  io::ContainerReader in(path, kModelMagic, kModelVersion);
  TrainedModel m;
  auto& h = m.hyper;
  {
    auto r = in.section(io::make_tag("HYPR"));
    const auto kind = r.get<std::uint8_t>();
    if (kind > static_cast<std::uint8_t>(ModelKind::kBiConvMFPlus)) r.fail("unknown model kind");
    h.kind = static_cast<ModelKind>(kind);
    h.k = r.get<std::uint64_t>();
    h.lambda_u = r.get<double>();
    h.lambda_v = r.get<double>();
    h.lambda_wu = r.get<double>();
    h.lambda_wv = r.get<double>();
    h.outer_iters = r.get<std::uint64_t>();
    h.early_stop_tol = r.get<double>();
    h.early_stop_patience = r.get<std::uint64_t>();
    h.seed = r.get<std::uint64_t>();
    h.optimizer.epochs = r.get<std::uint64_t>();
    h.optimizer.batch_size = r.get<std::uint64_t>();
    h.optimizer.learning_rate = r.get<double>();
    h.optimizer.decay = r.get<double>();
    h.optimizer.epsilon = r.get<double>();
    r.expect_end();
  }
  {
    auto r = in.section(io::make_tag("IDSU"));
    m.user_ids = detail::get_strings(r);
    r.expect_end();
  }
  {
    auto r = in.section(io::make_tag("IDSI"));
    m.item_ids = detail::get_strings(r);
    r.expect_end();
  }
  const auto k = static_cast<Eigen::Index>(h.k);
  const auto n = static_cast<Eigen::Index>(m.user_ids.size());
  const auto mm = static_cast<Eigen::Index>(m.item_ids.size());
  {
    auto r = in.section(io::make_tag("FACT"));
    const auto u = r.get_array<double>();
    const auto v = r.get_array<double>();
    r.expect_end();
    if (u.size() != static_cast<std::size_t>(k * n) || v.size() != static_cast<std::size_t>(k * mm)) {
      r.fail("factor sizes do not match k and id counts");
    }
    m.factors.U = Eigen::Map<const Eigen::MatrixXd>(u.data(), k, n);
    m.factors.V = Eigen::Map<const Eigen::MatrixXd>(v.data(), k, mm);
  }
  {
    auto r = in.section(io::make_tag("FALL"));
    m.fallback.global_mean = r.get<double>();
    m.fallback.item_mean = r.get_array<double>();
    m.fallback.item_count = r.get_array<std::uint32_t>();
    m.fallback.user_count = r.get_array<std::uint32_t>();
    r.expect_end();
    if (m.fallback.item_mean.size() != static_cast<std::size_t>(mm) ||
        m.fallback.item_count.size() != static_cast<std::size_t>(mm) ||
        m.fallback.user_count.size() != static_cast<std::size_t>(n)) {
      r.fail("fallback sizes do not match id counts");
    }
  }
  {
    auto r = in.section(io::make_tag("HIST"));
    std::vector<double> cols[4];
    for (auto& c : cols) c = r.get_array<double>();
    r.expect_end();
    for (const auto& c : cols) {
      if (c.size() != cols[0].size()) r.fail("column lengths differ");
    }
    for (std::size_t i = 0; i < cols[0].size(); ++i) m.history.push_back({cols[0][i], cols[1][i], cols[2][i], cols[3][i]});
  }
  if (in.has(io::make_tag("CNNU"))) {
    auto r = in.section(io::make_tag("CNNU"));
    m.cnn_user = detail::get_cnn(r);
    h.cnn = m.cnn_user->config();
  }
  if (in.has(io::make_tag("CNNI"))) {
    auto r = in.section(io::make_tag("CNNI"));
    m.cnn_item = detail::get_cnn(r);
    h.cnn = m.cnn_item->config();
  }
  if (m.cnn_user.has_value() != uses_user_cnn(h.kind) || m.cnn_item.has_value() != uses_item_cnn(h.kind)) {
    throw DataError("checkpoint: CNN sections do not match model kind " + std::string(model_name(h.kind)));
  }
  return m;
}

}  // namespace biconvmf
