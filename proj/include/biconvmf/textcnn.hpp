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

// Text CNN mapping a token document to a k-dimensional latent vector:
//
//   embedding lookup -> parallel convolutions (one bank per window width,
//   tanh) -> max-over-time pooling -> linear projection to k outputs.
//
// Scanned windows. With L = max(true_len, widest window), capped at the
// document length, a bank of width w scans positions t = 0 .. L - w. Windows
// therefore never lie entirely in padding once the text is at least as long
// as the widest window, and appending padding never changes the output.
// Shorter texts are scanned over the widest-window span using the zero pad
// rows.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "biconvmf/corpus.hpp"
#include "biconvmf/errors.hpp"
#include "biconvmf/linalg.hpp"
#include "biconvmf/random.hpp"

namespace biconvmf {

struct CnnConfig {
  std::vector<std::size_t> window_sizes{3, 4, 5};
  std::size_t n_filters = 100;
  std::size_t embedding_dim = 200;
  std::size_t k = 50;
  double dropout_rate = 0.2;
  bool train_embedding = true;

  std::size_t pooled_size() const { return window_sizes.size() * n_filters; }
  std::size_t max_window() const {
    return window_sizes.empty() ? 0 : *std::max_element(window_sizes.begin(), window_sizes.end());
  }

  void validate() const {
    if (window_sizes.empty() || n_filters == 0 || embedding_dim == 0 || k == 0) {
      throw ConfigError("cnn: window sizes, filter count, embedding dim and k must all be positive");
    }
    if (std::find(window_sizes.begin(), window_sizes.end(), std::size_t{0}) != window_sizes.end()) {
      throw ConfigError("cnn: window size 0");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("cnn: dropout rate must lie in [0, 1)");
  }
};

/// Mini-batch settings for fit_to_targets. The update is RMSProp-style:
/// cache = decay * cache + (1 - decay) * g^2, w -= lr * g / (sqrt(cache) + eps).
struct OptimizerConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  double decay = 0.9;
  double epsilon = 1e-8;
};

/// All CNN weights in one flat buffer:
///   embedding  (vocab_rows x p)
///   per bank   filters (n_filters x w*p), biases (n_filters)
///   projection (pooled x k), projection bias (k)
class CnnParams {
 public:
  struct Segment {
    std::size_t offset = 0;
    std::size_t size = 0;
    bool trainable = true;
    bool regularized = true;
  };

  CnnParams() = default;

  CnnParams(CnnConfig config, std::size_t vocab_rows) : config_(std::move(config)), vocab_rows_(vocab_rows) {
    config_.validate();
    if (vocab_rows_ == 0) throw std::invalid_argument("cnn: vocabulary needs at least the padding row");
    const auto p = config_.embedding_dim;
    std::size_t at = 0;
    auto add = [&](std::size_t size, bool trainable, bool regularized) {
      segments_.push_back({at, size, trainable, regularized});
      at += size;
      return segments_.size() - 1;
    };
    embedding_ = add(vocab_rows_ * p, config_.train_embedding, config_.train_embedding);
    for (const auto w : config_.window_sizes) {
      filters_.push_back(add(config_.n_filters * w * p, true, true));
      biases_.push_back(add(config_.n_filters, true, false));
    }
    projection_ = add(config_.pooled_size() * config_.k, true, true);
    projection_bias_ = add(config_.k, true, false);
    values_.assign(at, 0.0);
  }

  const CnnConfig& config() const { return config_; }
  std::size_t vocab_rows() const { return vocab_rows_; }
  const std::vector<Segment>& segments() const { return segments_; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  std::span<double> embedding() { return seg(embedding_); }
  std::span<const double> embedding() const { return seg(embedding_); }
  std::span<double> filters(std::size_t bank) { return seg(filters_.at(bank)); }
  std::span<const double> filters(std::size_t bank) const { return seg(filters_.at(bank)); }
  std::span<double> filter_bias(std::size_t bank) { return seg(biases_.at(bank)); }
  std::span<const double> filter_bias(std::size_t bank) const { return seg(biases_.at(bank)); }
  std::span<double> projection() { return seg(projection_); }
  std::span<const double> projection() const { return seg(projection_); }
  std::span<double> projection_bias() { return seg(projection_bias_); }
  std::span<const double> projection_bias() const { return seg(projection_bias_); }

  /// Offsets of the named blocks inside values(); gradients share the layout.
  std::size_t embedding_offset() const { return segments_[embedding_].offset; }
  std::size_t filters_offset(std::size_t bank) const { return segments_[filters_.at(bank)].offset; }
  std::size_t filter_bias_offset(std::size_t bank) const { return segments_[biases_.at(bank)].offset; }
  std::size_t projection_offset() const { return segments_[projection_].offset; }
  std::size_t projection_bias_offset() const { return segments_[projection_bias_].offset; }

  /// Squared L2 norm of the regularized weights (filters, projection and a
  /// trainable embedding; biases excluded).
  double weight_norm_sq() const {
    double s = 0.0;
    for (const auto& sg : segments_) {
      if (!sg.regularized) continue;
      for (std::size_t i = sg.offset; i < sg.offset + sg.size; ++i) s += values_[i] * values_[i];
    }
    return s;
  }

  friend bool operator==(const CnnParams& a, const CnnParams& b) {
    return a.vocab_rows_ == b.vocab_rows_ && a.config_.window_sizes == b.config_.window_sizes &&
           a.config_.n_filters == b.config_.n_filters && a.config_.embedding_dim == b.config_.embedding_dim &&
           a.config_.k == b.config_.k && a.config_.train_embedding == b.config_.train_embedding &&
           a.values_ == b.values_;
  }

 private:
  std::span<double> seg(std::size_t i) { return std::span<double>(values_).subspan(segments_[i].offset, segments_[i].size); }
  std::span<const double> seg(std::size_t i) const {
    return std::span<const double>(values_).subspan(segments_[i].offset, segments_[i].size);
  }

  CnnConfig config_;
  std::size_t vocab_rows_ = 0;
  std::vector<Segment> segments_;
  std::size_t embedding_ = 0, projection_ = 0, projection_bias_ = 0;
  std::vector<std::size_t> filters_, biases_;
  std::vector<double> values_;
};

namespace detail {

inline void init_dense_weights(CnnParams& params, std::uint64_t seed) {
  const auto& cfg = params.config();
  const auto p = static_cast<double>(cfg.embedding_dim);
  Rng rng(stream_seed(seed, "cnn-filters"));
  for (std::size_t b = 0; b < cfg.window_sizes.size(); ++b) {
    const double bound = std::sqrt(6.0 / (static_cast<double>(cfg.window_sizes[b]) * p + static_cast<double>(cfg.n_filters)));
    for (auto& w : params.filters(b)) w = rng.uniform(-bound, bound);
  }
  Rng prng(stream_seed(seed, "cnn-projection"));
  const double bound = std::sqrt(6.0 / static_cast<double>(cfg.pooled_size() + cfg.k));
  for (auto& w : params.projection()) w = prng.uniform(-bound, bound);
}

}  // namespace detail

/// Fresh parameters: embedding rows ~ Uniform(-0.1, 0.1) (row 0 zero),
/// Glorot-uniform filters and projection, zero biases.
inline CnnParams init_cnn_params(const CnnConfig& config, std::size_t vocab_rows, std::uint64_t seed) {
  CnnParams params(config, vocab_rows);
  const auto table = random_embeddings(vocab_rows, config.embedding_dim, 0.1, stream_seed(seed, "cnn-embedding"));
  std::copy(table.values.begin(), table.values.end(), params.embedding().begin());
  detail::init_dense_weights(params, seed);
  return params;
}

/// Parameters whose embedding layer starts from a supplied table.
inline CnnParams init_cnn_params(const CnnConfig& config, const EmbeddingTable& table, std::uint64_t seed) {
  if (table.dim != config.embedding_dim) {
    throw ConfigError("cnn: embedding table has dim " + std::to_string(table.dim) + ", config expects " +
                      std::to_string(config.embedding_dim));
  }
  CnnParams params(config, table.rows());
  std::copy(table.values.begin(), table.values.end(), params.embedding().begin());
  std::fill_n(params.embedding().begin(), config.embedding_dim, 0.0);
  detail::init_dense_weights(params, seed);
  return params;
}

namespace detail {

struct ForwardTrace {
  std::size_t span = 0;                     // scanned prefix length L
  DenseMatrix embedded;                     // L x p
  std::vector<double> pooled;               // tanh activations at the argmax
  std::vector<std::size_t> argmax;          // window start per pooled feature
  DenseVector output;
};

inline std::size_t scanned_span(const CnnConfig& cfg, const TokenDocument& doc) {
  const auto widest = cfg.max_window();
  if (widest > doc.max_len()) {
    throw std::invalid_argument("cnn: window width " + std::to_string(widest) + " exceeds document length " +
                                std::to_string(doc.max_len()));
  }
  return std::min(doc.max_len(), std::max(doc.true_len, widest));
}

inline ForwardTrace run_forward(const CnnParams& params, const TokenDocument& doc, std::span<const double> mask) {
  const auto& cfg = params.config();
  const auto p = cfg.embedding_dim;
  const auto nf = cfg.n_filters;

  ForwardTrace tr;
  tr.span = scanned_span(cfg, doc);
  tr.embedded.resize(static_cast<Eigen::Index>(tr.span), static_cast<Eigen::Index>(p));
  const auto emb = params.embedding();
  for (std::size_t t = 0; t < tr.span; ++t) {
    const auto tok = doc.indices[t];
    if (tok >= params.vocab_rows()) throw std::out_of_range("cnn: token index beyond embedding table");
    std::copy_n(emb.begin() + static_cast<std::ptrdiff_t>(tok * p), p, tr.embedded.row(static_cast<Eigen::Index>(t)).data());
  }

  tr.pooled.resize(cfg.pooled_size());
  tr.argmax.resize(cfg.pooled_size());
  for (std::size_t b = 0; b < cfg.window_sizes.size(); ++b) {
    const auto w = cfg.window_sizes[b];
    const auto positions = static_cast<Eigen::Index>(tr.span - w + 1);
    // Row t of `windows` is the flattened w x p slice starting at token t.
    Eigen::Map<const DenseMatrix, 0, Eigen::OuterStride<>> windows(tr.embedded.data(), positions,
                                                                   static_cast<Eigen::Index>(w * p),
                                                                   Eigen::OuterStride<>(static_cast<Eigen::Index>(p)));
    Eigen::Map<const DenseMatrix> filters(params.filters(b).data(), static_cast<Eigen::Index>(nf),
                                          static_cast<Eigen::Index>(w * p));
    const DenseMatrix pre = windows * filters.transpose();  // positions x nf
    const auto bias = params.filter_bias(b);
    for (std::size_t f = 0; f < nf; ++f) {
      Eigen::Index best = 0;
      double best_val = pre(0, static_cast<Eigen::Index>(f));
      for (Eigen::Index t = 1; t < positions; ++t) {
        if (pre(t, static_cast<Eigen::Index>(f)) > best_val) {
          best_val = pre(t, static_cast<Eigen::Index>(f));
          best = t;
        }
      }
      tr.pooled[b * nf + f] = std::tanh(best_val + bias[f]);
      tr.argmax[b * nf + f] = static_cast<std::size_t>(best);
    }
  }

  const auto k = static_cast<Eigen::Index>(cfg.k);
  Eigen::Map<const DenseMatrix> proj(params.projection().data(), static_cast<Eigen::Index>(cfg.pooled_size()), k);
  Eigen::Map<const DenseVector> proj_bias(params.projection_bias().data(), k);
  DenseVector h = Eigen::Map<const DenseVector>(tr.pooled.data(), static_cast<Eigen::Index>(tr.pooled.size()));
  if (!mask.empty()) h.array() *= Eigen::Map<const Eigen::ArrayXd>(mask.data(), static_cast<Eigen::Index>(mask.size()));
  tr.output = proj.transpose() * h + proj_bias;
  return tr;
}

/// Adds scale * d(data loss)/d(params) into `grads` and returns the data loss
/// (lambda/2)||target - cnn(doc)||^2. Embedding gradients are skipped when
/// the embedding is frozen.
inline double accumulate_data_gradient(const CnnParams& params, const TokenDocument& doc, const DenseVector& target,
                                       double lambda, std::span<const double> mask, std::span<double> grads,
                                       double scale) {
  const auto& cfg = params.config();
  const auto p = cfg.embedding_dim;
  const auto nf = cfg.n_filters;
  const auto k = cfg.k;
  const auto tr = run_forward(params, doc, mask);

  const DenseVector resid = tr.output - target;
  const double loss = 0.5 * lambda * resid.squaredNorm();
  const DenseVector d_out = lambda * resid;

  const auto proj = params.projection();
  double* g_proj = grads.data() + params.projection_offset();
  double* g_pbias = grads.data() + params.projection_bias_offset();
  for (std::size_t j = 0; j < k; ++j) g_pbias[j] += scale * d_out(static_cast<Eigen::Index>(j));

  double* g_emb = cfg.train_embedding ? grads.data() + params.embedding_offset() : nullptr;

  for (std::size_t b = 0; b < cfg.window_sizes.size(); ++b) {
    const auto w = cfg.window_sizes[b];
    const auto filters = params.filters(b);
    double* g_filt = grads.data() + params.filters_offset(b);
    double* g_bias = grads.data() + params.filter_bias_offset(b);
    for (std::size_t f = 0; f < nf; ++f) {
      const auto fi = b * nf + f;
      const double keep = mask.empty() ? 1.0 : mask[fi];
      const double h = keep * tr.pooled[fi];
      double d_h = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        g_proj[fi * k + j] += scale * h * d_out(static_cast<Eigen::Index>(j));
        d_h += proj[fi * k + j] * d_out(static_cast<Eigen::Index>(j));
      }
      if (keep == 0.0) continue;
      const double d_pre = scale * keep * d_h * (1.0 - tr.pooled[fi] * tr.pooled[fi]);
      if (d_pre == 0.0) continue;
      g_bias[f] += d_pre;
      const auto t0 = tr.argmax[fi];
      const double* window = tr.embedded.row(static_cast<Eigen::Index>(t0)).data();  // w*p contiguous
      const double* filt = filters.data() + f * w * p;
      double* g_f = g_filt + f * w * p;
      for (std::size_t i = 0; i < w * p; ++i) g_f[i] += d_pre * window[i];
      if (g_emb) {
        for (std::size_t o = 0; o < w; ++o) {
          const auto tok = doc.indices[t0 + o];
          if (tok == 0) continue;
          double* g_row = g_emb + tok * p;
          for (std::size_t d = 0; d < p; ++d) g_row[d] += d_pre * filt[o * p + d];
        }
      }
    }
  }
  return loss;
}

inline void add_weight_decay(const CnnParams& params, double lambda_w, std::span<double> grads) {
  if (lambda_w == 0.0) return;
  const auto values = params.values();
  for (const auto& sg : params.segments()) {
    if (!sg.regularized) continue;
    for (std::size_t i = sg.offset; i < sg.offset + sg.size; ++i) grads[i] += lambda_w * values[i];
  }
}

}  // namespace detail

/// Deterministic inference pass (no dropout).
inline DenseVector forward(const CnnParams& params, const TokenDocument& doc) {
  return detail::run_forward(params, doc, {}).output;
}

/// Pooled activations, exposed for inspection; each lies in (-1, 1).
inline std::vector<double> pooled_features(const CnnParams& params, const TokenDocument& doc) {
  return detail::run_forward(params, doc, {}).pooled;
}

struct CnnGradient {
  double loss = 0.0;
  std::vector<double> grads;  // same layout as CnnParams::values()
};

/// Loss (lambda/2)||target - cnn(doc)||^2 + (lambda_w/2)||W||^2 and its exact
/// gradient. `dropout_mask` multiplies the pooled features (empty = none).
inline CnnGradient gradient(const CnnParams& params, const TokenDocument& doc, const DenseVector& target,
                            double lambda, double lambda_w, std::span<const double> dropout_mask = {}) {
  if (static_cast<std::size_t>(target.size()) != params.config().k) throw std::invalid_argument("cnn: target size != k");
  if (!dropout_mask.empty() && dropout_mask.size() != params.config().pooled_size()) {
    throw std::invalid_argument("cnn: dropout mask size != pooled size");
  }
  CnnGradient out;
  out.grads.assign(params.values().size(), 0.0);
  out.loss = detail::accumulate_data_gradient(params, doc, target, lambda, dropout_mask, out.grads, 1.0) +
             0.5 * lambda_w * params.weight_norm_sq();
  detail::add_weight_decay(params, lambda_w, out.grads);
  return out;
}

/// Mean over documents of (lambda/2)||target_i - cnn(doc_i)||^2, plus
/// (lambda_w/2)||W||^2. `targets` holds one column per document.
inline double mean_fit_loss(const CnnParams& params, std::span<const TokenDocument* const> docs,
                            const Eigen::MatrixXd& targets, double lambda, double lambda_w) {
  double sum = 0.0;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    sum += 0.5 * lambda * (forward(params, *docs[i]) - targets.col(static_cast<Eigen::Index>(i))).squaredNorm();
  }
  const double data = docs.empty() ? 0.0 : sum / static_cast<double>(docs.size());
  return data + 0.5 * lambda_w * params.weight_norm_sq();
}

struct FitResult {
  CnnParams params;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

/// Fits the CNN so cnn(doc_i) tracks column i of `targets` by mini-batch
/// backpropagation. Returns the best parameters seen (evaluated without
/// dropout after each epoch), so final_loss <= initial_loss always holds.
inline FitResult fit_to_targets(CnnParams params, std::span<const TokenDocument* const> docs,
                                const Eigen::MatrixXd& targets, double lambda, double lambda_w,
                                const OptimizerConfig& opt, std::uint64_t seed) {
  const auto& cfg = params.config();
  if (static_cast<std::size_t>(targets.cols()) != docs.size() || static_cast<std::size_t>(targets.rows()) != cfg.k) {
    throw std::invalid_argument("fit_to_targets: targets must be k x (number of documents)");
  }
  if (opt.batch_size == 0) throw ConfigError("fit_to_targets: batch size must be positive");

  FitResult result;
  result.initial_loss = mean_fit_loss(params, docs, targets, lambda, lambda_w);
  if (!std::isfinite(result.initial_loss)) {
    throw TrainingError("fit_to_targets: non-finite loss before the first step");
  }
  result.final_loss = result.initial_loss;
  result.params = params;
  if (docs.empty()) return result;

  Rng rng(seed);
  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grads(params.values().size());
  std::vector<double> cache(params.values().size(), 0.0);
  std::vector<double> mask(cfg.dropout_rate > 0.0 ? cfg.pooled_size() : 0);
  const double keep_scale = 1.0 / (1.0 - cfg.dropout_rate);

  std::size_t batch_index = 0;
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size, ++batch_index) {
      const auto end = std::min(order.size(), start + opt.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      std::fill(grads.begin(), grads.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        for (auto& m : mask) m = rng.bernoulli(cfg.dropout_rate) ? 0.0 : keep_scale;
        const auto e = order[i];
        batch_loss += scale * detail::accumulate_data_gradient(params, *docs[e], targets.col(static_cast<Eigen::Index>(e)),
                                                               lambda, mask, grads, scale);
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("fit_to_targets: non-finite loss at batch " + std::to_string(batch_index) +
                            " (epoch " + std::to_string(epoch) + ", step size " + std::to_string(opt.learning_rate) + ")");
      }
      detail::add_weight_decay(params, lambda_w, grads);

      auto values = params.values();
      for (const auto& sg : params.segments()) {
        if (!sg.trainable) continue;
        for (std::size_t i = sg.offset; i < sg.offset + sg.size; ++i) {
          const double g = grads[i];
          cache[i] = opt.decay * cache[i] + (1.0 - opt.decay) * g * g;
          values[i] -= opt.learning_rate * g / (std::sqrt(cache[i]) + opt.epsilon);
        }
      }
    }

    const double loss = mean_fit_loss(params, docs, targets, lambda, lambda_w);
    if (!std::isfinite(loss)) {
      throw TrainingError("fit_to_targets: non-finite loss after epoch " + std::to_string(epoch) + " (step size " +
                          std::to_string(opt.learning_rate) + ")");
    }
    if (loss < result.final_loss) {
      result.final_loss = loss;
      result.params = params;
    }
  }
  return result;
}

inline FitResult fit_to_targets(CnnParams params, std::span<const TokenDocument> docs, const Eigen::MatrixXd& targets,
                                double lambda, double lambda_w, const OptimizerConfig& opt, std::uint64_t seed) {
  std::vector<const TokenDocument*> ptrs;
  ptrs.reserve(docs.size());
  for (const auto& d : docs) ptrs.push_back(&d);
  return fit_to_targets(std::move(params), ptrs, targets, lambda, lambda_w, opt, seed);
}

}  // namespace biconvmf
