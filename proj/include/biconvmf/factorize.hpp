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

// Alternating MAP estimation of (U, V, W_U, W_V) for PMF, ConvMF, BiConvMF
// and BiConvMF+.
//
// Objective, with t_i = cnn(W_U, X_i) and t_j = cnn(W_V, X_j) (zero where a
// model has no CNN on that side):
//
//   L = sum_{rated (i,j)} 1/2 (r_ij - u_i.v_j)^2
//     + lambda_U/2 sum_i ||u_i - t_i||^2 + lambda_V/2 sum_j ||v_j - t_j||^2
//     + lambda_WU/2 ||W_U||^2 + lambda_WV/2 ||W_V||^2
//
// Each outer iteration: refresh CNN targets, solve every u_i in closed form,
// then every v_j, then refit the active CNNs to the new factor columns.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "biconvmf/bundle.hpp"
#include "biconvmf/errors.hpp"
#include "biconvmf/linalg.hpp"
#include "biconvmf/random.hpp"
#include "biconvmf/ratings.hpp"
#include "biconvmf/textcnn.hpp"

namespace biconvmf {

enum class ModelKind : std::uint8_t { kPMF = 0, kConvMF = 1, kBiConvMF = 2, kBiConvMFPlus = 3 };

inline constexpr ModelKind kAllModelKinds[] = {ModelKind::kPMF, ModelKind::kConvMF, ModelKind::kBiConvMF,
                                               ModelKind::kBiConvMFPlus};

inline std::string_view model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kPMF: return "PMF";
    case ModelKind::kConvMF: return "ConvMF";
    case ModelKind::kBiConvMF: return "BiConvMF";
    case ModelKind::kBiConvMFPlus: return "BiConvMF+";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view name) {
  for (const auto kind : kAllModelKinds) {
    if (model_name(kind) == name) return kind;
  }
  throw ConfigError("unknown model '" + std::string(name) + "' (expected PMF, ConvMF, BiConvMF or BiConvMF+)");
}

inline bool uses_user_cnn(ModelKind kind) { return kind == ModelKind::kBiConvMF || kind == ModelKind::kBiConvMFPlus; }
inline bool uses_item_cnn(ModelKind kind) { return kind != ModelKind::kPMF; }

struct Hyperparams {
  ModelKind kind = ModelKind::kBiConvMF;
  std::size_t k = 50;
  double lambda_u = 100.0;
  double lambda_v = 100.0;
  double lambda_wu = 1e-4;
  double lambda_wv = 1e-4;
  std::size_t outer_iters = 30;
  double early_stop_tol = 1e-4;         // relative change of the loss
  std::size_t early_stop_patience = 3;  // consecutive iterations below tol
  std::uint64_t seed = 0;
  CnnConfig cnn;
  OptimizerConfig optimizer;
  std::size_t threads = 1;  // row updates; results do not depend on it

  /// Shipped lambda_U / lambda_V per model; BiConvMF+ freezes its pretrained
  /// embedding.
  static Hyperparams defaults_for(ModelKind kind) {
    Hyperparams h;
    h.kind = kind;
    switch (kind) {
      case ModelKind::kPMF:
      case ModelKind::kConvMF:
        h.lambda_u = 1.0;
        h.lambda_v = 100.0;
        break;
      case ModelKind::kBiConvMF:
      case ModelKind::kBiConvMFPlus:
        h.lambda_u = 100.0;
        h.lambda_v = 100.0;
        break;
    }
    h.cnn.train_embedding = kind != ModelKind::kBiConvMFPlus;
    return h;
  }

  void validate() const {
    if (k < 1) throw ConfigError("k must be >= 1");
    if (!(lambda_u > 0.0) || !(lambda_v > 0.0)) throw ConfigError("lambda_u and lambda_v must be > 0");
    if (!(lambda_wu >= 0.0) || !(lambda_wv >= 0.0)) throw ConfigError("lambda_w values must be >= 0");
    if (uses_item_cnn(kind)) {
      cnn.validate();
      if (cnn.k != k) throw ConfigError("cnn output size must equal k");
    }
  }
};

/// U is k x N and V is k x M; column i is the latent vector of entity i.
struct LatentFactors {
  Eigen::MatrixXd U;
  Eigen::MatrixXd V;

  std::size_t k() const { return static_cast<std::size_t>(U.rows()); }
};

/// Every entry i.i.d. Uniform(0, 1); U is filled before V.
inline LatentFactors init_factors(std::size_t n_users, std::size_t n_items, std::size_t k, std::uint64_t seed) {
  if (n_users < 1 || n_items < 1 || k < 1) throw std::invalid_argument("init_factors: N, M and k must be >= 1");
  Rng rng(stream_seed(seed, "factors"));
  LatentFactors f{Eigen::MatrixXd(k, n_users), Eigen::MatrixXd(k, n_items)};
  for (Eigen::Index i = 0; i < f.U.size(); ++i) f.U.data()[i] = rng.uniform();
  for (Eigen::Index i = 0; i < f.V.size(); ++i) f.V.data()[i] = rng.uniform();
  return f;
}

namespace detail {

template <typename Fn>
void parallel_rows(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || n < 2 * threads) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  const auto chunk = (n + threads - 1) / threads;
  for (std::size_t start = 0; start < n; start += chunk) {
    pool.emplace_back([&fn, start, end = std::min(n, start + chunk)] {
      for (std::size_t i = start; i < end; ++i) fn(i);
    });
  }
}

/// x_e = (sum_{nbr} o_nbr o_nbr^T + lambda I)^{-1} (sum_{nbr} r o_nbr + lambda t_e)
template <typename Neighbors, typename Values>
Eigen::MatrixXd solve_side(std::size_t n, Neighbors neighbors, Values values, const Eigen::MatrixXd& other,
                           const Eigen::MatrixXd& targets, double lambda, std::size_t threads) {
  if (!(lambda > 0.0)) throw std::invalid_argument("factor update: lambda must be > 0");
  const auto k = other.rows();
  if (targets.rows() != k || static_cast<std::size_t>(targets.cols()) != n) {
    throw std::invalid_argument("factor update: targets must be k x n");
  }
  Eigen::MatrixXd out(k, static_cast<Eigen::Index>(n));
  parallel_rows(n, threads, [&](std::size_t e) {
    const auto col = static_cast<Eigen::Index>(e);
    const auto nbr = neighbors(e);
    if (nbr.empty()) {
      out.col(col) = targets.col(col);
      return;
    }
    const auto vals = values(e);
    DenseMatrix a = weighted_gram(other, nbr);
    a.diagonal().array() += lambda;
    DenseVector b = lambda * targets.col(col);
    for (std::size_t q = 0; q < nbr.size(); ++q) b += vals[q] * other.col(nbr[q]);
    out.col(col) = spd_solve(a, b);
  });
  return out;
}

}  // namespace detail

/// Closed-form update of every user column with V and the targets fixed.
/// Users without ratings get u_i = target_i.
inline Eigen::MatrixXd update_user_factors(const SparseRatings& ratings, const Eigen::MatrixXd& V,
                                           const Eigen::MatrixXd& targets_u, double lambda_u, std::size_t threads = 1) {
  return detail::solve_side(
      ratings.n_users(), [&](std::size_t i) { return ratings.items_of(i); },
      [&](std::size_t i) { return ratings.ratings_of_user(i); }, V, targets_u, lambda_u, threads);
}

inline Eigen::MatrixXd update_item_factors(const SparseRatings& ratings, const Eigen::MatrixXd& U,
                                           const Eigen::MatrixXd& targets_v, double lambda_v, std::size_t threads = 1) {
  return detail::solve_side(
      ratings.n_items(), [&](std::size_t j) { return ratings.users_of(j); },
      [&](std::size_t j) { return ratings.ratings_of_item(j); }, U, targets_v, lambda_v, threads);
}

struct LossWeights {
  double lambda_u = 1.0;
  double lambda_v = 1.0;
  double lambda_wu = 0.0;
  double lambda_wv = 0.0;
};

/// The full objective. `weight_norm_sq_*` are ||W||^2 of each CNN (0 when
/// absent).
inline double total_loss(const SparseRatings& ratings, const Eigen::MatrixXd& U, const Eigen::MatrixXd& V,
                         const Eigen::MatrixXd& targets_u, const Eigen::MatrixXd& targets_v, const LossWeights& w,
                         double weight_norm_sq_u = 0.0, double weight_norm_sq_v = 0.0) {
  // Extended-precision accumulation keeps the converged half-step
  // differences at the level of the final rounding.
  using wide = long double;
  const auto k = U.rows();
  wide fit = 0.0L;
  for (const auto& r : ratings.triplets()) {
    wide dot = 0.0L;
    for (Eigen::Index d = 0; d < k; ++d) dot += static_cast<wide>(U(d, r.user)) * V(d, r.item);
    const wide e = r.value - dot;
    fit += e * e;
  }
  auto penalty = [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& t) {
    wide s = 0.0L;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const wide d = static_cast<wide>(x.data()[i]) - t.data()[i];
      s += d * d;
    }
    return s;
  };
  const wide total = 0.5L * fit + 0.5L * w.lambda_u * penalty(U, targets_u) + 0.5L * w.lambda_v * penalty(V, targets_v) +
                     0.5L * w.lambda_wu * weight_norm_sq_u + 0.5L * w.lambda_wv * weight_norm_sq_v;
  return static_cast<double>(total);
}

/// Loss bookkeeping for one outer iteration. The first three values share
/// the same CNN targets, so loss_after_u <= loss_before_u and
/// loss_after_v <= loss_after_u up to rounding.
struct IterationRecord {
  double loss_before_u = 0.0;
  double loss_after_u = 0.0;
  double loss_after_v = 0.0;
  double loss = 0.0;  // after the CNN refits and target refresh
};

/// Mean-rating fallbacks for entities unseen in training.
struct FallbackStats {
  double global_mean = 0.0;
  std::vector<double> item_mean;
  std::vector<std::uint32_t> item_count;
  std::vector<std::uint32_t> user_count;
};

inline FallbackStats fallback_stats(const SparseRatings& train) {
  FallbackStats s;
  s.item_mean.assign(train.n_items(), 0.0);
  s.item_count.assign(train.n_items(), 0);
  s.user_count.assign(train.n_users(), 0);
  double total = 0.0;
  for (const auto& r : train.triplets()) {
    total += r.value;
    s.item_mean[r.item] += r.value;
    ++s.item_count[r.item];
    ++s.user_count[r.user];
  }
  for (std::size_t j = 0; j < s.item_mean.size(); ++j) {
    if (s.item_count[j] > 0) s.item_mean[j] /= s.item_count[j];
  }
  s.global_mean = train.size() > 0 ? total / static_cast<double>(train.size()) : 0.0;
  return s;
}

struct TrainedModel {
  Hyperparams hyper;
  LatentFactors factors;
  std::optional<CnnParams> cnn_user;  // BiConvMF, BiConvMF+
  std::optional<CnnParams> cnn_item;  // every model except PMF
  std::vector<IterationRecord> history;
  FallbackStats fallback;
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;

  bool trained() const { return factors.U.size() > 0; }
};

struct TrainOptions {
  /// Replace both CNNs by the zero function (no fitting, no weight penalty).
  /// BiConvMF trained this way must coincide with PMF.
  bool zero_cnn_outputs = false;
  std::function<void(std::size_t, const IterationRecord&)> on_iteration;
};

namespace detail {

inline void refresh_targets(const CnnParams& cnn, std::span<const TokenDocument> docs, Eigen::MatrixXd& targets) {
  for (std::size_t e = 0; e < docs.size(); ++e) targets.col(static_cast<Eigen::Index>(e)) = forward(cnn, docs[e]);
}

/// Refit on entities that have training ratings.
inline double refit(CnnParams& cnn, std::span<const TokenDocument> docs, const Eigen::MatrixXd& factors,
                    const std::vector<std::uint32_t>& counts, double lambda, double lambda_w,
                    const OptimizerConfig& opt, std::uint64_t seed) {
  std::vector<const TokenDocument*> subset;
  std::vector<Eigen::Index> cols;
  for (std::size_t e = 0; e < docs.size(); ++e) {
    if (counts[e] == 0) continue;
    subset.push_back(&docs[e]);
    cols.push_back(static_cast<Eigen::Index>(e));
  }
  Eigen::MatrixXd targets(factors.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) targets.col(static_cast<Eigen::Index>(c)) = factors.col(cols[c]);
  auto fit = fit_to_targets(std::move(cnn), subset, targets, lambda, lambda_w, opt, seed);
  cnn = std::move(fit.params);
  return fit.final_loss;
}

}  // namespace detail

/// Coordinate-descent training. `corpus` supplies ids and documents; `train`
/// must index into the same id space. BiConvMF+ needs `pretrained`.
inline TrainedModel train(const CorpusBundle& corpus, const SparseRatings& train, const Hyperparams& hyper,
                          const EmbeddingTable* pretrained = nullptr, const TrainOptions& options = {}) {
  hyper.validate();
  const auto kind = hyper.kind;
  const auto n_users = corpus.n_users();
  const auto n_items = corpus.n_items();
  if (train.n_users() != n_users || train.n_items() != n_items) {
    throw DataError("training ratings do not match the corpus id space");
  }
  if (uses_user_cnn(kind) && corpus.user_docs.size() != n_users) throw DataError("corpus lacks user documents");
  if (uses_item_cnn(kind) && corpus.item_docs.size() != n_items) throw DataError("corpus lacks item documents");
  if (kind == ModelKind::kBiConvMFPlus && pretrained == nullptr) {
    throw ConfigError("BiConvMF+ requires a pretrained embedding table");
  }

  TrainedModel model;
  model.hyper = hyper;
  model.user_ids = corpus.user_ids;
  model.item_ids = corpus.item_ids;
  model.fallback = fallback_stats(train);
  model.factors = init_factors(n_users, n_items, hyper.k, hyper.seed);

  auto make_cnn = [&](std::string_view side) {
    const auto seed = stream_seed(hyper.seed, std::string("cnn-") + std::string(side));
    return kind == ModelKind::kBiConvMFPlus ? init_cnn_params(hyper.cnn, *pretrained, seed)
                                            : init_cnn_params(hyper.cnn, corpus.vocab.rows(), seed);
  };
  if (uses_user_cnn(kind)) model.cnn_user = make_cnn("user");
  if (uses_item_cnn(kind)) model.cnn_item = make_cnn("item");

  const bool user_active = model.cnn_user && !options.zero_cnn_outputs;
  const bool item_active = model.cnn_item && !options.zero_cnn_outputs;
  const auto k = static_cast<Eigen::Index>(hyper.k);
  Eigen::MatrixXd targets_u = Eigen::MatrixXd::Zero(k, static_cast<Eigen::Index>(n_users));
  Eigen::MatrixXd targets_v = Eigen::MatrixXd::Zero(k, static_cast<Eigen::Index>(n_items));
  if (user_active) detail::refresh_targets(*model.cnn_user, corpus.user_docs, targets_u);
  if (item_active) detail::refresh_targets(*model.cnn_item, corpus.item_docs, targets_v);

  const LossWeights weights{hyper.lambda_u, hyper.lambda_v, hyper.lambda_wu, hyper.lambda_wv};
  auto loss_now = [&] {
    return total_loss(train, model.factors.U, model.factors.V, targets_u, targets_v, weights,
                      user_active ? model.cnn_user->weight_norm_sq() : 0.0,
                      item_active ? model.cnn_item->weight_norm_sq() : 0.0);
  };
  auto check = [](double loss, std::size_t iter, const char* stage) {
    if (!std::isfinite(loss)) {
      throw TrainingError("non-finite loss at outer iteration " + std::to_string(iter) + " after " + stage);
    }
  };

  std::size_t quiet = 0;
  for (std::size_t iter = 0; iter < hyper.outer_iters; ++iter) {
    IterationRecord rec;
    rec.loss_before_u = loss_now();
    check(rec.loss_before_u, iter, "target refresh");

    model.factors.U = update_user_factors(train, model.factors.V, targets_u, hyper.lambda_u, hyper.threads);
    rec.loss_after_u = loss_now();
    check(rec.loss_after_u, iter, "user update");

    model.factors.V = update_item_factors(train, model.factors.U, targets_v, hyper.lambda_v, hyper.threads);
    rec.loss_after_v = loss_now();
    check(rec.loss_after_v, iter, "item update");

    const auto fit_seed = stream_seed(hyper.seed, "fit-" + std::to_string(iter));
    if (user_active) {
      detail::refit(*model.cnn_user, corpus.user_docs, model.factors.U, model.fallback.user_count, hyper.lambda_u,
                    hyper.lambda_wu, hyper.optimizer, stream_seed(fit_seed, "user"));
      detail::refresh_targets(*model.cnn_user, corpus.user_docs, targets_u);
    }
    if (item_active) {
      detail::refit(*model.cnn_item, corpus.item_docs, model.factors.V, model.fallback.item_count, hyper.lambda_v,
                    hyper.lambda_wv, hyper.optimizer, stream_seed(fit_seed, "item"));
      detail::refresh_targets(*model.cnn_item, corpus.item_docs, targets_v);
    }
    rec.loss = loss_now();
    check(rec.loss, iter, "CNN refit");

    const double previous = model.history.empty() ? rec.loss_before_u : model.history.back().loss;
    model.history.push_back(rec);
    if (options.on_iteration) options.on_iteration(iter, rec);

    const double rel = std::abs(previous - rec.loss) / std::max(std::abs(previous), 1e-300);
    quiet = rel < hyper.early_stop_tol ? quiet + 1 : 0;
    if (hyper.early_stop_patience > 0 && quiet >= hyper.early_stop_patience) break;
  }
  return model;
}

/// u_i . v_j when both sides were seen in training; otherwise the item's
/// training mean, or the global mean when the item is unseen too.
inline double predict_index(const TrainedModel& model, std::optional<std::size_t> user, std::optional<std::size_t> item,
                            bool clip = false) {
  if (!model.trained()) throw std::logic_error("predict: model is not trained");
  const auto& fb = model.fallback;
  const bool item_known = item && *item < fb.item_count.size() && fb.item_count[*item] > 0;
  const bool user_known = user && *user < fb.user_count.size() && fb.user_count[*user] > 0;
  double r;
  if (user_known && item_known) {
    r = model.factors.U.col(static_cast<Eigen::Index>(*user)).dot(model.factors.V.col(static_cast<Eigen::Index>(*item)));
  } else if (item_known) {
    r = fb.item_mean[*item];
  } else {
    r = fb.global_mean;
  }
  return clip ? std::clamp(r, 1.0, 5.0) : r;
}

inline double predict(const TrainedModel& model, std::string_view user_key, std::string_view item_key,
                      bool clip = false) {
  auto find = [](const std::vector<std::string>& ids, std::string_view key) -> std::optional<std::size_t> {
    const auto it = std::find(ids.begin(), ids.end(), key);
    if (it == ids.end()) return std::nullopt;
    return static_cast<std::size_t>(it - ids.begin());
  };
  return predict_index(model, find(model.user_ids, user_key), find(model.item_ids, item_key), clip);
}

}  // namespace biconvmf
