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

#include <cmath>
#include <span>
#include <string>

#include <Eigen/Core>

#include "biconvmf/errors.hpp"

namespace biconvmf {

using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using DenseVector = Eigen::VectorXd;

/// Sum of outer products c c^T over the selected columns of `factors`
/// (k x n, one latent vector per column), accumulated in `columns` order.
/// Only the upper triangle is computed; the lower one is mirrored from it.
inline DenseMatrix weighted_gram(const Eigen::MatrixXd& factors, std::span<const std::uint32_t> columns) {
  const auto k = factors.rows();
  DenseMatrix g = DenseMatrix::Zero(k, k);
  for (const auto c : columns) {
    const double* v = factors.col(c).data();
    for (Eigen::Index a = 0; a < k; ++a) {
      const double va = v[a];
      double* row = g.row(a).data();
      for (Eigen::Index b = a; b < k; ++b) row[b] += va * v[b];
    }
  }
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < a; ++b) g(a, b) = g(b, a);
  return g;
}

/// Solves A x = b for symmetric positive-definite A by Cholesky
/// factorization. Throws TrainingError naming the pivot that went
/// non-positive.
inline DenseVector spd_solve(const DenseMatrix& a, const DenseVector& b) {
  const auto n = a.rows();
  if (a.cols() != n || b.size() != n) throw std::invalid_argument("spd_solve: shape mismatch");

  // Lower-triangular L with A = L L^T.
  DenseMatrix l = DenseMatrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j);
    for (Eigen::Index p = 0; p < j; ++p) d -= l(j, p) * l(j, p);
    if (!(d > 0.0)) throw TrainingError("spd_solve: non-positive pivot at index " + std::to_string(j));
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index p = 0; p < j; ++p) s -= l(i, p) * l(j, p);
      l(i, j) = s / ljj;
    }
  }

  DenseVector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = b(i);
    for (Eigen::Index p = 0; p < i; ++p) s -= l(i, p) * y(p);
    y(i) = s / l(i, i);
  }
  DenseVector x(n);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    double s = y(i);
    for (Eigen::Index p = i + 1; p < n; ++p) s -= l(p, i) * x(p);
    x(i) = s / l(i, i);
  }
  return x;
}

}  // namespace biconvmf
