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

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace biconvmf {

struct Rating {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  double value = 0.0;

  friend bool operator==(const Rating&, const Rating&) = default;
};

/// Observed entries of the N x M rating matrix, with CSR-style adjacency in
/// both directions. Duplicate (user, item) pairs are kept as separate entries.
class SparseRatings {
 public:
  SparseRatings() = default;

  SparseRatings(std::size_t n_users, std::size_t n_items, std::vector<Rating> triplets)
      : n_users_(n_users), n_items_(n_items), triplets_(std::move(triplets)) {
    for (const auto& r : triplets_) {
      if (r.user >= n_users_ || r.item >= n_items_) {
        throw std::out_of_range("rating (" + std::to_string(r.user) + ", " + std::to_string(r.item) +
                                ") outside " + std::to_string(n_users_) + " x " +
                                std::to_string(n_items_));
      }
    }
    build_index(n_users_, &Rating::user, &Rating::item, user_ptr_, user_nbr_, user_val_);
    build_index(n_items_, &Rating::item, &Rating::user, item_ptr_, item_nbr_, item_val_);
  }

  std::size_t n_users() const { return n_users_; }
  std::size_t n_items() const { return n_items_; }
  std::size_t size() const { return triplets_.size(); }
  const std::vector<Rating>& triplets() const { return triplets_; }

  double density() const {
    if (n_users_ == 0 || n_items_ == 0) return 0.0;
    return static_cast<double>(triplets_.size()) /
           (static_cast<double>(n_users_) * static_cast<double>(n_items_));
  }

  /// Items rated by `user` and the ratings given, in triplet order.
  std::span<const std::uint32_t> items_of(std::size_t user) const {
    return slice(user_nbr_, user_ptr_, user);
  }
  std::span<const double> ratings_of_user(std::size_t user) const {
    return slice(user_val_, user_ptr_, user);
  }
  std::span<const std::uint32_t> users_of(std::size_t item) const {
    return slice(item_nbr_, item_ptr_, item);
  }
  std::span<const double> ratings_of_item(std::size_t item) const {
    return slice(item_val_, item_ptr_, item);
  }

 private:
  template <typename T>
  static std::span<const T> slice(const std::vector<T>& v, const std::vector<std::size_t>& ptr,
                                  std::size_t row) {
    return std::span<const T>(v).subspan(ptr[row], ptr[row + 1] - ptr[row]);
  }

  void build_index(std::size_t rows, std::uint32_t Rating::*key, std::uint32_t Rating::*other,
                   std::vector<std::size_t>& ptr, std::vector<std::uint32_t>& nbr,
                   std::vector<double>& val) const {
    ptr.assign(rows + 1, 0);
    for (const auto& r : triplets_) ++ptr[r.*key + 1];
    for (std::size_t i = 0; i < rows; ++i) ptr[i + 1] += ptr[i];
    nbr.resize(triplets_.size());
    val.resize(triplets_.size());
    std::vector<std::size_t> cursor(ptr.begin(), ptr.end() - 1);
    for (const auto& r : triplets_) {
      const auto at = cursor[r.*key]++;
      nbr[at] = r.*other;
      val[at] = r.value;
    }
  }

  std::size_t n_users_ = 0;
  std::size_t n_items_ = 0;
  std::vector<Rating> triplets_;
  std::vector<std::size_t> user_ptr_{0}, item_ptr_{0};
  std::vector<std::uint32_t> user_nbr_, item_nbr_;
  std::vector<double> user_val_, item_val_;
};

}  // namespace biconvmf
