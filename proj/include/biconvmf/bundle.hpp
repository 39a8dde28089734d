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

// The corpus bundle: everything training needs from the raw reviews, so the
// text is tokenized exactly once.
//
// File layout (see binary_io.hpp for the container):
//   magic "BCMC", version 1
//   META  first_n:u64 test_fraction:f64 split_seed:u64 max_vocab:u64
//         min_doc_freq:u64 max_len:u64
//   STAT  users:u64 items:u64 ratings:u64 density:f64
//   IDSU  count:u64 then count strings      (user keys, index order)
//   IDSI  count:u64 then count strings      (item keys, index order)
//   RATE  users:u32[] items:u32[] values:f64[] is_test:u8[]
//   VOCB  count:u64 then count strings      (token of index 1..count)
//   UDOC  count:u64 then per doc: true_len:u64 indices:u32[]
//   IDOC  same as UDOC, for items

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "biconvmf/binary_io.hpp"
#include "biconvmf/corpus.hpp"
#include "biconvmf/ratings.hpp"
#include "biconvmf/split.hpp"

namespace biconvmf {

struct CorpusConfig {
  std::size_t first_n = 20000;
  std::size_t max_vocab = 8000;
  std::size_t min_doc_freq = 1;
  std::size_t max_len = 300;
};

struct CorpusBundle {
  CorpusConfig config;
  SplitSpec split;
  DatasetStats stats;
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
  std::vector<Rating> ratings;
  std::vector<std::uint8_t> is_test;
  Vocabulary vocab;
  std::vector<TokenDocument> user_docs;
  std::vector<TokenDocument> item_docs;

  std::size_t n_users() const { return user_ids.size(); }
  std::size_t n_items() const { return item_ids.size(); }

  SparseRatings train_ratings() const { return select(false); }
  SparseRatings test_ratings() const { return select(true); }

 private:
  SparseRatings select(bool test) const {
    std::vector<Rating> out;
    for (std::size_t i = 0; i < ratings.size(); ++i) {
      if (static_cast<bool>(is_test[i]) == test) out.push_back(ratings[i]);
    }
    return SparseRatings(n_users(), n_items(), std::move(out));
  }
};

/// Truncates to the first `config.first_n` records, assigns ids by first
/// appearance, splits, and builds vocabulary and documents from the training
/// split only.
inline CorpusBundle build_corpus(std::span<const ReviewRecord> all_records, const CorpusConfig& config,
                                 const SplitSpec& split_spec) {
  CorpusBundle b;
  b.config = config;
  b.split = split_spec;

  auto first = take_first_n(all_records, config.first_n);
  b.stats = first.stats;
  const auto& records = first.records;

  std::unordered_map<std::string, std::uint32_t> user_at, item_at;
  auto intern = [](std::unordered_map<std::string, std::uint32_t>& at, std::vector<std::string>& ids,
                   const std::string& key) {
    auto [it, fresh] = at.try_emplace(key, static_cast<std::uint32_t>(ids.size()));
    if (fresh) ids.push_back(key);
    return it->second;
  };
  for (const auto& r : records) {
    b.ratings.push_back({intern(user_at, b.user_ids, r.user_id), intern(item_at, b.item_ids, r.item_id), r.rating});
  }

  b.is_test = assign_split(records.size(), split_spec);

  std::vector<ReviewRecord> training;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!b.is_test[i]) training.push_back(records[i]);
  }
  const auto sets = build_review_sets(training);
  b.vocab = build_vocabulary(sets, config.max_vocab, config.min_doc_freq);

  const TokenDocument empty = tensorize("", b.vocab, config.max_len);
  b.user_docs.assign(b.n_users(), empty);
  b.item_docs.assign(b.n_items(), empty);
  for (const auto& s : sets.users) b.user_docs[user_at.at(s.owner)] = tensorize(s.text, b.vocab, config.max_len);
  for (const auto& s : sets.items) b.item_docs[item_at.at(s.owner)] = tensorize(s.text, b.vocab, config.max_len);
  return b;
}

namespace detail {

inline void put_strings(io::Writer& w, const std::vector<std::string>& v) {
  w.put<std::uint64_t>(v.size());
  for (const auto& s : v) w.put_string(s);
}

inline std::vector<std::string> get_strings(io::Reader& r) {
  const auto n = r.get<std::uint64_t>();
  if (n > r.remaining() / sizeof(std::uint64_t)) r.fail("string count exceeds section");
  std::vector<std::string> out;
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) out.push_back(r.get_string());
  return out;
}

inline void put_docs(io::Writer& w, const std::vector<TokenDocument>& docs) {
  w.put<std::uint64_t>(docs.size());
  for (const auto& d : docs) {
    w.put<std::uint64_t>(d.true_len);
    w.put_array<std::uint32_t>(d.indices);
  }
}

inline std::vector<TokenDocument> get_docs(io::Reader& r, std::size_t vocab_rows) {
  const auto n = r.get<std::uint64_t>();
  if (n > r.remaining() / (2 * sizeof(std::uint64_t))) r.fail("document count exceeds section");
  std::vector<TokenDocument> out(n);
  for (auto& d : out) {
    d.true_len = r.get<std::uint64_t>();
    d.indices = r.get_array<std::uint32_t>();
    if (d.true_len > d.indices.size()) r.fail("true_len exceeds document length");
    for (std::size_t t = 0; t < d.indices.size(); ++t) {
      if (d.indices[t] >= vocab_rows || (t >= d.true_len) != (d.indices[t] == 0)) r.fail("invalid token index");
    }
  }
  return out;
}

}  // namespace detail

inline constexpr io::Tag kBundleMagic = io::make_tag("BCMC");
inline constexpr std::uint32_t kBundleVersion = 1;

inline void save_bundle(const CorpusBundle& b, const std::string& path) {
  io::ContainerWriter out(kBundleMagic, kBundleVersion);
  {
    io::Writer w;
    w.put<std::uint64_t>(b.config.first_n);
    w.put(b.split.test_fraction);
    w.put<std::uint64_t>(b.split.seed);
    w.put<std::uint64_t>(b.config.max_vocab);
    w.put<std::uint64_t>(b.config.min_doc_freq);
    w.put<std::uint64_t>(b.config.max_len);
    out.add(io::make_tag("META"), w);
  }
  {
    io::Writer w;
    w.put<std::uint64_t>(b.stats.users);
    w.put<std::uint64_t>(b.stats.items);
    w.put<std::uint64_t>(b.stats.ratings);
    w.put(b.stats.density);
    out.add(io::make_tag("STAT"), w);
  }
  {
    io::Writer w;
    detail::put_strings(w, b.user_ids);
    out.add(io::make_tag("IDSU"), w);
  }
  {
    io::Writer w;
    detail::put_strings(w, b.item_ids);
    out.add(io::make_tag("IDSI"), w);
  }
  {
    io::Writer w;
    std::vector<std::uint32_t> users, items;
    std::vector<double> values;
    for (const auto& r : b.ratings) {
      users.push_back(r.user);
      items.push_back(r.item);
      values.push_back(r.value);
    }
    w.put_array<std::uint32_t>(users);
    w.put_array<std::uint32_t>(items);
    w.put_array<double>(values);
    w.put_array<std::uint8_t>(b.is_test);
    out.add(io::make_tag("RATE"), w);
  }
  {
    io::Writer w;
    detail::put_strings(w, b.vocab.tokens());
    out.add(io::make_tag("VOCB"), w);
  }
  {
    io::Writer w;
    detail::put_docs(w, b.user_docs);
    out.add(io::make_tag("UDOC"), w);
  }
  {
    io::Writer w;
    detail::put_docs(w, b.item_docs);
    out.add(io::make_tag("IDOC"), w);
  }
  out.save(path);
}

inline CorpusBundle load_bundle(const std::string& path) {
  io::ContainerReader in(path, kBundleMagic, kBundleVersion);
  CorpusBundle b;
  {
    auto r = in.section(io::make_tag("META"));
    b.config.first_n = r.get<std::uint64_t>();
    b.split.test_fraction = r.get<double>();
    b.split.seed = r.get<std::uint64_t>();
    b.config.max_vocab = r.get<std::uint64_t>();
    b.config.min_doc_freq = r.get<std::uint64_t>();
    b.config.max_len = r.get<std::uint64_t>();
    r.expect_end();
  }
  {
    auto r = in.section(io::make_tag("STAT"));
    b.stats.users = r.get<std::uint64_t>();
    b.stats.items = r.get<std::uint64_t>();
    b.stats.ratings = r.get<std::uint64_t>();
    b.stats.density = r.get<double>();
    r.expect_end();
  }
  {
    auto r = in.section(io::make_tag("IDSU"));
    b.user_ids = detail::get_strings(r);
    r.expect_end();
  }
  {
    auto r = in.section(io::make_tag("IDSI"));
    b.item_ids = detail::get_strings(r);
    r.expect_end();
  }
  {
    auto r = in.section(io::make_tag("RATE"));
    const auto users = r.get_array<std::uint32_t>();
    const auto items = r.get_array<std::uint32_t>();
    const auto values = r.get_array<double>();
    b.is_test = r.get_array<std::uint8_t>();
    r.expect_end();
    if (items.size() != users.size() || values.size() != users.size() || b.is_test.size() != users.size()) {
      r.fail("column lengths differ");
    }
    for (std::size_t i = 0; i < users.size(); ++i) {
      if (users[i] >= b.user_ids.size() || items[i] >= b.item_ids.size()) r.fail("index out of range");
      b.ratings.push_back({users[i], items[i], values[i]});
    }
  }
  {
    auto r = in.section(io::make_tag("VOCB"));
    b.vocab = Vocabulary(detail::get_strings(r));
    r.expect_end();
  }
  {
    auto r = in.section(io::make_tag("UDOC"));
    b.user_docs = detail::get_docs(r, b.vocab.rows());
    r.expect_end();
    if (b.user_docs.size() != b.user_ids.size()) r.fail("document count differs from user count");
  }
  {
    auto r = in.section(io::make_tag("IDOC"));
    b.item_docs = detail::get_docs(r, b.vocab.rows());
    r.expect_end();
    if (b.item_docs.size() != b.item_ids.size()) r.fail("document count differs from item count");
  }
  return b;
}

}  // namespace biconvmf
