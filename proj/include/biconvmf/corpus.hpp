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

// Review ingestion: JSON-lines records, per-owner review sets, vocabulary,
// fixed-length token documents and embedding tables.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "biconvmf/errors.hpp"
#include "biconvmf/random.hpp"

namespace biconvmf {

struct ReviewRecord {
  std::string user_id;
  std::string item_id;
  double rating = 0.0;
  std::string review_text;

  friend bool operator==(const ReviewRecord&, const ReviewRecord&) = default;
};

enum class BadLinePolicy { kAbort, kSkip };

/// Parses one JSON object per line (reviewerID, asin, overall, reviewText).
/// Blank lines are ignored. Under kSkip, rejected lines are reported through
/// `warnings` instead of thrown.
inline std::vector<ReviewRecord> parse_reviews(std::istream& in,
                                               BadLinePolicy policy = BadLinePolicy::kAbort,
                                               std::vector<ParseError>* warnings = nullptr) {
  std::vector<ReviewRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      if (!obj.is_object()) throw ParseError(line_no, "not a JSON object");

      auto id_field = [&](const char* name) {
        const auto it = obj.find(name);
        if (it == obj.end() || !it->is_string() || it->get_ref<const std::string&>().empty()) {
          throw ParseError(line_no, std::string("missing or empty '") + name + "'");
        }
        return it->get<std::string>();
      };

      ReviewRecord rec;
      rec.user_id = id_field("reviewerID");
      rec.item_id = id_field("asin");
      const auto overall = obj.find("overall");
      if (overall == obj.end() || !overall->is_number()) throw ParseError(line_no, "missing 'overall'");
      rec.rating = overall->get<double>();
      if (!std::isfinite(rec.rating) || rec.rating < 1.0 || rec.rating > 5.0) {
        throw ParseError(line_no, "rating " + std::to_string(rec.rating) + " outside [1, 5]");
      }
      if (const auto text = obj.find("reviewText"); text != obj.end() && text->is_string()) {
        rec.review_text = text->get<std::string>();
      }
      out.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      ParseError err(line_no, std::string("malformed JSON: ") + e.what());
      if (policy == BadLinePolicy::kAbort) throw err;
      if (warnings) warnings->push_back(err);
    } catch (const ParseError& err) {
      if (policy == BadLinePolicy::kAbort) throw;
      if (warnings) warnings->push_back(err);
    }
  }
  return out;
}

inline std::vector<ReviewRecord> parse_reviews_file(const std::string& path,
                                                    BadLinePolicy policy = BadLinePolicy::kAbort,
                                                    std::vector<ParseError>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open review file '" + path + "'");
  return parse_reviews(in, policy, warnings);
}

struct DatasetStats {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t ratings = 0;
  double density = 0.0;  // ratings / (users * items)
};

inline DatasetStats dataset_stats(std::span<const ReviewRecord> records) {
  std::unordered_set<std::string_view> users, items;
  for (const auto& r : records) {
    users.insert(r.user_id);
    items.insert(r.item_id);
  }
  DatasetStats s{users.size(), items.size(), records.size(), 0.0};
  if (s.users > 0 && s.items > 0) {
    s.density = static_cast<double>(s.ratings) / (static_cast<double>(s.users) * static_cast<double>(s.items));
  }
  return s;
}

struct FirstN {
  std::vector<ReviewRecord> records;
  DatasetStats stats;
};

inline FirstN take_first_n(std::span<const ReviewRecord> records, std::size_t n) {
  FirstN out;
  const auto take = std::min(n, records.size());
  out.records.assign(records.begin(), records.begin() + static_cast<std::ptrdiff_t>(take));
  out.stats = dataset_stats(out.records);
  return out;
}

struct ReviewSet {
  std::string owner;
  std::string text;
};

/// Review sets in order of each owner's first appearance.
struct ReviewSets {
  std::vector<ReviewSet> users;
  std::vector<ReviewSet> items;
};

/// Callers must pass training-split records only.
inline ReviewSets build_review_sets(std::span<const ReviewRecord> training) {
  ReviewSets out;
  std::unordered_map<std::string, std::size_t> user_at, item_at;
  auto append = [](std::vector<ReviewSet>& sets, std::unordered_map<std::string, std::size_t>& at,
                   const std::string& key, const std::string& text) {
    auto [it, fresh] = at.try_emplace(key, sets.size());
    if (fresh) {
      sets.push_back({key, text});
    } else {
      auto& dst = sets[it->second].text;
      dst += ' ';
      dst += text;
    }
  };
  for (const auto& r : training) {
    append(out.users, user_at, r.user_id, r.review_text);
    append(out.items, item_at, r.item_id, r.review_text);
  }
  return out;
}

/// Lowercased ASCII alphanumeric runs; every other byte separates tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (c < 0x80 && std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// Token <-> index map. Index 0 is reserved for padding and unknown tokens;
/// real tokens occupy 1..size().
class Vocabulary {
 public:
  Vocabulary() = default;

  explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!index_.emplace(tokens_[i], static_cast<std::uint32_t>(i + 1)).second) {
        throw DataError("duplicate vocabulary token '" + tokens_[i] + "'");
      }
    }
  }

  std::size_t size() const { return tokens_.size(); }
  /// Embedding rows needed, including the padding row.
  std::size_t rows() const { return tokens_.size() + 1; }

  std::uint32_t index_of(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    return it == index_.end() ? 0 : it->second;
  }

  const std::string& token(std::uint32_t index) const { return tokens_.at(index - 1); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// Keeps tokens seen in at least `min_doc_freq` documents, ranks them by total
/// frequency (descending, ties lexicographic) and truncates to `max_vocab`.
inline Vocabulary build_vocabulary(std::span<const std::string> docs, std::size_t max_vocab,
                                   std::size_t min_doc_freq = 1) {
  if (max_vocab < 1) throw std::invalid_argument("max_vocab must be >= 1");

  struct Count {
    std::size_t total = 0;
    std::size_t docs = 0;
    std::size_t last_doc = static_cast<std::size_t>(-1);
  };
  std::unordered_map<std::string, Count> counts;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (auto& tok : tokenize(docs[d])) {
      auto& c = counts[std::move(tok)];
      ++c.total;
      if (c.last_doc != d) {
        ++c.docs;
        c.last_doc = d;
      }
    }
  }

  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, c] : counts) {
    if (c.docs >= min_doc_freq) ranked.emplace_back(tok, c.total);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (ranked.size() > max_vocab) ranked.resize(max_vocab);

  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [tok, _] : ranked) tokens.push_back(std::move(tok));
  return Vocabulary(std::move(tokens));
}

inline Vocabulary build_vocabulary(const ReviewSets& sets, std::size_t max_vocab, std::size_t min_doc_freq = 1) {
  std::vector<std::string> docs;
  docs.reserve(sets.users.size() + sets.items.size());
  for (const auto& s : sets.users) docs.push_back(s.text);
  for (const auto& s : sets.items) docs.push_back(s.text);
  return build_vocabulary(docs, max_vocab, min_doc_freq);
}

/// Fixed-length token sequence, right-padded with index 0.
struct TokenDocument {
  std::vector<std::uint32_t> indices;
  std::size_t true_len = 0;

  std::size_t max_len() const { return indices.size(); }
  friend bool operator==(const TokenDocument&, const TokenDocument&) = default;
};

/// Out-of-vocabulary tokens are dropped (they neither occupy a slot nor count
/// toward true_len); text beyond max_len known tokens is truncated.
inline TokenDocument tensorize(std::string_view text, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  TokenDocument doc;
  doc.indices.assign(max_len, 0);
  for (const auto& tok : tokenize(text)) {
    if (doc.true_len == max_len) break;
    if (const auto idx = vocab.index_of(tok); idx != 0) doc.indices[doc.true_len++] = idx;
  }
  return doc;
}

/// (vocab size + 1) x dim row-major table; row 0 is the zero padding vector.
struct EmbeddingTable {
  std::size_t dim = 0;
  std::vector<double> values;

  std::size_t rows() const { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const double> row(std::size_t r) const { return std::span<const double>(values).subspan(r * dim, dim); }
  std::span<double> row(std::size_t r) { return std::span<double>(values).subspan(r * dim, dim); }
};

inline EmbeddingTable random_embeddings(std::size_t rows, std::size_t dim, double scale, std::uint64_t seed) {
  EmbeddingTable t{dim, std::vector<double>(rows * dim, 0.0)};
  Rng rng(seed);
  for (std::size_t i = dim; i < t.values.size(); ++i) t.values[i] = rng.uniform(-scale, scale);
  return t;
}

/// Reads the plain-text word-vector format ("count dim" header optional, then
/// "token v1 .. vp" per line). Vocabulary tokens absent from the file get a
/// seeded Uniform(-0.25, 0.25) vector.
inline EmbeddingTable load_pretrained_embeddings(const std::string& path, const Vocabulary& vocab, std::size_t dim,
                                                 std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open pretrained embeddings '" + path + "'");

  auto mismatch = [&](std::size_t found, std::size_t line_no) {
    return DataError("pretrained embeddings '" + path + "' line " + std::to_string(line_no) +
                     ": dimension mismatch, expected " + std::to_string(dim) + " found " + std::to_string(found));
  };

  std::vector<double> values(vocab.rows() * dim, 0.0);
  std::vector<bool> found(vocab.rows(), false);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> vec;
    std::string field;
    while (fields >> field) {
      try {
        std::size_t used = 0;
        vec.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw DataError("pretrained embeddings '" + path + "' line " + std::to_string(line_no) +
                        ": non-numeric value '" + field + "'");
      }
    }
    if (line_no == 1 && vec.size() == 1 && token.find_first_not_of("0123456789") == std::string::npos) {
      if (static_cast<std::size_t>(vec[0]) != dim) throw mismatch(static_cast<std::size_t>(vec[0]), line_no);
      continue;
    }
    if (vec.size() != dim) throw mismatch(vec.size(), line_no);
    if (const auto idx = vocab.index_of(token); idx != 0 && !found[idx]) {
      for (double v : vec) {
        if (!std::isfinite(v)) throw DataError("pretrained embeddings '" + path + "': non-finite value");
      }
      std::copy(vec.begin(), vec.end(), values.begin() + static_cast<std::ptrdiff_t>(idx * dim));
      found[idx] = true;
    }
  }

  Rng rng(seed);
  for (std::size_t r = 1; r < vocab.rows(); ++r) {
    if (found[r]) continue;
    for (std::size_t d = 0; d < dim; ++d) values[r * dim + d] = rng.uniform(-0.25, 0.25);
  }
  return EmbeddingTable{dim, std::move(values)};
}

}  // namespace biconvmf
