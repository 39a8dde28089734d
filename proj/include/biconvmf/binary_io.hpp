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

// Sectioned little-endian binary container shared by corpus bundles and
// model checkpoints.
//
//   file    := magic[4] version:u32 section*
//   section := tag[4] length:u64 payload[length]
//
// Readers look sections up by tag and report the tag on any failure.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "biconvmf/errors.hpp"

namespace biconvmf::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class Writer {
 public:
  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void put_array(std::span<const T> values) {
    put<std::uint64_t>(values.size());
    const auto* p = reinterpret_cast<const char*>(values.data());
    buf_.insert(buf_.end(), p, p + values.size_bytes());
  }

  void put_string(std::string_view s) {
    put<std::uint64_t>(s.size());
    buf_.insert(buf_.end(), s.begin(), s.end());
  }

  const std::vector<char>& bytes() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(std::string_view section, std::span<const char> data)
      : section_(section), data_(data) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)).data(), sizeof(T));
    return v;
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  std::vector<T> get_array() {
    const auto n = get<std::uint64_t>();
    if (n > remaining() / sizeof(T)) fail("array length exceeds section");
    std::vector<T> out(n);
    if (n > 0) std::memcpy(out.data(), take(n * sizeof(T)).data(), n * sizeof(T));
    return out;
  }

  std::string get_string() {
    const auto n = get<std::uint64_t>();
    auto bytes = take(n);
    return std::string(bytes.begin(), bytes.end());
  }

  std::size_t remaining() const { return data_.size() - pos_; }

  void expect_end() const {
    if (pos_ != data_.size()) fail("trailing bytes");
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw DataError("section '" + std::string(section_) + "': " + why);
  }

 private:
  std::span<const char> take(std::size_t n) {
    if (n > remaining()) fail("truncated");
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::string_view section_;
  std::span<const char> data_;
  std::size_t pos_ = 0;
};

using Tag = std::array<char, 4>;

constexpr Tag make_tag(const char (&s)[5]) { return {s[0], s[1], s[2], s[3]}; }

class ContainerWriter {
 public:
  ContainerWriter(Tag magic, std::uint32_t version) {
    header_.insert(header_.end(), magic.begin(), magic.end());
    Writer w;
    w.put(version);
    header_.insert(header_.end(), w.bytes().begin(), w.bytes().end());
  }

  void add(Tag tag, const Writer& payload) {
    body_.insert(body_.end(), tag.begin(), tag.end());
    Writer len;
    len.put<std::uint64_t>(payload.bytes().size());
    body_.insert(body_.end(), len.bytes().begin(), len.bytes().end());
    body_.insert(body_.end(), payload.bytes().begin(), payload.bytes().end());
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out.write(header_.data(), static_cast<std::streamsize>(header_.size()));
    out.write(body_.data(), static_cast<std::streamsize>(body_.size()));
    if (!out) throw DataError("write failed for '" + path + "'");
  }

 private:
  std::vector<char> header_;
  std::vector<char> body_;
};

class ContainerReader {
 public:
  ContainerReader(const std::string& path, Tag magic, std::uint32_t supported_version) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    data_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());

    Reader header("header", std::span<const char>(data_).first(std::min<std::size_t>(8, data_.size())));
    if (data_.size() < 8) header.fail("truncated");
    Tag found{};
    for (auto& c : found) c = header.get<char>();
    if (found != magic) header.fail("bad magic");
    version_ = header.get<std::uint32_t>();
    if (version_ != supported_version) {
      throw DataError("unsupported format version " + std::to_string(version_) +
                      " (this build reads version " + std::to_string(supported_version) + ")");
    }

    std::size_t pos = 8;
    while (pos < data_.size()) {
      if (data_.size() - pos < 12) throw DataError("section table: truncated section header");
      Section s;
      std::memcpy(s.tag.data(), data_.data() + pos, 4);
      std::uint64_t len;
      std::memcpy(&len, data_.data() + pos + 4, 8);
      pos += 12;
      if (len > data_.size() - pos) {
        throw DataError("section '" + std::string(s.tag.begin(), s.tag.end()) + "': truncated");
      }
      s.offset = pos;
      s.length = len;
      sections_.push_back(s);
      pos += len;
    }
  }

  std::uint32_t version() const { return version_; }

  bool has(Tag tag) const {
    for (const auto& s : sections_)
      if (s.tag == tag) return true;
    return false;
  }

  Reader section(Tag tag) const {
    for (const auto& s : sections_) {
      if (s.tag == tag) {
        return Reader(name_of(tag), std::span<const char>(data_).subspan(s.offset, s.length));
      }
    }
    throw DataError("section '" + std::string(tag.begin(), tag.end()) + "': missing");
  }

 private:
  struct Section {
    Tag tag{};
    std::size_t offset = 0;
    std::size_t length = 0;
  };

  std::string_view name_of(Tag tag) const {
    for (const auto& s : sections_)
      if (s.tag == tag) return std::string_view(data_.data() + s.offset - 12, 4);
    return "?";
  }

  std::vector<char> data_;
  std::vector<Section> sections_;
  std::uint32_t version_ = 0;
};

}  // namespace biconvmf::io
