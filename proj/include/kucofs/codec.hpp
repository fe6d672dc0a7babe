// Copyright 2026 The kucofs Authors
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

// Little-endian cursor helpers shared by every on-region and on-wire format.

#include <boost/endian/conversion.hpp>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kucofs {

inline unsigned char* uc(std::byte* p) { return reinterpret_cast<unsigned char*>(p); }
inline const unsigned char* uc(const std::byte* p) { return reinterpret_cast<const unsigned char*>(p); }

inline void put_u16(std::byte* p, std::uint16_t v) { boost::endian::store_little_u16(uc(p), v); }
inline void put_u32(std::byte* p, std::uint32_t v) { boost::endian::store_little_u32(uc(p), v); }
inline void put_u64(std::byte* p, std::uint64_t v) { boost::endian::store_little_u64(uc(p), v); }
inline std::uint16_t get_u16(const std::byte* p) { return boost::endian::load_little_u16(uc(p)); }
inline std::uint32_t get_u32(const std::byte* p) { return boost::endian::load_little_u32(uc(p)); }
inline std::uint64_t get_u64(const std::byte* p) { return boost::endian::load_little_u64(uc(p)); }

/// Appends little-endian fields to a growable buffer.
class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::byte>& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.push_back(std::byte{v}); }
  void u16(std::uint16_t v) { put_u16(grow(2), v); }
  void u32(std::uint32_t v) { put_u32(grow(4), v); }
  void u64(std::uint64_t v) { put_u64(grow(8), v); }
  void bytes(std::span<const std::byte> b) {
    if (!b.empty()) std::memcpy(grow(b.size()), b.data(), b.size());
  }
  /// u8 length prefix followed by the bytes; callers enforce the 255 limit.
  void short_string(std::string_view s) {
    u8(static_cast<std::uint8_t>(s.size()));
    bytes(std::as_bytes(std::span(s.data(), s.size())));
  }
  std::size_t size() const { return out_.size(); }

 private:
  std::byte* grow(std::size_t n) {
    out_.resize(out_.size() + n);
    return out_.data() + out_.size() - n;
  }
  std::vector<std::byte>& out_;
};

/// Bounds-checked reader; any overrun latches `failed()`.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::byte> in) : in_(in) {}

  std::uint8_t u8() { return take(1) ? static_cast<std::uint8_t>(in_[pos_ - 1]) : 0; }
  std::uint16_t u16() { return take(2) ? get_u16(in_.data() + pos_ - 2) : 0; }
  std::uint32_t u32() { return take(4) ? get_u32(in_.data() + pos_ - 4) : 0; }
  std::uint64_t u64() { return take(8) ? get_u64(in_.data() + pos_ - 8) : 0; }
  std::string short_string() {
    std::size_t n = u8();
    if (!take(n)) return {};
    return std::string(reinterpret_cast<const char*>(in_.data() + pos_ - n), n);
  }
  std::span<const std::byte> bytes(std::size_t n) {
    if (!take(n)) return {};
    return in_.subspan(pos_ - n, n);
  }

  bool failed() const { return failed_; }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  bool take(std::size_t n) {
    if (failed_ || in_.size() - pos_ < n) {
      failed_ = true;
      return false;
    }
    pos_ += n;
    return true;
  }
  std::span<const std::byte> in_;
  std::size_t pos_ = 0;
  bool failed_ = false;
};

}  // namespace kucofs
