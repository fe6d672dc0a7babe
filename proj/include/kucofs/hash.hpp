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

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace kucofs {

/// 64-bit FNV-1a. Used as the dentry key; collisions are resolved by
/// comparing full names.
constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// CRC-32C (Castagnoli), as used for log entries and checkpoint blocks.
std::uint32_t crc32c(std::span<const std::byte> data);

using ChecksumKey = std::array<std::uint8_t, 16>;

/// Fresh random key from the OS entropy source.
ChecksumKey generate_checksum_key();

/// SipHash-2-4 keyed 64-bit hash.
std::uint64_t keyed_hash(const ChecksumKey& key, std::span<const std::byte> data);

}  // namespace kucofs
