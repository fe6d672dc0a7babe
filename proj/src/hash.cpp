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

#include "kucofs/hash.hpp"

#include <sodium.h>

#include <boost/crc.hpp>
#include <cstring>
#include <stdexcept>

namespace kucofs {
namespace {

using Crc32c = boost::crc_optimal<32, 0x1EDC6F41, 0xFFFFFFFF, 0xFFFFFFFF, true, true>;

void ensure_sodium() {
  static const bool ready = [] { return sodium_init() >= 0; }();
  if (!ready) throw std::runtime_error("libsodium initialization failed");
}

static_assert(crypto_shorthash_siphash24_BYTES == 8);
static_assert(crypto_shorthash_siphash24_KEYBYTES == 16);

}  // namespace

std::uint32_t crc32c(std::span<const std::byte> data) {
  Crc32c crc;
  crc.process_bytes(data.data(), data.size());
  return crc.checksum();
}

ChecksumKey generate_checksum_key() {
  ensure_sodium();
  ChecksumKey key;
  randombytes_buf(key.data(), key.size());
  return key;
}

std::uint64_t keyed_hash(const ChecksumKey& key, std::span<const std::byte> data) {
  unsigned char out[8];
  crypto_shorthash_siphash24(out, reinterpret_cast<const unsigned char*>(data.data()), data.size(), key.data());
  std::uint64_t v;
  std::memcpy(&v, out, sizeof(v));
  return v;
}

}  // namespace kucofs
