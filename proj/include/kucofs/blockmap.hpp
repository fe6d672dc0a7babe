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
#include <atomic>
#include <cstdint>
#include <span>
#include <vector>

#include "kucofs/status.hpp"

namespace kucofs {

inline constexpr unsigned kVersionBits = 54;
inline constexpr unsigned kPageNoBits = 40;
inline constexpr std::uint64_t kVersionMask = (1ULL << kVersionBits) - 1;
inline constexpr std::uint64_t kPageNoMask = (1ULL << kPageNoBits) - 1;
inline constexpr std::uint64_t kItemsPerChunk = 1024;
inline constexpr std::uint64_t kChunksPerMap = 1024;
inline constexpr std::uint64_t kMaxFilePages = kItemsPerChunk * kChunksPerMap;

/// Decoded block mapping item. Bit layout of the packed form, MSB first:
///   95: start | 94..41: version | 40: end | 39..0: page number
struct MappingItem {
  bool start = false;
  std::uint64_t version = 0;
  bool end = false;
  std::uint64_t page_no = 0;

  bool operator==(const MappingItem&) const = default;
};

/// 96-bit packed item as three little-endian 32-bit words; words[0] holds
/// bits 31..0.
struct PackedItem {
  std::array<std::uint32_t, 3> words{};

  bool is_hole() const { return words[0] == 0 && words[1] == 0 && words[2] == 0; }
  bool operator==(const PackedItem&) const = default;
};

/// Versions are truncated to 54 bits; page numbers must fit 40 bits.
PackedItem encode_item(const MappingItem& item);
MappingItem decode_item(const PackedItem& packed);

/// The pairwise read-validity rule over items read in ascending index
/// order. Every adjacent pair (A, B) must satisfy one of
///   A.version == B.version,
///   B.version >  A.version and B.start,
///   B.version <  A.version and A.end.
bool validate_items(std::span<const MappingItem> items);

/// One page's worth of a read. `page_no == 0` is a hole (reads as zeros).
struct PageSlice {
  std::uint64_t page_no = 0;
  std::uint32_t offset = 0;
  std::uint32_t length = 0;
};

struct SnapshotRead {
  std::vector<PageSlice> slices;
  std::uint64_t retries = 0;
};

inline constexpr std::uint64_t kDefaultReadRetryCap = 1ULL << 20;

/// Two-level file block map: a lazily allocated root of up to 1024 chunk
/// pointers, each chunk holding 1024 items (4 MiB of file). Chunks never
/// move once published. One mutator (the master), any number of lock-free
/// readers.
class BlockMap {
 public:
  BlockMap() = default;
  ~BlockMap();
  BlockMap(const BlockMap&) = delete;
  BlockMap& operator=(const BlockMap&) = delete;

  PackedItem load(std::uint64_t index) const;

  /// Master commit of a CoW write covering items [first_index, first_index +
  /// pages.size()). The first item carries start, the last carries end.
  /// Returns the page numbers displaced by this commit, for deferred
  /// reclamation.
  Result<std::vector<std::uint64_t>> commit(std::uint64_t first_index, std::span<const std::uint64_t> pages,
                                            std::uint64_t version);

  /// Raw store used while loading a checkpoint.
  Status store_raw(std::uint64_t index, const PackedItem& item);

  /// Lock-free consistent read of [offset, offset + size) clipped to
  /// `file_size`. Retries until the item sequence validates and a second
  /// read returns identical bits.
  Result<SnapshotRead> snapshot_read(std::uint64_t offset, std::uint64_t size, std::uint64_t file_size,
                                     std::uint64_t max_retries = kDefaultReadRetryCap) const;

  /// Visits every non-hole item in index order.
  template <typename F>
  void for_each_item(F&& fn) const {
    Root* root = root_.load(std::memory_order_acquire);
    if (!root) return;
    for (std::uint64_t c = 0; c < kChunksPerMap; ++c) {
      Chunk* chunk = root->chunks[c].load(std::memory_order_acquire);
      if (!chunk) continue;
      for (std::uint64_t i = 0; i < kItemsPerChunk; ++i) {
        PackedItem p = read_item(chunk->items[i]);
        if (!p.is_hole()) fn(c * kItemsPerChunk + i, p);
      }
    }
  }

  std::vector<std::uint64_t> referenced_pages() const;
  std::uint64_t chunk_count() const;

 private:
  struct AtomicItem {
    std::atomic<std::uint32_t> w[3];
  };
  struct Chunk {
    AtomicItem items[kItemsPerChunk];
  };
  struct Root {
    std::atomic<Chunk*> chunks[kChunksPerMap];
  };

  static PackedItem read_item(const AtomicItem& item);
  static void write_item(AtomicItem& item, const PackedItem& value);
  AtomicItem* slot_for_write(std::uint64_t index);

  std::atomic<Root*> root_{nullptr};
};

}  // namespace kucofs
