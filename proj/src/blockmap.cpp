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

#include "kucofs/blockmap.hpp"

#include <algorithm>
#include <thread>

#include "kucofs/pmem.hpp"

namespace kucofs {

PackedItem encode_item(const MappingItem& item) {
  const std::uint64_t low = (item.page_no & kPageNoMask) | (static_cast<std::uint64_t>(item.end) << 40) |
                            ((item.version & kVersionMask) << 41);
  // version bits 23..53 spill into the upper word (bits 64..94)
  const std::uint32_t high =
      static_cast<std::uint32_t>((item.version & kVersionMask) >> 23) | (static_cast<std::uint32_t>(item.start) << 31);
  return PackedItem{{static_cast<std::uint32_t>(low), static_cast<std::uint32_t>(low >> 32), high}};
}

MappingItem decode_item(const PackedItem& packed) {
  const std::uint64_t low = static_cast<std::uint64_t>(packed.words[0]) | (static_cast<std::uint64_t>(packed.words[1]) << 32);
  const std::uint32_t high = packed.words[2];
  MappingItem item;
  item.page_no = low & kPageNoMask;
  item.end = (low >> 40) & 1;
  item.version = (low >> 41) | (static_cast<std::uint64_t>(high & 0x7fffffff) << 23);
  item.start = (high >> 31) & 1;
  return item;
}

bool validate_items(std::span<const MappingItem> items) {
  for (std::size_t i = 1; i < items.size(); ++i) {
    const MappingItem& a = items[i - 1];
    const MappingItem& b = items[i];
    if (a.version == b.version) continue;
    if (b.version > a.version && b.start) continue;
    if (b.version < a.version && a.end) continue;
    return false;
  }
  return true;
}

BlockMap::~BlockMap() {
  Root* root = root_.load(std::memory_order_relaxed);
  if (!root) return;
  for (auto& c : root->chunks) delete c.load(std::memory_order_relaxed);
  delete root;
}

PackedItem BlockMap::read_item(const AtomicItem& item) {
  return PackedItem{{item.w[0].load(std::memory_order_acquire), item.w[1].load(std::memory_order_acquire),
                     item.w[2].load(std::memory_order_acquire)}};
}

void BlockMap::write_item(AtomicItem& item, const PackedItem& value) {
  item.w[0].store(value.words[0], std::memory_order_release);
  item.w[1].store(value.words[1], std::memory_order_release);
  item.w[2].store(value.words[2], std::memory_order_release);
}

PackedItem BlockMap::load(std::uint64_t index) const {
  if (index >= kMaxFilePages) return {};
  Root* root = root_.load(std::memory_order_acquire);
  if (!root) return {};
  Chunk* chunk = root->chunks[index / kItemsPerChunk].load(std::memory_order_acquire);
  if (!chunk) return {};
  return read_item(chunk->items[index % kItemsPerChunk]);
}

BlockMap::AtomicItem* BlockMap::slot_for_write(std::uint64_t index) {
  Root* root = root_.load(std::memory_order_relaxed);
  if (!root) {
    root = new Root();
    for (auto& c : root->chunks) c.store(nullptr, std::memory_order_relaxed);
    root_.store(root, std::memory_order_release);
  }
  auto& cref = root->chunks[index / kItemsPerChunk];
  Chunk* chunk = cref.load(std::memory_order_relaxed);
  if (!chunk) {
    chunk = new Chunk();
    for (auto& it : chunk->items) {
      for (auto& w : it.w) w.store(0, std::memory_order_relaxed);
    }
    cref.store(chunk, std::memory_order_release);
  }
  return &chunk->items[index % kItemsPerChunk];
}

Result<std::vector<std::uint64_t>> BlockMap::commit(std::uint64_t first_index, std::span<const std::uint64_t> pages,
                                                    std::uint64_t version) {
  if (pages.empty()) return std::vector<std::uint64_t>{};
  if (first_index >= kMaxFilePages || pages.size() > kMaxFilePages - first_index) return Errc::kFileTooLarge;
  std::vector<std::uint64_t> displaced;
  std::uintptr_t last_line = ~std::uintptr_t{0};
  for (std::size_t i = 0; i < pages.size(); ++i) {
    AtomicItem* slot = slot_for_write(first_index + i);
    const std::uintptr_t line = reinterpret_cast<std::uintptr_t>(slot) / kCacheLine;
    if (last_line != ~std::uintptr_t{0} && line != last_line) {
      // Readers must observe items in index order across cachelines.
      std::atomic_thread_fence(std::memory_order_seq_cst);
    }
    last_line = line;
    const PackedItem old = read_item(*slot);
    if (!old.is_hole()) {
      const std::uint64_t old_page = decode_item(old).page_no;
      if (old_page != 0) displaced.push_back(old_page);
    }
    write_item(*slot, encode_item({i == 0, version, i + 1 == pages.size(), pages[i]}));
  }
  return displaced;
}

Status BlockMap::store_raw(std::uint64_t index, const PackedItem& item) {
  if (index >= kMaxFilePages) return Errc::kFileTooLarge;
  write_item(*slot_for_write(index), item);
  return {};
}

Result<SnapshotRead> BlockMap::snapshot_read(std::uint64_t offset, std::uint64_t size, std::uint64_t file_size,
                                             std::uint64_t max_retries) const {
  SnapshotRead out;
  if (offset >= file_size || size == 0) return out;
  const std::uint64_t end = std::min(file_size, offset + size);
  const std::uint64_t first = offset / kPageSize;
  const std::uint64_t last = (end - 1) / kPageSize;
  const std::size_t n = last - first + 1;

  std::vector<PackedItem> raw(n);
  std::vector<MappingItem> items(n);
  for (std::uint64_t attempt = 0; attempt <= max_retries; ++attempt) {
    if (attempt > 0) {
      ++out.retries;
      if (attempt % 64 == 0) std::this_thread::yield();
    }
    for (std::size_t i = 0; i < n; ++i) {
      raw[i] = load(first + i);
      items[i] = decode_item(raw[i]);
    }
    if (!validate_items(items)) continue;
    bool stable = true;
    for (std::size_t i = 0; i < n && stable; ++i) stable = load(first + i) == raw[i];
    if (!stable) continue;

    out.slices.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t page_start = (first + i) * kPageSize;
      const std::uint64_t lo = std::max(offset, page_start);
      const std::uint64_t hi = std::min(end, page_start + kPageSize);
      out.slices.push_back({items[i].page_no, static_cast<std::uint32_t>(lo - page_start),
                            static_cast<std::uint32_t>(hi - lo)});
    }
    return out;
  }
  return Errc::kInconsistent;
}

std::vector<std::uint64_t> BlockMap::referenced_pages() const {
  std::vector<std::uint64_t> pages;
  for_each_item([&](std::uint64_t, const PackedItem& p) {
    const std::uint64_t page = decode_item(p).page_no;
    if (page != 0) pages.push_back(page);
  });
  return pages;
}

std::uint64_t BlockMap::chunk_count() const {
  Root* root = root_.load(std::memory_order_acquire);
  if (!root) return 0;
  std::uint64_t n = 0;
  for (const auto& c : root->chunks) n += c.load(std::memory_order_acquire) != nullptr;
  return n;
}

}  // namespace kucofs
