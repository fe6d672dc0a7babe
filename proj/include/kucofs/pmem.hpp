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

// Emulated persistent-memory region.
//
// Two byte images back every region: the volatile image that all loads and
// stores go to, and the persistent image that survives a crash. A store only
// reaches the persistent image once its cacheline has been flushed and a
// fence has executed afterwards. Data-page write permission is enforced in
// software through `checked_store`.

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "kucofs/status.hpp"

namespace kucofs {

inline constexpr std::uint64_t kPageSize = 4096;
inline constexpr std::uint64_t kCacheLine = 64;
inline constexpr std::uint64_t kMinRegionSize = 16ULL << 20;
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr char kRegionMagic[4] = {'K', 'U', 'C', 'O'};

using ClientId = std::uint32_t;

enum class SegmentId : std::uint8_t { kSuperblock = 0, kMetadata, kOplog, kBitmap, kData };
inline constexpr std::size_t kSegmentCount = 5;

struct Segment {
  std::uint64_t offset = 0;
  std::uint64_t length = 0;

  std::uint64_t end() const { return offset + length; }
  bool contains(std::uint64_t addr) const { return addr >= offset && addr < end(); }
  bool operator==(const Segment&) const = default;
};

struct RegionConfig {
  double metadata_fraction = 0.125;
  double oplog_fraction = 0.125;
  /// Empty selects an anonymous mapping; otherwise the persistent image is
  /// a shared mapping of this file.
  std::string backing_path;
};

struct Layout {
  std::uint64_t total_size = 0;
  std::array<Segment, kSegmentCount> segments{};

  const Segment& segment(SegmentId id) const { return segments[static_cast<std::size_t>(id)]; }
  std::uint64_t data_pages() const { return segment(SegmentId::kData).length / kPageSize; }
  std::uint64_t page_addr(std::uint64_t page_no) const {
    return segment(SegmentId::kData).offset + page_no * kPageSize;
  }
  bool operator==(const Layout&) const = default;

  static Result<Layout> compute(std::uint64_t total_size, const RegionConfig& config);
};

/// Fixed superblock field offsets. docs/format.md has the full table.
namespace sb {
inline constexpr std::uint64_t kMagic = 0;
inline constexpr std::uint64_t kFormat = 4;
inline constexpr std::uint64_t kTotalSize = 8;
inline constexpr std::uint64_t kPageSizeField = 16;
inline constexpr std::uint64_t kCacheLineField = 20;
inline constexpr std::uint64_t kSegmentTable = 24;
inline constexpr std::uint64_t kLogHead = 128;
inline constexpr std::uint64_t kLogTail = 136;
inline constexpr std::uint64_t kActiveMetadata = 192;
}  // namespace sb

struct Actor {
  enum class Kind : std::uint8_t { kMaster, kClient };
  Kind kind = Kind::kMaster;
  ClientId id = 0;

  static Actor master() { return {Kind::kMaster, 0}; }
  static Actor client(ClientId id) { return {Kind::kClient, id}; }
  bool is_master() const { return kind == Kind::kMaster; }
};

enum class FaultReason : std::uint8_t {
  kMetadataRegion,
  kOplogRegion,
  kReadOnlyPage,
  kForeignOwner,
  kOutOfRange,
};

struct ProtectionFault {
  Actor actor;
  std::uint64_t addr = 0;
  FaultReason reason = FaultReason::kOutOfRange;
};

enum class PageMode : std::uint8_t { kReadOnly = 0, kWritable = 1 };

/// A run of contiguous data pages.
struct PageRun {
  std::uint64_t page_no = 0;
  std::uint64_t count = 0;
  bool operator==(const PageRun&) const = default;
};

std::uint64_t total_pages(std::span<const PageRun> runs);
/// Collapses an ascending page list into maximal runs.
std::vector<PageRun> runs_from_pages(std::span<const std::uint64_t> pages);
std::vector<std::uint64_t> pages_from_runs(std::span<const PageRun> runs);

struct PersistenceCounters {
  std::uint64_t flushes = 0;  // cachelines flushed
  std::uint64_t fences = 0;
  std::uint64_t tlb_flush_events = 0;
};

enum class CrashPolicy : std::uint8_t { kStrict, kProbabilistic };
enum class FencePhase : std::uint8_t { kBefore, kAfter };

/// Software stand-in for the page-table write bit of every data page.
/// Only the master changes permissions; each call counts as one batched
/// TLB shootdown regardless of how many pages it touches.
class PermissionTable {
 public:
  explicit PermissionTable(std::uint64_t pages);

  void set_permission(std::span<const PageRun> runs, PageMode mode, ClientId owner);

  PageMode mode(std::uint64_t page) const;
  ClientId owner(std::uint64_t page) const;
  std::uint64_t epoch_of_change(std::uint64_t page) const;
  bool writable_by(std::uint64_t page, ClientId client) const;
  std::uint64_t tlb_flush_events() const { return tlb_flush_events_.load(std::memory_order_relaxed); }
  std::uint64_t pages() const { return words_.size(); }

 private:
  // bit 0: writable, bits 1..31: owner, bits 32..63: epoch of last change
  std::vector<std::atomic<std::uint64_t>> words_;
  std::atomic<std::uint64_t> tlb_flush_events_{0};
};

class Region {
 public:
  /// Formats a fresh region: superblock written and persisted, every data
  /// page free and read-only.
  static Result<std::unique_ptr<Region>> create(std::uint64_t total_size, const RegionConfig& config = {});
  /// Boots from a crash image. Both images start equal to `image`.
  static Result<std::unique_ptr<Region>> from_image(std::span<const std::byte> image);
  /// Reopens an existing backing file written by a previous `create`.
  static Result<std::unique_ptr<Region>> open_file(const std::string& path);

  ~Region();
  Region(const Region&) = delete;
  Region& operator=(const Region&) = delete;

  const Layout& layout() const { return layout_; }
  std::uint64_t size() const { return layout_.total_size; }

  /// Volatile image for direct loads.
  const std::byte* data() const { return volatile_; }
  const std::byte* page(std::uint64_t page_no) const { return volatile_ + layout_.page_addr(page_no); }

  /// Unchecked store; master only.
  void store(std::uint64_t addr, std::span<const std::byte> bytes);
  void store_u64(std::uint64_t addr, std::uint64_t value);
  void zero(std::uint64_t addr, std::uint64_t len);

  Result<void, ProtectionFault> checked_store(Actor actor, std::uint64_t addr, std::span<const std::byte> bytes);

  void flush(std::uint64_t addr, std::uint64_t len);
  void fence();
  void persist(std::uint64_t addr, std::uint64_t len) {
    flush(addr, len);
    fence();
  }

  /// Contents that would survive a crash right now. Under the probabilistic
  /// policy every flushed-but-unfenced line also lands with probability 1/2.
  std::vector<std::byte> crash_snapshot(CrashPolicy policy, std::uint64_t seed = 0) const;
  std::span<const std::byte> persistent_image() const { return {persistent_, layout_.total_size}; }
  std::size_t pending_line_count() const;

  PersistenceCounters counters() const;
  PermissionTable& permissions() { return permissions_; }
  const PermissionTable& permissions() const { return permissions_; }

  /// Invoked on the fencing thread around every fence. Used by crash testing.
  void set_fence_observer(std::function<void(FencePhase)> observer) { fence_observer_ = std::move(observer); }

 private:
  struct Mapping;
  Region(Layout layout, std::unique_ptr<Mapping> volatile_map, std::unique_ptr<Mapping> persistent_map);

  FaultReason classify(std::uint64_t addr) const;
  void write_superblock();

  Layout layout_;
  std::unique_ptr<Mapping> volatile_map_;
  std::unique_ptr<Mapping> persistent_map_;
  std::byte* volatile_ = nullptr;
  std::byte* persistent_ = nullptr;
  PermissionTable permissions_;

  mutable std::mutex pending_mu_;
  std::vector<std::uint8_t> pending_flag_;
  std::vector<std::uint64_t> pending_lines_;

  std::atomic<std::uint64_t> flushes_{0};
  std::atomic<std::uint64_t> fences_{0};
  std::function<void(FencePhase)> fence_observer_;
};

enum class PageState : std::uint8_t { kFree = 0, kLeased, kCommitted };

/// Data-page allocator: persistent bitmap plus a volatile free list kept in
/// ascending page order. Page 0 is reserved as the hole marker and is never
/// handed out. Master only.
class PageAllocator {
 public:
  struct Census {
    std::uint64_t free = 0;
    std::uint64_t leased = 0;
    std::uint64_t committed = 0;
    std::uint64_t total = 0;
  };

  /// Fresh allocator: every page except page 0 free.
  explicit PageAllocator(Region& region);
  /// Recovered allocator: `in_use[p]` pages are committed, the rest free.
  PageAllocator(Region& region, const std::vector<bool>& in_use);

  /// Takes `n` pages off the free list (lowest first) as maximal runs and
  /// marks them leased. The bitmap is not touched until the next checkpoint.
  Result<std::vector<PageRun>> alloc_pages(std::uint64_t n);
  void commit(std::span<const PageRun> runs);
  void free(std::span<const PageRun> runs);
  void free_page(std::uint64_t page) { free(std::array{PageRun{page, 1}}); }

  PageState state(std::uint64_t page) const { return states_[page]; }
  std::uint64_t free_count() const { return free_.size(); }
  Census census() const;

  /// Writes the committed set into the bitmap segment and flushes it. The
  /// caller owns the fence.
  void persist_bitmap();
  static std::vector<bool> read_bitmap(const Region& region);

 private:
  Region& region_;
  std::vector<PageState> states_;
  std::set<std::uint64_t> free_;
  std::uint64_t leased_ = 0;
  std::uint64_t committed_ = 0;
};

}  // namespace kucofs
