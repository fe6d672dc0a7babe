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

#include "kucofs/pmem.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cassert>
#include <cstring>
#include <random>

#include "kucofs/codec.hpp"

namespace kucofs {
namespace {

std::uint64_t align_down(std::uint64_t v, std::uint64_t a) { return v / a * a; }
std::uint64_t align_up(std::uint64_t v, std::uint64_t a) { return (v + a - 1) / a * a; }

}  // namespace

std::uint64_t total_pages(std::span<const PageRun> runs) {
  std::uint64_t n = 0;
  for (const auto& r : runs) n += r.count;
  return n;
}

std::vector<PageRun> runs_from_pages(std::span<const std::uint64_t> pages) {
  std::vector<PageRun> runs;
  for (std::uint64_t p : pages) {
    if (!runs.empty() && runs.back().page_no + runs.back().count == p) {
      ++runs.back().count;
    } else {
      runs.push_back({p, 1});
    }
  }
  return runs;
}

std::vector<std::uint64_t> pages_from_runs(std::span<const PageRun> runs) {
  std::vector<std::uint64_t> pages;
  pages.reserve(total_pages(runs));
  for (const auto& r : runs) {
    for (std::uint64_t i = 0; i < r.count; ++i) pages.push_back(r.page_no + i);
  }
  return pages;
}

// ---------------------------------------------------------------------------
// Layout

Result<Layout> Layout::compute(std::uint64_t total_size, const RegionConfig& config) {
  if (total_size < kMinRegionSize) return Errc::kSizeTooSmall;
  const double mf = config.metadata_fraction;
  const double of = config.oplog_fraction;
  if (mf <= 0 || of <= 0 || mf + of > 1.0) return Errc::kInvalidArgument;

  Layout l;
  l.total_size = total_size;
  auto& seg = l.segments;
  seg[0] = {0, kPageSize};
  // Two shadow halves, each page aligned.
  const std::uint64_t meta = align_down(static_cast<std::uint64_t>(static_cast<double>(total_size) * mf), 2 * kPageSize);
  const std::uint64_t oplog = align_down(static_cast<std::uint64_t>(static_cast<double>(total_size) * of), kPageSize);
  if (meta < 2 * kPageSize || oplog < kPageSize) return Errc::kSizeTooSmall;
  seg[1] = {seg[0].end(), meta};
  seg[2] = {seg[1].end(), oplog};
  if (seg[2].end() >= total_size) return Errc::kSizeTooSmall;

  const std::uint64_t rest = total_size - seg[2].end();
  std::uint64_t n = rest * 8 / (kPageSize * 8 + 1);
  while (n > 0 && align_up((n + 7) / 8, kPageSize) + n * kPageSize > rest) --n;
  if (n < 2) return Errc::kSizeTooSmall;
  seg[3] = {seg[2].end(), align_up((n + 7) / 8, kPageSize)};
  seg[4] = {seg[3].end(), n * kPageSize};
  return l;
}

// ---------------------------------------------------------------------------
// PermissionTable

PermissionTable::PermissionTable(std::uint64_t pages) : words_(pages) {
  for (auto& w : words_) w.store(0, std::memory_order_relaxed);
}

void PermissionTable::set_permission(std::span<const PageRun> runs, PageMode mode, ClientId owner) {
  if (runs.empty()) return;
  const std::uint64_t epoch = tlb_flush_events_.fetch_add(1, std::memory_order_acq_rel) + 1;
  const std::uint64_t word = (epoch << 32) |
                             (mode == PageMode::kWritable ? ((static_cast<std::uint64_t>(owner) & 0x7fffffff) << 1) | 1 : 0);
  for (const auto& r : runs) {
    for (std::uint64_t i = 0; i < r.count; ++i) words_.at(r.page_no + i).store(word, std::memory_order_release);
  }
}

PageMode PermissionTable::mode(std::uint64_t page) const {
  return (words_[page].load(std::memory_order_acquire) & 1) ? PageMode::kWritable : PageMode::kReadOnly;
}

ClientId PermissionTable::owner(std::uint64_t page) const {
  return static_cast<ClientId>((words_[page].load(std::memory_order_acquire) >> 1) & 0x7fffffff);
}

std::uint64_t PermissionTable::epoch_of_change(std::uint64_t page) const {
  return words_[page].load(std::memory_order_acquire) >> 32;
}

bool PermissionTable::writable_by(std::uint64_t page, ClientId client) const {
  const std::uint64_t w = words_[page].load(std::memory_order_acquire);
  return (w & 1) && ((w >> 1) & 0x7fffffff) == (client & 0x7fffffff);
}

// ---------------------------------------------------------------------------
// Region

struct Region::Mapping {
  std::byte* base = nullptr;
  std::size_t length = 0;
  int fd = -1;

  ~Mapping() {
    if (base) ::munmap(base, length);
    if (fd >= 0) ::close(fd);
  }

  static std::unique_ptr<Mapping> anonymous(std::size_t length) {
    void* p = ::mmap(nullptr, length, PROT_READ | PROT_WRITE, MAP_PRIVATE | MAP_ANONYMOUS | MAP_NORESERVE, -1, 0);
    if (p == MAP_FAILED) return nullptr;
    auto m = std::make_unique<Mapping>();
    m->base = static_cast<std::byte*>(p);
    m->length = length;
    return m;
  }

  static std::unique_ptr<Mapping> file(const std::string& path, std::size_t length, bool create) {
    int fd = ::open(path.c_str(), create ? (O_RDWR | O_CREAT | O_TRUNC) : O_RDWR, 0644);
    if (fd < 0) return nullptr;
    if (create && ::ftruncate(fd, static_cast<off_t>(length)) != 0) {
      ::close(fd);
      return nullptr;
    }
    void* p = ::mmap(nullptr, length, PROT_READ | PROT_WRITE, MAP_SHARED, fd, 0);
    if (p == MAP_FAILED) {
      ::close(fd);
      return nullptr;
    }
    auto m = std::make_unique<Mapping>();
    m->base = static_cast<std::byte*>(p);
    m->length = length;
    m->fd = fd;
    return m;
  }
};

Region::Region(Layout layout, std::unique_ptr<Mapping> volatile_map, std::unique_ptr<Mapping> persistent_map)
    : layout_(layout),
      volatile_map_(std::move(volatile_map)),
      persistent_map_(std::move(persistent_map)),
      volatile_(volatile_map_->base),
      persistent_(persistent_map_->base),
      permissions_(layout.data_pages()),
      pending_flag_((layout.total_size + kCacheLine - 1) / kCacheLine, 0) {}

Region::~Region() = default;

Result<std::unique_ptr<Region>> Region::create(std::uint64_t total_size, const RegionConfig& config) {
  auto layout = Layout::compute(total_size, config);
  if (!layout) return layout.error();
  auto vol = Mapping::anonymous(total_size);
  if (!vol) return Errc::kIo;
  auto per = config.backing_path.empty() ? Mapping::anonymous(total_size)
                                         : Mapping::file(config.backing_path, total_size, true);
  if (!per) return Errc::kIo;
  std::unique_ptr<Region> r(new Region(*layout, std::move(vol), std::move(per)));
  r->write_superblock();
  return r;
}

namespace {

Result<Layout> parse_superblock(std::span<const std::byte> image) {
  if (image.size() < kPageSize) return Errc::kCorruptSuperblock;
  if (std::memcmp(image.data(), kRegionMagic, 4) != 0) return Errc::kCorruptSuperblock;
  if (get_u32(image.data() + sb::kFormat) != kFormatVersion) return Errc::kCorruptSuperblock;
  Layout l;
  l.total_size = get_u64(image.data() + sb::kTotalSize);
  if (l.total_size != image.size()) return Errc::kCorruptSuperblock;
  if (get_u32(image.data() + sb::kPageSizeField) != kPageSize) return Errc::kCorruptSuperblock;
  if (get_u32(image.data() + sb::kCacheLineField) != kCacheLine) return Errc::kCorruptSuperblock;
  std::uint64_t prev_end = 0;
  for (std::size_t i = 0; i < kSegmentCount; ++i) {
    const std::byte* p = image.data() + sb::kSegmentTable + i * 16;
    l.segments[i] = {get_u64(p), get_u64(p + 8)};
    if (l.segments[i].offset < prev_end || l.segments[i].end() > l.total_size) return Errc::kCorruptSuperblock;
    prev_end = l.segments[i].end();
  }
  const Segment& data = l.segment(SegmentId::kData);
  if (data.offset % kPageSize != 0 || data.length % kPageSize != 0) return Errc::kCorruptSuperblock;
  return l;
}

}  // namespace

Result<std::unique_ptr<Region>> Region::from_image(std::span<const std::byte> image) {
  auto layout = parse_superblock(image);
  if (!layout) return layout.error();
  auto vol = Mapping::anonymous(image.size());
  auto per = Mapping::anonymous(image.size());
  if (!vol || !per) return Errc::kIo;
  std::memcpy(vol->base, image.data(), image.size());
  std::memcpy(per->base, image.data(), image.size());
  return std::unique_ptr<Region>(new Region(*layout, std::move(vol), std::move(per)));
}

Result<std::unique_ptr<Region>> Region::open_file(const std::string& path) {
  struct stat st {};
  if (::stat(path.c_str(), &st) != 0) return Errc::kIo;
  const auto size = static_cast<std::size_t>(st.st_size);
  auto per = Mapping::file(path, size, false);
  if (!per) return Errc::kIo;
  auto layout = parse_superblock({per->base, size});
  if (!layout) return layout.error();
  auto vol = Mapping::anonymous(size);
  if (!vol) return Errc::kIo;
  std::memcpy(vol->base, per->base, size);
  return std::unique_ptr<Region>(new Region(*layout, std::move(vol), std::move(per)));
}

void Region::write_superblock() {
  std::array<std::byte, kPageSize> sbuf{};
  std::memcpy(sbuf.data(), kRegionMagic, 4);
  put_u32(sbuf.data() + sb::kFormat, kFormatVersion);
  put_u64(sbuf.data() + sb::kTotalSize, layout_.total_size);
  put_u32(sbuf.data() + sb::kPageSizeField, static_cast<std::uint32_t>(kPageSize));
  put_u32(sbuf.data() + sb::kCacheLineField, static_cast<std::uint32_t>(kCacheLine));
  for (std::size_t i = 0; i < kSegmentCount; ++i) {
    put_u64(sbuf.data() + sb::kSegmentTable + i * 16, layout_.segments[i].offset);
    put_u64(sbuf.data() + sb::kSegmentTable + i * 16 + 8, layout_.segments[i].length);
  }
  store(0, sbuf);
  persist(0, kPageSize);
}

void Region::store(std::uint64_t addr, std::span<const std::byte> bytes) {
  assert(addr + bytes.size() <= layout_.total_size);
  if (!bytes.empty()) std::memcpy(volatile_ + addr, bytes.data(), bytes.size());
}

void Region::store_u64(std::uint64_t addr, std::uint64_t value) {
  std::byte buf[8];
  put_u64(buf, value);
  store(addr, buf);
}

void Region::zero(std::uint64_t addr, std::uint64_t len) {
  assert(addr + len <= layout_.total_size);
  std::memset(volatile_ + addr, 0, len);
}

FaultReason Region::classify(std::uint64_t addr) const {
  if (layout_.segment(SegmentId::kOplog).contains(addr)) return FaultReason::kOplogRegion;
  return FaultReason::kMetadataRegion;
}

Result<void, ProtectionFault> Region::checked_store(Actor actor, std::uint64_t addr, std::span<const std::byte> bytes) {
  const std::uint64_t len = bytes.size();
  if (addr > layout_.total_size || len > layout_.total_size - addr) {
    return ProtectionFault{actor, addr, FaultReason::kOutOfRange};
  }
  if (actor.is_master()) {
    store(addr, bytes);
    return {};
  }
  if (len == 0) return {};
  const Segment& data = layout_.segment(SegmentId::kData);
  for (std::uint64_t a = addr; a < addr + len;) {
    if (!data.contains(a)) return ProtectionFault{actor, a, classify(a)};
    const std::uint64_t page = (a - data.offset) / kPageSize;
    if (!permissions_.writable_by(page, actor.id)) {
      const FaultReason why =
          permissions_.mode(page) == PageMode::kWritable ? FaultReason::kForeignOwner : FaultReason::kReadOnlyPage;
      return ProtectionFault{actor, a, why};
    }
    a = data.offset + (page + 1) * kPageSize;
  }
  store(addr, bytes);
  return {};
}

void Region::flush(std::uint64_t addr, std::uint64_t len) {
  if (len == 0) return;
  assert(addr + len <= layout_.total_size);
  const std::uint64_t first = addr / kCacheLine;
  const std::uint64_t last = (addr + len - 1) / kCacheLine;
  std::lock_guard lock(pending_mu_);
  for (std::uint64_t line = first; line <= last; ++line) {
    if (!pending_flag_[line]) {
      pending_flag_[line] = 1;
      pending_lines_.push_back(line);
    }
  }
  flushes_.fetch_add(last - first + 1, std::memory_order_relaxed);
}

void Region::fence() {
  if (fence_observer_) fence_observer_(FencePhase::kBefore);
  {
    std::lock_guard lock(pending_mu_);
    for (std::uint64_t line : pending_lines_) {
      const std::uint64_t off = line * kCacheLine;
      const std::uint64_t n = std::min<std::uint64_t>(kCacheLine, layout_.total_size - off);
      std::memcpy(persistent_ + off, volatile_ + off, n);
      pending_flag_[line] = 0;
    }
    pending_lines_.clear();
    fences_.fetch_add(1, std::memory_order_relaxed);
  }
  if (fence_observer_) fence_observer_(FencePhase::kAfter);
}

std::vector<std::byte> Region::crash_snapshot(CrashPolicy policy, std::uint64_t seed) const {
  std::vector<std::byte> image(persistent_, persistent_ + layout_.total_size);
  if (policy == CrashPolicy::kProbabilistic) {
    std::mt19937_64 rng(seed);
    std::lock_guard lock(pending_mu_);
    for (std::uint64_t line : pending_lines_) {
      if (rng() & 1) {
        const std::uint64_t off = line * kCacheLine;
        const std::uint64_t n = std::min<std::uint64_t>(kCacheLine, layout_.total_size - off);
        std::memcpy(image.data() + off, volatile_ + off, n);
      }
    }
  }
  return image;
}

std::size_t Region::pending_line_count() const {
  std::lock_guard lock(pending_mu_);
  return pending_lines_.size();
}

PersistenceCounters Region::counters() const {
  return {flushes_.load(std::memory_order_relaxed), fences_.load(std::memory_order_relaxed),
          permissions_.tlb_flush_events()};
}

// ---------------------------------------------------------------------------
// PageAllocator

PageAllocator::PageAllocator(Region& region)
    : PageAllocator(region, std::vector<bool>(region.layout().data_pages(), false)) {}

PageAllocator::PageAllocator(Region& region, const std::vector<bool>& in_use)
    : region_(region), states_(region.layout().data_pages(), PageState::kFree) {
  const std::uint64_t n = states_.size();
  for (std::uint64_t p = 0; p < n; ++p) {
    if (p == 0 || (p < in_use.size() && in_use[p])) {
      states_[p] = PageState::kCommitted;
      ++committed_;
    } else {
      free_.insert(free_.end(), p);
    }
  }
}

Result<std::vector<PageRun>> PageAllocator::alloc_pages(std::uint64_t n) {
  if (n == 0) return Errc::kInvalidArgument;
  if (free_.size() < n) return Errc::kOutOfSpace;
  std::vector<PageRun> runs;
  auto it = free_.begin();
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint64_t p = *it;
    it = free_.erase(it);
    states_[p] = PageState::kLeased;
    if (!runs.empty() && runs.back().page_no + runs.back().count == p) {
      ++runs.back().count;
    } else {
      runs.push_back({p, 1});
    }
  }
  leased_ += n;
  return runs;
}

void PageAllocator::commit(std::span<const PageRun> runs) {
  for (const auto& r : runs) {
    for (std::uint64_t p = r.page_no; p < r.page_no + r.count; ++p) {
      assert(states_[p] == PageState::kLeased);
      states_[p] = PageState::kCommitted;
    }
    leased_ -= r.count;
    committed_ += r.count;
  }
}

void PageAllocator::free(std::span<const PageRun> runs) {
  for (const auto& r : runs) {
    for (std::uint64_t p = r.page_no; p < r.page_no + r.count; ++p) {
      assert(p != 0);
      switch (states_[p]) {
        case PageState::kFree: continue;
        case PageState::kLeased: --leased_; break;
        case PageState::kCommitted: --committed_; break;
      }
      states_[p] = PageState::kFree;
      free_.insert(p);
    }
  }
}

PageAllocator::Census PageAllocator::census() const {
  return {free_.size(), leased_, committed_, states_.size()};
}

void PageAllocator::persist_bitmap() {
  const Segment& seg = region_.layout().segment(SegmentId::kBitmap);
  std::vector<std::byte> bits(seg.length, std::byte{0});
  for (std::uint64_t p = 0; p < states_.size(); ++p) {
    if (states_[p] == PageState::kCommitted) bits[p / 8] |= std::byte{static_cast<unsigned char>(1u << (p % 8))};
  }
  const std::uint64_t used = (states_.size() + 7) / 8;
  region_.store(seg.offset, std::span(bits).first(used));
  region_.flush(seg.offset, used);
}

std::vector<bool> PageAllocator::read_bitmap(const Region& region) {
  const Segment& seg = region.layout().segment(SegmentId::kBitmap);
  const std::uint64_t n = region.layout().data_pages();
  std::vector<bool> out(n);
  const std::byte* base = region.data() + seg.offset;
  for (std::uint64_t p = 0; p < n; ++p) out[p] = (std::to_integer<unsigned>(base[p / 8]) >> (p % 8)) & 1;
  return out;
}

}  // namespace kucofs
