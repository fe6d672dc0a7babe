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

#include "kucofs/oplog.hpp"

#include <algorithm>
#include <cstring>

#include "kucofs/codec.hpp"
#include "kucofs/hash.hpp"

namespace kucofs {
namespace {

bool valid_type(std::uint8_t t) { return t >= 1 && t <= static_cast<std::uint8_t>(LogType::kWrite); }

void encode_payload(ByteWriter& w, const LogRecord& r) {
  switch (r.type) {
    case LogType::kCreat:
    case LogType::kMkdir:
      w.u64(r.ino);
      w.u64(r.gen);
      w.u64(r.parent);
      w.u32(r.mode);
      w.u64(r.mtime);
      w.short_string(r.name);
      break;
    case LogType::kUnlink:
    case LogType::kRmdir:
      w.u64(r.ino);
      w.u64(r.parent);
      w.short_string(r.name);
      break;
    case LogType::kRename:
      w.u64(r.ino);
      w.u64(r.parent);
      w.u64(r.parent2);
      w.short_string(r.name);
      w.short_string(r.name2);
      break;
    case LogType::kWrite:
      w.u64(r.ino);
      w.u64(r.offset);
      w.u64(r.size);
      w.u64(r.version);
      w.u64(r.mtime);
      w.u16(static_cast<std::uint16_t>(r.runs.size()));
      for (const PageRun& run : r.runs) {
        w.u64(run.page_no);
        w.u32(static_cast<std::uint32_t>(run.count));
      }
      break;
  }
}

bool decode_payload(ByteReader& rd, LogRecord& r) {
  switch (r.type) {
    case LogType::kCreat:
    case LogType::kMkdir:
      r.ino = rd.u64();
      r.gen = rd.u64();
      r.parent = rd.u64();
      r.mode = rd.u32();
      r.mtime = rd.u64();
      r.name = rd.short_string();
      break;
    case LogType::kUnlink:
    case LogType::kRmdir:
      r.ino = rd.u64();
      r.parent = rd.u64();
      r.name = rd.short_string();
      break;
    case LogType::kRename:
      r.ino = rd.u64();
      r.parent = rd.u64();
      r.parent2 = rd.u64();
      r.name = rd.short_string();
      r.name2 = rd.short_string();
      break;
    case LogType::kWrite: {
      r.ino = rd.u64();
      r.offset = rd.u64();
      r.size = rd.u64();
      r.version = rd.u64();
      r.mtime = rd.u64();
      const std::uint16_t n = rd.u16();
      if (n > kMaxRunsPerEntry) return false;
      r.runs.resize(n);
      for (auto& run : r.runs) {
        run.page_no = rd.u64();
        run.count = rd.u32();
      }
      break;
    }
  }
  return !rd.failed() && rd.remaining() == 0;
}

}  // namespace

std::vector<std::byte> encode_entry(std::uint64_t seq, const LogRecord& rec) {
  std::vector<std::byte> out;
  ByteWriter w(out);
  w.u64(seq);
  w.u8(static_cast<std::uint8_t>(rec.type));
  w.u16(0);
  encode_payload(w, rec);
  put_u16(out.data() + 9, static_cast<std::uint16_t>(out.size() - kEntryHeader));
  w.u32(crc32c(out));
  return out;
}

Result<DecodedEntry> decode_entry(std::span<const std::byte> bytes) {
  if (bytes.size() < kEntryHeader + kEntryTrailer) return Errc::kInconsistent;
  DecodedEntry e;
  e.seq = get_u64(bytes.data());
  const std::uint8_t type = static_cast<std::uint8_t>(bytes[8]);
  const std::size_t len = get_u16(bytes.data() + 9);
  if (!valid_type(type) || e.seq == 0) return Errc::kInconsistent;
  const std::size_t total = kEntryHeader + len + kEntryTrailer;
  if (total > bytes.size() || total > kMaxEntrySize) return Errc::kInconsistent;
  if (crc32c(bytes.first(kEntryHeader + len)) != get_u32(bytes.data() + kEntryHeader + len)) {
    return Errc::kInconsistent;
  }
  e.rec.type = static_cast<LogType>(type);
  ByteReader rd(bytes.subspan(kEntryHeader, len));
  if (!decode_payload(rd, e.rec)) return Errc::kInconsistent;
  e.length = total;
  return e;
}

// ---- OpLog -----------------------------------------------------------------

OpLog::OpLog(Region& region, std::uint64_t next_seq)
    : region_(region),
      base_(region.layout().segment(SegmentId::kOplog).offset),
      capacity_(region.layout().segment(SegmentId::kOplog).length),
      head_(get_u64(region.data() + sb::kLogHead)),
      tail_(get_u64(region.data() + sb::kLogTail)),
      next_seq_(next_seq) {}

Result<SeqRange> OpLog::append_batch(std::span<const LogRecord> records) {
  SeqRange range{next_seq_, next_seq_ - 1};
  if (records.empty()) return range;

  std::vector<std::vector<std::byte>> encoded;
  encoded.reserve(records.size());
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    encoded.push_back(encode_entry(next_seq_ + i, records[i]));
    if (encoded.back().size() > kMaxEntrySize) return Errc::kInvalidArgument;
    total += align_up(encoded.back().size(), 8);
  }
  const std::uint64_t start = tail_;
  const std::uint64_t end = start + align_up(total, kCacheLine);
  if (end > capacity_) return Errc::kLogFull;

  std::vector<std::byte> buf(end - start, std::byte{0});
  std::uint64_t pos = 0;
  for (const auto& e : encoded) {
    std::memcpy(buf.data() + pos, e.data(), e.size());
    pos += align_up(e.size(), 8);
  }
  region_.store(base_ + start, buf);
  region_.flush(base_ + start, buf.size());
  region_.fence();

  tail_ = end;
  region_.store_u64(sb::kLogTail, tail_);
  region_.flush(sb::kLogTail, 8);
  region_.fence();

  next_seq_ += records.size();
  range.last = next_seq_ - 1;
  appended_ += records.size();
  ++batches_;
  return range;
}

void OpLog::truncate() {
  head_ = 0;
  tail_ = 0;
  region_.store_u64(sb::kLogHead, 0);
  region_.store_u64(sb::kLogTail, 0);
  region_.flush(sb::kLogHead, 16);
  region_.fence();
}

// ---- checkpoint ------------------------------------------------------------

std::uint64_t active_metadata(const Region& region) { return get_u64(region.data() + sb::kActiveMetadata); }

Result<std::uint64_t> write_checkpoint(Region& region, const MetadataStore& md, PageAllocator& alloc, OpLog& log) {
  std::vector<std::byte> body;
  ByteWriter w(body);
  std::uint64_t count = 0;
  md.for_each_inode([&](const Inode& n) {
    ++count;
    w.u64(n.ino);
    w.u64(n.generation);
    w.u8(static_cast<std::uint8_t>(n.kind));
    w.u32(n.mode);
    w.u64(n.size.load(std::memory_order_relaxed));
    w.u64(n.mtime.load(std::memory_order_relaxed));
    w.u64(n.max_version);
    w.u64(n.parent);
    if (n.kind == InodeKind::kDir) {
      std::vector<const Dentry*> entries;
      n.dir->for_each_live([&](const Dentry& d) { entries.push_back(&d); });
      w.u64(entries.size());
      for (const Dentry* d : entries) {
        w.u64(d->ino);
        w.short_string(d->name);
      }
    } else {
      std::vector<std::pair<std::uint64_t, PackedItem>> items;
      n.map->for_each_item([&](std::uint64_t idx, const PackedItem& p) { items.emplace_back(idx, p); });
      w.u64(items.size());
      for (const auto& [idx, p] : items) {
        w.u32(static_cast<std::uint32_t>(idx));
        for (std::uint32_t word : p.words) w.u32(word);
      }
    }
  });

  const Segment& seg = region.layout().segment(SegmentId::kMetadata);
  const std::uint64_t half = seg.length / 2;
  if (kCheckpointHeader + body.size() > half) return Errc::kMetadataFull;

  const std::uint64_t seq = log.next_seq() - 1;
  std::vector<std::byte> header;
  ByteWriter hw(header);
  hw.bytes(std::as_bytes(std::span(kCheckpointMagic)));
  hw.u32(kFormatVersion);
  hw.u64(seq);
  hw.u64(md.next_generation());
  hw.u64(count);
  hw.u64(body.size());
  hw.u32(crc32c(body));
  hw.u32(crc32c(header));
  header.resize(kCheckpointHeader, std::byte{0});

  const std::uint64_t target = active_metadata(region) == 1 ? 1 : 0;
  const std::uint64_t off = seg.offset + target * half;
  region.store(off, header);
  region.store(off + kCheckpointHeader, body);
  region.flush(off, kCheckpointHeader + body.size());
  alloc.persist_bitmap();
  region.fence();

  region.store_u64(sb::kActiveMetadata, target + 1);
  region.flush(sb::kActiveMetadata, 8);
  region.fence();

  log.truncate();
  return seq;
}

// ---- recovery --------------------------------------------------------------

Status apply_record(MetadataStore& md, const LogRecord& r) {
  switch (r.type) {
    case LogType::kCreat:
    case LogType::kMkdir: {
      auto made = md.create(r.parent, r.name, r.ino, r.gen, r.type == LogType::kMkdir ? InodeKind::kDir : InodeKind::kFile,
                            r.mode, r.mtime);
      if (!made) return made.error();
      return {};
    }
    case LogType::kUnlink:
      return md.remove(r.parent, r.name, InodeKind::kFile);
    case LogType::kRmdir:
      return md.remove(r.parent, r.name, InodeKind::kDir);
    case LogType::kRename:
      return md.rename(r.parent, r.name, r.parent2, r.name2);
    case LogType::kWrite: {
      const auto pages = pages_from_runs(r.runs);
      return md.write(r.ino, r.offset, r.size, r.version, r.mtime, pages);
    }
  }
  return Errc::kInvalidArgument;
}

namespace {

struct LoadedCheckpoint {
  std::uint64_t seq = 0;
};

Result<LoadedCheckpoint> load_checkpoint(const Region& region, MetadataStore& md) {
  const std::uint64_t active = active_metadata(region);
  // Never checkpointed: the log alone describes the tree.
  if (active == 0) return LoadedCheckpoint{};
  if (active != 1 && active != 2) return Errc::kCorruptSuperblock;
  const Segment& seg = region.layout().segment(SegmentId::kMetadata);
  const std::uint64_t half = seg.length / 2;
  const std::byte* base = region.data() + seg.offset + (active - 1) * half;

  if (std::memcmp(base, kCheckpointMagic, 4) != 0) return Errc::kCorruptSuperblock;
  if (crc32c(std::span(base, 44)) != get_u32(base + 44)) return Errc::kCorruptSuperblock;
  ByteReader hr(std::span(base, kCheckpointHeader));
  hr.bytes(4);
  if (hr.u32() != kFormatVersion) return Errc::kCorruptSuperblock;
  LoadedCheckpoint out;
  out.seq = hr.u64();
  const std::uint64_t next_gen = hr.u64();
  const std::uint64_t count = hr.u64();
  const std::uint64_t body_len = hr.u64();
  const std::uint32_t body_crc = hr.u32();
  if (kCheckpointHeader + body_len > half) return Errc::kCorruptSuperblock;
  std::span<const std::byte> body(base + kCheckpointHeader, body_len);
  if (crc32c(body) != body_crc) return Errc::kCorruptSuperblock;

  struct PendingDir {
    Inode* dir;
    std::vector<std::pair<std::uint64_t, std::string>> entries;
  };
  std::vector<PendingDir> dirs;
  ByteReader rd(body);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t ino = rd.u64();
    const std::uint64_t gen = rd.u64();
    const std::uint8_t kind = rd.u8();
    const std::uint32_t mode = rd.u32();
    const std::uint64_t size = rd.u64();
    const std::uint64_t mtime = rd.u64();
    const std::uint64_t max_version = rd.u64();
    const std::uint64_t parent = rd.u64();
    if (rd.failed() || (kind != 1 && kind != 2) || ino >= InodeTable::kCapacity) return Errc::kCorruptSuperblock;
    auto n = std::make_unique<Inode>(ino, gen, static_cast<InodeKind>(kind), mode, parent);
    n->size.store(size, std::memory_order_relaxed);
    n->mtime.store(mtime, std::memory_order_relaxed);
    n->max_version = max_version;
    Inode* inode = md.install(std::move(n));
    const std::uint64_t m = rd.u64();
    if (rd.failed() || m > body_len) return Errc::kCorruptSuperblock;
    if (inode->kind == InodeKind::kDir) {
      PendingDir pd{inode, {}};
      pd.entries.reserve(m);
      for (std::uint64_t j = 0; j < m; ++j) {
        const std::uint64_t child = rd.u64();
        pd.entries.emplace_back(child, rd.short_string());
      }
      dirs.push_back(std::move(pd));
    } else {
      for (std::uint64_t j = 0; j < m; ++j) {
        const std::uint32_t idx = rd.u32();
        PackedItem p;
        for (auto& word : p.words) word = rd.u32();
        if (rd.failed() || !inode->map->store_raw(idx, p)) return Errc::kCorruptSuperblock;
      }
    }
    if (rd.failed()) return Errc::kCorruptSuperblock;
  }
  for (auto& pd : dirs) {
    Dentry* tail = pd.dir->dir->mutable_head();
    for (auto& [child, name] : pd.entries) {
      const std::uint64_t key = fnv1a64(name);
      tail = md.append_loaded(*pd.dir, tail, key, std::move(name), child);
    }
  }
  md.set_next_generation(std::max(md.next_generation(), next_gen));
  return out;
}

}  // namespace

Result<Recovered> recover(const Region& region, MetadataStore::Options options) {
  Recovered out;
  out.md = std::make_unique<MetadataStore>(options);
  MetadataStore& md = *out.md;

  auto ck = load_checkpoint(region, md);
  if (!ck) return ck.error();
  out.report.checkpoint_seq = ck->seq;

  const Segment& logseg = region.layout().segment(SegmentId::kOplog);
  const std::uint64_t head = get_u64(region.data() + sb::kLogHead);
  const std::uint64_t tail = get_u64(region.data() + sb::kLogTail);
  if (head > tail || tail > logseg.length) return Errc::kCorruptSuperblock;
  const std::byte* log = region.data() + logseg.offset;

  std::uint64_t expected = ck->seq + 1;
  std::uint64_t pos = head;
  while (pos < tail) {
    auto e = decode_entry(std::span(log + pos, tail - pos));
    if (!e) {
      if (pos % kCacheLine != 0) {
        pos = align_up(pos, kCacheLine);
        continue;
      }
      out.report.torn_tail = true;
      break;
    }
    if (e->seq <= ck->seq) {
      ++out.report.skipped;
    } else if (e->seq != expected) {
      out.report.torn_tail = true;
      break;
    } else {
      if (!apply_record(md, e->rec)) ++out.report.apply_errors;
      ++out.report.replayed;
      ++expected;
    }
    pos += align_up(e->length, 8);
  }
  md.ebr().drain();
  out.next_seq = expected;

  const std::uint64_t pages = region.layout().data_pages();
  out.in_use.assign(pages, false);
  md.for_each_inode([&](const Inode& n) {
    if (!n.map) return;
    for (std::uint64_t p : n.map->referenced_pages()) {
      if (p == 0 || p >= pages) {
        ++out.report.bad_refs;
      } else if (out.in_use[p]) {
        ++out.report.double_refs;
      } else {
        out.in_use[p] = true;
        ++out.report.referenced_pages;
      }
    }
  });
  const auto bitmap = PageAllocator::read_bitmap(region);
  for (std::uint64_t p = 1; p < pages; ++p) {
    if (bitmap[p] != out.in_use[p]) ++out.report.bitmap_mismatch;
  }
  out.report.free_pages = pages - 1 - out.report.referenced_pages;

  md.stats().key_comparisons.store(0, std::memory_order_relaxed);
  md.stats().stale_hints.store(0, std::memory_order_relaxed);
  return out;
}

}  // namespace kucofs
