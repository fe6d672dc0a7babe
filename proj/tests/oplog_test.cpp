#include <gtest/gtest.h>

#include <cstring>
#include <random>
#include <tuple>

#include "kucofs/oplog.hpp"

namespace kucofs {
namespace {

constexpr std::uint64_t kMiB = 1ULL << 20;

using Entry = std::tuple<std::uint64_t, std::string, std::uint64_t, int, std::uint64_t>;

// (parent, name, ino, kind, size) for every live dentry.
std::vector<Entry> listing(const MetadataStore& md) {
  std::vector<Entry> out;
  md.for_each_inode([&](const Inode& dir) {
    if (!dir.dir) return;
    dir.dir->for_each_live([&](const Dentry& d) {
      const Inode* n = md.inode(d.ino);
      out.emplace_back(dir.ino, d.name, d.ino, n ? static_cast<int>(n->kind) : -1, n ? n->size.load() : 0);
    });
  });
  return out;
}

LogRecord creat(std::uint64_t ino, std::string name, std::uint64_t parent = kRootIno) {
  LogRecord r;
  r.type = LogType::kCreat;
  r.ino = ino;
  r.gen = ino;
  r.parent = parent;
  r.mode = 0644;
  r.mtime = 1000 + ino;
  r.name = std::move(name);
  return r;
}

struct Fixture {
  std::unique_ptr<Region> region;
  MetadataStore md;
  std::unique_ptr<PageAllocator> alloc;
  std::unique_ptr<OpLog> log;

  explicit Fixture(std::uint64_t size = 16 * kMiB) {
    region = std::move(Region::create(size)).value();
    alloc = std::make_unique<PageAllocator>(*region);
    log = std::make_unique<OpLog>(*region, 1);
  }

  void commit(std::vector<LogRecord> batch) {
    ASSERT_TRUE(log->append_batch(batch).ok());
    for (const auto& r : batch) {
      if (r.type == LogType::kCreat || r.type == LogType::kMkdir) md.reserve_specific(r.ino, r.gen);
      ASSERT_TRUE(apply_record(md, r).ok());
    }
  }

  Recovered recover_now(CrashPolicy policy = CrashPolicy::kStrict) const {
    auto image = region->crash_snapshot(policy);
    auto booted = Region::from_image(image);
    EXPECT_TRUE(booted.ok());
    auto rec = recover(**booted);
    EXPECT_TRUE(rec.ok());
    return std::move(rec).value();
  }
};

TEST(Codec, RoundTripEveryType) {
  std::vector<LogRecord> recs;
  recs.push_back(creat(3, "hello"));
  LogRecord mk = creat(4, "dir");
  mk.type = LogType::kMkdir;
  recs.push_back(mk);
  LogRecord un;
  un.type = LogType::kUnlink;
  un.parent = 2;
  un.name = "x";
  un.ino = 9;
  recs.push_back(un);
  LogRecord rn;
  rn.type = LogType::kRename;
  rn.parent = 1;
  rn.name = "from";
  rn.parent2 = 2;
  rn.name2 = "to";
  rn.ino = 7;
  recs.push_back(rn);
  LogRecord wr;
  wr.type = LogType::kWrite;
  wr.ino = 5;
  wr.offset = 4096 * 3 + 17;
  wr.size = 9000;
  wr.version = 42;
  wr.mtime = 99;
  wr.runs = {{100, 2}, {200, 1}};
  recs.push_back(wr);

  for (const auto& r : recs) {
    auto bytes = encode_entry(77, r);
    auto d = decode_entry(bytes);
    ASSERT_TRUE(d.ok());
    EXPECT_EQ(d->seq, 77u);
    EXPECT_EQ(d->length, bytes.size());
    // Only the fields a type carries survive; compare re-encodings.
    EXPECT_EQ(encode_entry(77, d->rec), bytes);
    EXPECT_EQ(d->rec.type, r.type);
    EXPECT_EQ(d->rec.name, r.name);
  }
  auto d = decode_entry(encode_entry(1, wr));
  EXPECT_EQ(d->rec.runs, wr.runs);
  EXPECT_EQ(d->rec.version, 42u);
}

TEST(Codec, CorruptionDetected) {
  auto bytes = encode_entry(5, creat(1, "abc"));
  std::mt19937_64 rng(2);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    auto copy = bytes;
    copy[i] ^= std::byte{static_cast<unsigned char>(1 + rng() % 255)};
    auto d = decode_entry(copy);
    EXPECT_FALSE(d.ok()) << "byte " << i;
  }
  EXPECT_FALSE(decode_entry(std::span(bytes.data(), bytes.size() - 1)).ok());
  std::vector<std::byte> zeros(64);
  EXPECT_FALSE(decode_entry(zeros).ok());
}

TEST(OpLog, BatchFenceEconomy) {
  Fixture f;
  std::vector<LogRecord> batch;
  std::uint64_t bytes = 0;
  for (int i = 0; i < 8; ++i) {
    batch.push_back(creat(i + 1, "f" + std::to_string(i)));
    bytes += align_up(encode_entry(i + 1, batch.back()).size(), 8);
  }
  // Entry lines plus the tail line in the superblock.
  const std::uint64_t expect_lines = align_up(bytes, kCacheLine) / kCacheLine + 1;

  const auto before = f.region->counters();
  auto range = f.log->append_batch(batch);
  ASSERT_TRUE(range.ok());
  const auto after = f.region->counters();
  EXPECT_EQ(range->first, 1u);
  EXPECT_EQ(range->last, 8u);
  EXPECT_EQ(after.fences - before.fences, 2u);
  EXPECT_EQ(after.flushes - before.flushes, expect_lines);

  Fixture g;
  const auto b2 = g.region->counters();
  for (const auto& r : batch) ASSERT_TRUE(g.log->append_batch(std::span(&r, 1)).ok());
  EXPECT_EQ(g.region->counters().fences - b2.fences, 16u);
}

TEST(OpLog, SingleEntryRange) {
  Fixture f;
  auto r = f.log->append_batch(std::vector<LogRecord>{creat(1, "a")});
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r->first, r->last);
  auto empty = f.log->append_batch({});
  ASSERT_TRUE(empty.ok());
  EXPECT_LT(empty->last, empty->first);
}

TEST(OpLog, EntriesPersistBeforeTail) {
  Fixture f;
  int phase_checks = 0;
  const std::uint64_t tail_before = f.log->tail();
  f.region->set_fence_observer([&](FencePhase phase) {
    if (phase != FencePhase::kBefore) return;
    // Whenever the tail is about to persist, every entry line is durable.
    const std::uint64_t tail = std::memcmp(f.region->persistent_image().data() + sb::kLogTail,
                                           f.region->data() + sb::kLogTail, 8) != 0;
    if (tail) {
      ++phase_checks;
      EXPECT_EQ(f.region->pending_line_count(), 1u);
    }
  });
  std::vector<LogRecord> batch;
  for (int i = 0; i < 20; ++i) batch.push_back(creat(i + 1, std::string(100, 'a' + i)));
  ASSERT_TRUE(f.log->append_batch(batch).ok());
  f.region->set_fence_observer(nullptr);
  EXPECT_EQ(phase_checks, 1);
  EXPECT_GT(f.log->tail(), tail_before);
}

TEST(OpLog, LogFull) {
  Fixture f;
  std::vector<LogRecord> batch;
  for (int i = 0; i < 10; ++i) batch.push_back(creat(i + 1, std::string(200, 'x')));
  Result<SeqRange> r = SeqRange{};
  std::uint64_t appended = 0;
  while ((r = f.log->append_batch(batch)).ok()) appended += batch.size();
  EXPECT_EQ(r.error(), Errc::kLogFull);
  EXPECT_GT(appended, 0u);
  EXPECT_LE(f.log->tail(), f.log->capacity());
  EXPECT_EQ(f.log->next_seq(), appended + 1);
}

TEST(Recovery, FreshRegion) {
  Fixture f;
  auto rec = f.recover_now();
  ASSERT_NE(rec.md->root(), nullptr);
  EXPECT_TRUE(listing(*rec.md).empty());
  EXPECT_EQ(rec.next_seq, 1u);
  EXPECT_EQ(rec.report.replayed, 0u);
}

TEST(Recovery, ReplaysLog) {
  Fixture f;
  f.commit({creat(1, "a"), creat(2, "b")});
  LogRecord mk = creat(3, "d");
  mk.type = LogType::kMkdir;
  f.commit({mk, creat(4, "inner", 3)});
  LogRecord rn;
  rn.type = LogType::kRename;
  rn.parent = kRootIno;
  rn.name = "a";
  rn.parent2 = 3;
  rn.name2 = "moved";
  f.commit({rn});
  LogRecord un;
  un.type = LogType::kUnlink;
  un.parent = kRootIno;
  un.name = "b";
  f.commit({un});

  auto rec = f.recover_now();
  EXPECT_EQ(listing(*rec.md), listing(f.md));
  EXPECT_EQ(rec.report.replayed, 6u);
  EXPECT_EQ(rec.report.apply_errors, 0u);
  EXPECT_EQ(rec.next_seq, 7u);
}

TEST(Recovery, CheckpointThenEmptyLog) {
  Fixture f;
  for (int i = 0; i < 1000; i += 50) {
    std::vector<LogRecord> batch;
    for (int j = i; j < i + 50; ++j) batch.push_back(creat(j + 1, "file" + std::to_string(j)));
    f.commit(batch);
  }
  auto seq = write_checkpoint(*f.region, f.md, *f.alloc, *f.log);
  ASSERT_TRUE(seq.ok());
  EXPECT_EQ(*seq, 1000u);
  EXPECT_EQ(f.log->tail(), 0u);

  auto rec = f.recover_now();
  EXPECT_EQ(rec.report.replayed, 0u);
  EXPECT_EQ(rec.report.checkpoint_seq, 1000u);
  EXPECT_EQ(listing(*rec.md).size(), 1000u);
  EXPECT_EQ(listing(*rec.md), listing(f.md));
  EXPECT_EQ(rec.next_seq, 1001u);
}

TEST(Recovery, CheckpointWithEmptyLog) {
  Fixture f;
  auto first = write_checkpoint(*f.region, f.md, *f.alloc, *f.log);
  ASSERT_TRUE(first.ok());
  const std::uint64_t active = active_metadata(*f.region);
  auto again = write_checkpoint(*f.region, f.md, *f.alloc, *f.log);
  ASSERT_TRUE(again.ok());
  EXPECT_EQ(*again, *first);
  EXPECT_NE(active_metadata(*f.region), active);
  auto rec = f.recover_now();
  EXPECT_TRUE(listing(*rec.md).empty());
}

// Crash at every fence of a checkpoint: each image must recover to the
// same tree, whether it still uses the old half plus the log or the new
// half alone.
TEST(Recovery, CrashDuringCheckpoint) {
  Fixture f;
  f.commit({creat(1, "a"), creat(2, "b")});
  ASSERT_TRUE(write_checkpoint(*f.region, f.md, *f.alloc, *f.log).ok());
  f.commit({creat(3, "c")});
  LogRecord un;
  un.type = LogType::kUnlink;
  un.parent = kRootIno;
  un.name = "a";
  f.commit({un});
  const auto want = listing(f.md);

  std::vector<std::vector<std::byte>> images;
  f.region->set_fence_observer([&](FencePhase phase) {
    if (phase == FencePhase::kBefore) images.push_back(f.region->crash_snapshot(CrashPolicy::kStrict));
  });
  ASSERT_TRUE(write_checkpoint(*f.region, f.md, *f.alloc, *f.log).ok());
  f.region->set_fence_observer(nullptr);
  images.push_back(f.region->crash_snapshot(CrashPolicy::kStrict));
  ASSERT_GE(images.size(), 3u);

  std::uint64_t used_log = 0;
  for (const auto& img : images) {
    auto booted = Region::from_image(img);
    ASSERT_TRUE(booted.ok());
    auto rec = recover(**booted);
    ASSERT_TRUE(rec.ok());
    EXPECT_EQ(listing(*rec->md), want);
    EXPECT_EQ(rec->report.apply_errors, 0u);
    used_log += rec->report.replayed > 0;
  }
  EXPECT_GT(used_log, 0u);
}

TEST(Recovery, TornTailStopsReplay) {
  Fixture f;
  f.commit({creat(1, "a")});
  f.commit({creat(2, "b")});
  const std::uint64_t last_start = f.log->tail();
  f.commit({creat(3, "c")});

  auto image = f.region->crash_snapshot(CrashPolicy::kStrict);
  const std::uint64_t off = f.region->layout().segment(SegmentId::kOplog).offset + last_start + 20;
  image[off] ^= std::byte{0xff};
  auto booted = Region::from_image(image);
  ASSERT_TRUE(booted.ok());
  auto rec = recover(**booted);
  ASSERT_TRUE(rec.ok());
  EXPECT_TRUE(rec->report.torn_tail);
  EXPECT_EQ(rec->report.replayed, 2u);
  EXPECT_EQ(listing(*rec->md).size(), 2u);
}

TEST(Recovery, UnpersistedBatchIsAbsent) {
  Fixture f;
  f.commit({creat(1, "a")});
  // Crash right before the entries' fence of the next batch.
  std::vector<std::byte> image;
  bool taken = false;
  f.region->set_fence_observer([&](FencePhase phase) {
    if (phase == FencePhase::kBefore && !taken) {
      image = f.region->crash_snapshot(CrashPolicy::kStrict);
      taken = true;
    }
  });
  f.commit({creat(2, "b"), creat(3, "c")});
  f.region->set_fence_observer(nullptr);
  auto booted = Region::from_image(image);
  ASSERT_TRUE(booted.ok());
  auto rec = recover(**booted);
  ASSERT_TRUE(rec.ok());
  EXPECT_EQ(listing(*rec->md).size(), 1u);
  EXPECT_FALSE(rec->report.torn_tail);
}

TEST(Recovery, Idempotent) {
  Fixture f;
  std::vector<LogRecord> batch;
  for (int i = 0; i < 30; ++i) batch.push_back(creat(i + 1, "n" + std::to_string(i)));
  f.commit(batch);
  auto a = f.recover_now();
  auto b = f.recover_now();
  EXPECT_EQ(listing(*a.md), listing(*b.md));
  EXPECT_EQ(a.next_seq, b.next_seq);
  // Recovery never writes the region.
  auto image = f.region->crash_snapshot(CrashPolicy::kStrict);
  auto booted = Region::from_image(image);
  ASSERT_TRUE(booted.ok());
  ASSERT_TRUE(recover(**booted).ok());
  EXPECT_EQ(std::memcmp((*booted)->data(), image.data(), image.size()), 0);
}

TEST(Recovery, WritesAndPages) {
  Fixture f;
  f.commit({creat(1, "file")});
  auto runs = f.alloc->alloc_pages(3);
  ASSERT_TRUE(runs.ok());
  LogRecord w;
  w.type = LogType::kWrite;
  w.ino = 1;
  w.offset = 0;
  w.size = 3 * kPageSize - 10;
  w.version = 1;
  w.runs = *runs;
  f.commit({w});
  f.alloc->commit(*runs);
  auto rec = f.recover_now();
  const Inode* n = rec.md->inode(1);
  ASSERT_NE(n, nullptr);
  EXPECT_EQ(n->size.load(), 3 * kPageSize - 10);
  EXPECT_EQ(rec.report.referenced_pages, 3u);
  EXPECT_EQ(rec.report.double_refs, 0u);
  for (std::uint64_t p : pages_from_runs(*runs)) EXPECT_TRUE(rec.in_use[p]);
}

}  // namespace
}  // namespace kucofs
