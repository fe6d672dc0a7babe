#include <gtest/gtest.h>

#include <cstring>

#include "kucofs/filesystem.hpp"

namespace kucofs {
namespace {

constexpr std::uint64_t kMiB = 1ULL << 20;

// Speaks the raw protocol on its own channels; the master runs inline.
class MasterTest : public ::testing::Test {
 protected:
  void SetUp() override {
    FsOptions opts;
    opts.pmem_size = 64 * kMiB;
    opts.threaded = false;
    fs_ = std::move(FileSystem::format(opts)).value();
  }

  Channel& channel(ClientId id) { return fs_->master().attach(id); }
  MetadataStore& md() { return fs_->metadata(); }
  Master& master() { return fs_->master(); }

  static DentryHandle handle_of(const Dentry* d) {
    if (!d) return {};
    return {reinterpret_cast<std::uint64_t>(d), d->key, d->ino};
  }

  Request creat_req(std::string_view path) {
    auto r = md().resolve(path);
    EXPECT_TRUE(r.ok());
    Request q;
    q.op = Opcode::kCreat;
    q.parent = {r->parent->ino, r->parent->generation};
    q.pred = handle_of(r->pred);
    q.mode = 0644;
    q.name = r->leaf;
    return q;
  }

  Request unlink_req(std::string_view path) {
    auto r = md().resolve(path);
    EXPECT_TRUE(r.ok());
    Request q;
    q.op = Opcode::kUnlink;
    q.parent = {r->parent->ino, r->parent->generation};
    q.target = handle_of(r->dentry);
    if (r->target) q.inode = {r->target->ino, r->target->generation};
    q.name = r->leaf;
    return q;
  }

  Request open_req(std::string_view path) {
    Request q;
    q.op = Opcode::kOpen;
    q.flags = kFlagPaths;
    q.name = std::string(path);
    return q;
  }

  Response roundtrip(Channel& ch, Request q) {
    EXPECT_TRUE(ch.post(q).ok());
    while (master().run_once() == 0) {
    }
    return ch.wait_response();
  }

  std::vector<PageRun> lease(Channel& ch, std::uint64_t n) {
    Request q;
    q.op = Opcode::kLeasePages;
    q.count = n;
    const Response r = roundtrip(ch, q);
    EXPECT_EQ(r.status, Errc::kOk);
    EXPECT_LE(r.v[0], 2u);
    std::vector<PageRun> runs;
    for (std::uint64_t i = 0; i < r.v[0]; ++i) runs.push_back({r.v[1 + 2 * i], r.v[2 + 2 * i]});
    return runs;
  }

  std::unique_ptr<FileSystem> fs_;
};

TEST_F(MasterTest, EightCreatsOneBatch) {
  std::vector<Channel*> chans;
  for (ClientId id = 100; id < 108; ++id) chans.push_back(&channel(id));
  for (int i = 0; i < 8; ++i) {
    Request q = creat_req("/f" + std::to_string(i));
    q.seq = 1;
    ASSERT_TRUE(chans[i]->post(q).ok());
  }
  const auto batches = fs_->log().appended_batches();
  const auto fences = fs_->region().counters().fences;
  EXPECT_EQ(master().run_once(), 8u);
  EXPECT_EQ(fs_->log().appended_batches() - batches, 1u);
  EXPECT_EQ(fs_->region().counters().fences - fences, 2u);
  EXPECT_EQ(master().stats().max_batch.load(), 8u);
  for (int i = 0; i < 8; ++i) {
    const Response r = chans[i]->wait_response();
    EXPECT_EQ(r.status, Errc::kOk);
    EXPECT_NE(md().resolve("/f" + std::to_string(i))->target, nullptr);
  }
}

TEST_F(MasterTest, BatchMaxOneIsUnbatched) {
  master().set_batch_max(1);
  std::vector<Channel*> chans;
  for (ClientId id = 100; id < 104; ++id) chans.push_back(&channel(id));
  for (int i = 0; i < 4; ++i) ASSERT_TRUE(chans[i]->post(creat_req("/g" + std::to_string(i))).ok());
  const auto fences = fs_->region().counters().fences;
  for (int i = 0; i < 4; ++i) EXPECT_EQ(master().run_once(), 1u);
  EXPECT_EQ(fs_->region().counters().fences - fences, 8u);
}

TEST_F(MasterTest, DuplicateCreat) {
  Channel& a = channel(100);
  Channel& b = channel(101);
  ASSERT_TRUE(a.post(creat_req("/same")).ok());
  ASSERT_TRUE(b.post(creat_req("/same")).ok());
  const auto entries = fs_->log().appended_entries();
  std::size_t handled = 0;
  while (handled < 2) handled += master().run_once();
  const Response ra = a.wait_response();
  const Response rb = b.wait_response();
  EXPECT_EQ(ra.status, Errc::kOk);
  EXPECT_EQ(rb.status, Errc::kExists);
  EXPECT_EQ(fs_->log().appended_entries() - entries, 1u);
  EXPECT_EQ(md().inode_count(), 2u);
}

TEST_F(MasterTest, UnlinkRace) {
  Channel& a = channel(100);
  ASSERT_EQ(roundtrip(a, creat_req("/victim")).status, Errc::kOk);
  Channel& b = channel(101);
  // Both resolve before either request reaches the master.
  const Request qa = unlink_req("/victim");
  const Request qb = unlink_req("/victim");
  ASSERT_TRUE(a.post(qa).ok());
  ASSERT_TRUE(b.post(qb).ok());
  std::size_t handled = 0;
  while (handled < 2) handled += master().run_once();
  const Errc sa = a.wait_response().status;
  const Errc sb = b.wait_response().status;
  EXPECT_EQ((sa == Errc::kOk) + (sb == Errc::kOk), 1);
  EXPECT_EQ((sa == Errc::kNotFound) + (sb == Errc::kNotFound), 1);
  EXPECT_EQ(md().resolve("/victim")->target, nullptr);
}

TEST_F(MasterTest, ForgedHandleRejected) {
  Channel& a = channel(100);
  ASSERT_EQ(roundtrip(a, creat_req("/real")).status, Errc::kOk);
  Request q = unlink_req("/real");
  q.target.node = 0x1234;  // not a dentry
  EXPECT_EQ(roundtrip(a, q).status, Errc::kNotFound);
  EXPECT_NE(md().resolve("/real")->target, nullptr);
}

TEST_F(MasterTest, OpenTwiceSharesRing) {
  Channel& a = channel(100);
  Channel& b = channel(101);
  ASSERT_EQ(roundtrip(a, creat_req("/f")).status, Errc::kOk);
  const Response ra = roundtrip(a, open_req("/f"));
  const Response rb = roundtrip(b, open_req("/f"));
  ASSERT_EQ(ra.status, Errc::kOk);
  ASSERT_EQ(rb.status, Errc::kOk);
  EXPECT_EQ(ra.v[0], rb.v[0]);
  EXPECT_NE(ra.v[2], 0u);
  EXPECT_EQ(ra.v[2], rb.v[2]);
}

TEST_F(MasterTest, LastCloseRetiresRing) {
  Channel& a = channel(100);
  ASSERT_EQ(roundtrip(a, creat_req("/f")).status, Errc::kOk);
  const Response o1 = roundtrip(a, open_req("/f"));
  const Response o2 = roundtrip(a, open_req("/f"));
  ASSERT_EQ(o1.status, Errc::kOk);
  ASSERT_EQ(o2.status, Errc::kOk);
  const Inode* n = md().inode(o1.v[0]);
  ASSERT_NE(n, nullptr);

  Request close;
  close.op = Opcode::kClose;
  close.inode = {o1.v[0], o1.v[1]};
  ASSERT_EQ(roundtrip(a, close).status, Errc::kOk);
  EXPECT_NE(n->ring.load(), nullptr);
  ASSERT_EQ(roundtrip(a, close).status, Errc::kOk);
  EXPECT_EQ(n->ring.load(), nullptr);
  EXPECT_EQ(master().stats().rings_retired.load(), 1u);
}

TEST_F(MasterTest, LeaseIsOneTlbEvent) {
  Channel& a = channel(100);
  const auto before = fs_->region().counters().tlb_flush_events;
  Request q;
  q.op = Opcode::kLeasePages;
  q.count = 1024;
  const Response r = roundtrip(a, q);
  ASSERT_EQ(r.status, Errc::kOk);
  EXPECT_EQ(fs_->region().counters().tlb_flush_events - before, 1u);
  EXPECT_EQ(master().leased_pages(100), 1024u);
  EXPECT_TRUE(fs_->region().permissions().writable_by(r.v[1], 100));
}

TEST_F(MasterTest, ExitReturnsLeases) {
  Channel& a = channel(100);
  const auto free_before = fs_->allocator().free_count();
  auto runs = lease(a, 64);
  ASSERT_FALSE(runs.empty());
  EXPECT_EQ(fs_->allocator().free_count(), free_before - 64);
  Request bye;
  bye.op = Opcode::kClose;
  bye.flags = kFlagExit;
  bye.inode = {~0ULL, 0};
  ASSERT_EQ(roundtrip(a, bye).status, Errc::kOk);
  EXPECT_EQ(master().leased_pages(100), 0u);
  EXPECT_EQ(fs_->allocator().free_count(), free_before);
  EXPECT_FALSE(fs_->region().permissions().writable_by(runs[0].page_no, 100));
}

TEST_F(MasterTest, WriteCommitRevokesBeforeLogFence) {
  Channel& a = channel(100);
  ASSERT_EQ(roundtrip(a, creat_req("/w")).status, Errc::kOk);
  const Response o = roundtrip(a, open_req("/w"));
  ASSERT_EQ(o.status, Errc::kOk);
  auto* ring = reinterpret_cast<LockRing*>(o.v[2]);
  auto runs = lease(a, 3);
  const auto pages = pages_from_runs(runs);
  ASSERT_EQ(pages.size(), 3u);

  std::vector<std::byte> data(3 * kPageSize, std::byte{0x77});
  for (std::size_t i = 0; i < 3; ++i) {
    auto s = fs_->region().checked_store(Actor::client(100), fs_->region().layout().page_addr(pages[i]),
                                         std::span(data.data() + i * kPageSize, kPageSize));
    ASSERT_TRUE(s.ok());
  }
  auto grant = ring->acquire(0, 3 * kPageSize);
  ASSERT_TRUE(grant.ok());

  Request q;
  q.op = Opcode::kWriteCommit;
  q.inode = {o.v[0], o.v[1]};
  q.offset = 0;
  q.size = 3 * kPageSize;
  q.version = grant->version;
  q.runs = runs;
  int writable_at_fence = 0, fences = 0;
  fs_->region().set_fence_observer([&](FencePhase phase) {
    if (phase != FencePhase::kBefore) return;
    ++fences;
    for (std::uint64_t p : pages) writable_at_fence += fs_->region().permissions().writable_by(p, 100);
  });
  const Response r = roundtrip(a, q);
  fs_->region().set_fence_observer(nullptr);
  ASSERT_EQ(r.status, Errc::kOk);
  EXPECT_GE(fences, 1);
  EXPECT_EQ(writable_at_fence, 0);

  const Inode* n = md().inode(o.v[0]);
  ASSERT_NE(n, nullptr);
  EXPECT_EQ(n->size.load(), 3 * kPageSize);
  const MappingItem i0 = decode_item(n->map->load(0));
  const MappingItem i1 = decode_item(n->map->load(1));
  const MappingItem i2 = decode_item(n->map->load(2));
  EXPECT_TRUE(i0.start && !i0.end);
  EXPECT_TRUE(!i1.start && !i1.end);
  EXPECT_TRUE(!i2.start && i2.end);
  EXPECT_EQ(i0.version, grant->version);
  EXPECT_EQ(i1.version, grant->version);
  EXPECT_EQ(i2.version, grant->version);
  EXPECT_EQ(fs_->allocator().state(pages[0]), PageState::kCommitted);
  // The master released the lock on the writer's behalf.
  EXPECT_EQ(ring->release(grant->version).error(), Errc::kStaleRelease);
  // Committed pages are read-only again.
  auto fault = fs_->region().checked_store(Actor::client(100), fs_->region().layout().page_addr(pages[0]),
                                           std::span(data.data(), 1));
  ASSERT_FALSE(fault.ok());
  EXPECT_EQ(fault.error().reason, FaultReason::kReadOnlyPage);
}

TEST_F(MasterTest, WriteCitingForeignPages) {
  Channel& owner = channel(100);
  Channel& thief = channel(101);
  ASSERT_EQ(roundtrip(thief, creat_req("/w")).status, Errc::kOk);
  const Response o = roundtrip(thief, open_req("/w"));
  ASSERT_EQ(o.status, Errc::kOk);
  auto* ring = reinterpret_cast<LockRing*>(o.v[2]);
  auto runs = lease(owner, 1);
  auto grant = ring->acquire(0, kPageSize);
  ASSERT_TRUE(grant.ok());

  Request q;
  q.op = Opcode::kWriteCommit;
  q.inode = {o.v[0], o.v[1]};
  q.offset = 0;
  q.size = 100;
  q.version = grant->version;
  q.runs = runs;
  const auto entries = fs_->log().appended_entries();
  const Response r = roundtrip(thief, q);
  EXPECT_EQ(r.status, Errc::kLeaseViolation);
  EXPECT_EQ(master().stats().protection_events.load(), 1u);
  EXPECT_EQ(fs_->log().appended_entries(), entries);
  const Inode* n = md().inode(o.v[0]);
  EXPECT_EQ(n->size.load(), 0u);
  EXPECT_TRUE(n->map->load(0).is_hole());
  EXPECT_EQ(fs_->allocator().state(runs[0].page_no), PageState::kLeased);
  EXPECT_TRUE(fs_->region().permissions().writable_by(runs[0].page_no, 100));
}

TEST_F(MasterTest, WriteWithWrongPageCount) {
  Channel& a = channel(100);
  ASSERT_EQ(roundtrip(a, creat_req("/w")).status, Errc::kOk);
  const Response o = roundtrip(a, open_req("/w"));
  auto runs = lease(a, 2);
  Request q;
  q.op = Opcode::kWriteCommit;
  q.inode = {o.v[0], o.v[1]};
  q.offset = 10;
  q.size = 10;
  q.version = 1;
  q.runs = runs;
  EXPECT_EQ(roundtrip(a, q).status, Errc::kInvalidArgument);
}

TEST_F(MasterTest, WriteWithoutOpenFile) {
  Channel& a = channel(100);
  ASSERT_EQ(roundtrip(a, creat_req("/w")).status, Errc::kOk);
  const Inode* n = md().resolve("/w")->target;
  auto runs = lease(a, 1);
  Request q;
  q.op = Opcode::kWriteCommit;
  q.inode = {n->ino, n->generation};
  q.size = 1;
  q.version = 1;
  q.runs = runs;
  EXPECT_EQ(roundtrip(a, q).status, Errc::kBadFd);
}

TEST_F(MasterTest, RenameOntoLiveName) {
  Channel& a = channel(100);
  ASSERT_EQ(roundtrip(a, creat_req("/x")).status, Errc::kOk);
  ASSERT_EQ(roundtrip(a, creat_req("/y")).status, Errc::kOk);
  Request q;
  q.op = Opcode::kRename;
  q.flags = kFlagPaths;
  q.name = "/x";
  q.name2 = "/y";
  EXPECT_EQ(roundtrip(a, q).status, Errc::kExists);
  q.name2 = "/z";
  EXPECT_EQ(roundtrip(a, q).status, Errc::kOk);
  EXPECT_EQ(md().resolve("/x")->target, nullptr);
  EXPECT_NE(md().resolve("/z")->target, nullptr);
}

TEST_F(MasterTest, CheckpointOnLogFull) {
  FsOptions opts;
  opts.pmem_size = 16 * kMiB;
  opts.threaded = false;
  opts.master.checkpoint_fill = 2.0;  // never proactively
  opts.master.checkpoint_entries = ~0ULL;
  // A small log next to a roomy metadata area, so the log fills first.
  opts.region.metadata_fraction = 0.5;
  opts.region.oplog_fraction = 1.0 / 64;
  fs_ = std::move(FileSystem::format(opts)).value();
  Channel& a = channel(100);
  const std::string pad(100, 'p');
  int made = 0;
  for (; made < 20000; ++made) {
    const Response r = roundtrip(a, creat_req("/" + pad + std::to_string(made)));
    ASSERT_EQ(r.status, Errc::kOk) << made;
    if (master().stats().checkpoints.load() > 1) break;
  }
  EXPECT_GT(master().stats().checkpoints.load(), 1u);
  EXPECT_EQ(md().inode_count(), static_cast<std::uint64_t>(made) + 2);
}

}  // namespace
}  // namespace kucofs
