#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <random>
#include <vector>

#include "kucofs/filesystem.hpp"

namespace kucofs {
namespace {

constexpr std::uint64_t kMiB = 1ULL << 20;

std::vector<std::byte> pattern(std::size_t n, std::uint8_t seed) {
  std::vector<std::byte> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<std::byte>((i * 131 + seed) & 0xff);
  return v;
}

// Plain FNV-1a, written out here so the expected directory order does not
// come from the code under test.
std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

class UlibTest : public ::testing::Test {
 protected:
  void SetUp() override { make_fs(true); }

  void make_fs(bool offload) {
    client_.reset();
    fs_.reset();
    FsOptions opts;
    opts.pmem_size = 64 * kMiB;
    opts.threaded = false;
    opts.client.offload = offload;
    fs_ = std::move(FileSystem::format(opts)).value();
    client_ = fs_->connect();
  }

  Client& c() { return *client_; }
  std::uint64_t messages() const { return client_->stats().messages; }

  std::vector<std::byte> read_all(int fd, std::uint64_t size) {
    std::vector<std::byte> out(size);
    auto n = c().pread(fd, out, 0);
    EXPECT_TRUE(n.ok());
    out.resize(n.ok() ? *n : 0);
    return out;
  }

  std::unique_ptr<FileSystem> fs_;
  std::unique_ptr<Client> client_;
};

TEST_F(UlibTest, DescriptorsStartAboveKernelRange) {
  auto fd = c().creat("/a");
  ASSERT_TRUE(fd.ok());
  EXPECT_GE(*fd, 1 << 20);
  auto fd2 = c().creat("/b");
  ASSERT_TRUE(fd2.ok());
  EXPECT_NE(*fd, *fd2);
}

TEST_F(UlibTest, OpenMissingSendsNothing) {
  const auto before = messages();
  auto fd = c().open("/nope");
  ASSERT_FALSE(fd.ok());
  EXPECT_EQ(fd.error(), Errc::kNotFound);
  EXPECT_EQ(messages(), before);
}

TEST_F(UlibTest, CreateIsOneRoundTrip) {
  const auto before = messages();
  auto fd = c().open("/x", kOpenCreate);
  ASSERT_TRUE(fd.ok());
  EXPECT_EQ(messages(), before + 1);
  EXPECT_EQ(c().stats().sent(Opcode::kOpen), 1u);

  auto again = c().open("/x", kOpenCreate | kOpenExclusive);
  ASSERT_FALSE(again.ok());
  EXPECT_EQ(again.error(), Errc::kExists);
  EXPECT_EQ(messages(), before + 1);
}

TEST_F(UlibTest, CopyOnWriteInsidePage) {
  auto fd = c().creat("/f");
  ASSERT_TRUE(fd.ok());
  const auto base = pattern(8192, 1);
  ASSERT_EQ(*c().pwrite(*fd, base, 0), base.size());
  const auto patch = pattern(100, 77);
  ASSERT_EQ(*c().pwrite(*fd, patch, 50), 100u);

  std::vector<std::byte> expect = base;
  std::copy(patch.begin(), patch.end(), expect.begin() + 50);
  EXPECT_EQ(read_all(*fd, 8192), expect);
  EXPECT_EQ(c().fstat(*fd)->size, 8192u);
}

TEST_F(UlibTest, EmptyWriteSendsNothing) {
  auto fd = c().creat("/f");
  ASSERT_TRUE(fd.ok());
  const auto before = messages();
  auto n = c().pwrite(*fd, std::span<const std::byte>{}, 1000);
  ASSERT_TRUE(n.ok());
  EXPECT_EQ(*n, 0u);
  EXPECT_EQ(messages(), before);
  EXPECT_EQ(c().fstat(*fd)->size, 0u);
}

TEST_F(UlibTest, ReadsSendNothing) {
  auto fd = c().creat("/f");
  ASSERT_TRUE(fd.ok());
  const auto data = pattern(20000, 3);
  ASSERT_TRUE(c().pwrite(*fd, data, 0).ok());
  const auto before = messages();
  std::vector<std::byte> out(20000);
  for (int i = 0; i < 50; ++i) ASSERT_EQ(*c().pread(*fd, out, 0), 20000u);
  EXPECT_EQ(out, data);
  EXPECT_EQ(messages(), before);
  EXPECT_EQ(c().stats().fallback_reads, 0u);
}

TEST_F(UlibTest, ReadAtAndPastEof) {
  auto fd = c().creat("/f");
  ASSERT_TRUE(fd.ok());
  const auto data = pattern(100, 5);
  ASSERT_TRUE(c().pwrite(*fd, data, 0).ok());
  std::vector<std::byte> out(64);
  EXPECT_EQ(*c().pread(*fd, out, 100), 0u);
  EXPECT_EQ(*c().pread(*fd, out, 5000), 0u);
  EXPECT_EQ(*c().pread(*fd, out, 80), 20u);
}

TEST_F(UlibTest, HoleReadsAsZeros) {
  auto fd = c().creat("/f");
  ASSERT_TRUE(fd.ok());
  const auto tail = pattern(10, 9);
  ASSERT_TRUE(c().pwrite(*fd, tail, 3 * kPageSize + 5).ok());
  std::vector<std::byte> out(3 * kPageSize + 15);
  ASSERT_EQ(*c().pread(*fd, out, 0), out.size());
  for (std::size_t i = 0; i < 3 * kPageSize + 5; ++i) ASSERT_EQ(out[i], std::byte{0}) << i;
  EXPECT_TRUE(std::equal(tail.begin(), tail.end(), out.begin() + 3 * kPageSize + 5));
}

TEST_F(UlibTest, CursorReadWrite) {
  auto fd = c().creat("/f");
  ASSERT_TRUE(fd.ok());
  const auto a = pattern(300, 1), b = pattern(200, 2);
  ASSERT_TRUE(c().write(*fd, a).ok());
  ASSERT_TRUE(c().write(*fd, b).ok());
  ASSERT_TRUE(c().seek(*fd, 0).ok());
  std::vector<std::byte> out(500);
  ASSERT_EQ(*c().read(*fd, out), 500u);
  EXPECT_TRUE(std::equal(a.begin(), a.end(), out.begin()));
  EXPECT_TRUE(std::equal(b.begin(), b.end(), out.begin() + 300));
  EXPECT_EQ(*c().read(*fd, out), 0u);
}

TEST_F(UlibTest, LargeWriteIsSplit) {
  auto fd = c().creat("/big");
  ASSERT_TRUE(fd.ok());
  const auto data = pattern(kMaxWriteChunk + 5000, 4);
  const auto before = c().stats().sent(Opcode::kWriteCommit);
  ASSERT_EQ(*c().pwrite(*fd, data, 0), data.size());
  EXPECT_EQ(c().stats().sent(Opcode::kWriteCommit), before + 2);
  EXPECT_EQ(read_all(*fd, data.size()), data);
}

TEST_F(UlibTest, CloseTwice) {
  auto fd = c().creat("/f");
  ASSERT_TRUE(fd.ok());
  EXPECT_TRUE(c().close(*fd).ok());
  auto again = c().close(*fd);
  ASSERT_FALSE(again.ok());
  EXPECT_EQ(again.error(), Errc::kBadFd);
  std::vector<std::byte> out(4);
  EXPECT_EQ(c().pread(*fd, out, 0).error(), Errc::kBadFd);
  EXPECT_EQ(c().close(12).error(), Errc::kBadFd);
}

TEST_F(UlibTest, ReaddirOrder) {
  ASSERT_TRUE(c().mkdir("/d").ok());
  std::vector<std::string> names;
  for (int i = 0; i < 40; ++i) names.push_back("entry-" + std::to_string(i * 7919 % 1000));
  for (const auto& n : names) ASSERT_TRUE(c().mknod("/d/" + n).ok());
  std::sort(names.begin(), names.end(), [](const std::string& a, const std::string& b) {
    const auto ha = fnv1a(a), hb = fnv1a(b);
    return ha != hb ? ha < hb : a < b;
  });
  auto got = c().readdir("/d");
  ASSERT_TRUE(got.ok());
  EXPECT_EQ(*got, names);
  EXPECT_EQ(c().readdir("/missing").error(), Errc::kNotFound);
  EXPECT_EQ(c().readdir("/d/" + names[0]).error(), Errc::kNotADirectory);
}

TEST_F(UlibTest, StatRoot) {
  auto st = c().stat("/");
  ASSERT_TRUE(st.ok());
  EXPECT_EQ(st->kind, InodeKind::kDir);
}

TEST_F(UlibTest, UnlinkThenStat) {
  ASSERT_TRUE(c().mknod("/f").ok());
  ASSERT_TRUE(c().stat("/f").ok());
  ASSERT_TRUE(c().unlink("/f").ok());
  EXPECT_EQ(c().stat("/f").error(), Errc::kNotFound);
  EXPECT_EQ(c().unlink("/f").error(), Errc::kNotFound);
}

TEST_F(UlibTest, DirectoryErrors) {
  ASSERT_TRUE(c().mkdir("/d").ok());
  ASSERT_TRUE(c().mknod("/d/f").ok());
  EXPECT_EQ(c().rmdir("/d").error(), Errc::kNotEmpty);
  EXPECT_EQ(c().mkdir("/d").error(), Errc::kExists);
  EXPECT_EQ(c().mknod("/nope/f").error(), Errc::kNotFound);
  EXPECT_EQ(c().open("/d").error(), Errc::kIsADirectory);
  ASSERT_TRUE(c().unlink("/d/f").ok());
  EXPECT_TRUE(c().rmdir("/d").ok());
  EXPECT_EQ(c().stat("/d").error(), Errc::kNotFound);
}

TEST_F(UlibTest, RenameMovesData) {
  ASSERT_TRUE(c().mkdir("/a").ok());
  ASSERT_TRUE(c().mkdir("/b").ok());
  auto fd = c().creat("/a/f");
  ASSERT_TRUE(fd.ok());
  const auto data = pattern(5000, 8);
  ASSERT_TRUE(c().pwrite(*fd, data, 0).ok());
  ASSERT_TRUE(c().close(*fd).ok());
  ASSERT_TRUE(c().rename("/a/f", "/b/g").ok());
  EXPECT_EQ(c().stat("/a/f").error(), Errc::kNotFound);
  auto fd2 = c().open("/b/g");
  ASSERT_TRUE(fd2.ok());
  EXPECT_EQ(read_all(*fd2, 5000), data);
}

TEST_F(UlibTest, PathModeMatchesOffload) {
  make_fs(false);
  ASSERT_TRUE(c().mkdir("/d").ok());
  auto fd = c().creat("/d/f");
  ASSERT_TRUE(fd.ok());
  const auto data = pattern(3000, 6);
  ASSERT_TRUE(c().pwrite(*fd, data, 10).ok());
  EXPECT_EQ(c().stat("/d/f")->size, 3010u);
  EXPECT_EQ(c().open("/d/none").error(), Errc::kNotFound);
  EXPECT_EQ(c().rmdir("/d").error(), Errc::kNotEmpty);
  ASSERT_TRUE(c().unlink("/d/f").ok());
  EXPECT_TRUE(c().rmdir("/d").ok());
}

TEST_F(UlibTest, ExitReturnsPages) {
  auto fd = c().creat("/f");
  ASSERT_TRUE(fd.ok());
  ASSERT_TRUE(c().pwrite(*fd, pattern(100, 1), 0).ok());
  const auto free_before = fs_->allocator().free_count();
  const auto pooled = c().pool_pages();
  EXPECT_GT(pooled, 0u);
  ASSERT_TRUE(c().exit().ok());
  EXPECT_EQ(fs_->allocator().free_count(), free_before + pooled);
}

// Random overlapping writes checked against a flat byte array.
TEST_F(UlibTest, RandomWritesMatchFlatModel) {
  auto fd = c().creat("/f");
  ASSERT_TRUE(fd.ok());
  constexpr std::uint64_t kSpan = 64 * 1024;
  std::vector<std::byte> model;
  std::mt19937_64 rng(2024);
  std::vector<std::byte> buf;
  for (int i = 0; i < 100'000; ++i) {
    const std::uint64_t off = rng() % kSpan;
    const std::uint64_t len = 1 + rng() % (rng() % 8 == 0 ? 9000 : 300);
    buf.resize(len);
    for (auto& b : buf) b = static_cast<std::byte>(rng());
    ASSERT_EQ(*c().pwrite(*fd, buf, off), len) << i;
    if (model.size() < off + len) model.resize(off + len);
    std::copy(buf.begin(), buf.end(), model.begin() + static_cast<std::ptrdiff_t>(off));

    if (i % 997 == 0) {
      const std::uint64_t roff = rng() % (model.size() + 10);
      std::vector<std::byte> out(rng() % 5000);
      auto n = c().pread(*fd, out, roff);
      ASSERT_TRUE(n.ok());
      const std::uint64_t want = roff >= model.size() ? 0 : std::min<std::uint64_t>(out.size(), model.size() - roff);
      ASSERT_EQ(*n, want) << i;
      ASSERT_TRUE(std::equal(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(want),
                             model.begin() + static_cast<std::ptrdiff_t>(roff)))
          << i;
    }
  }
  EXPECT_EQ(c().fstat(*fd)->size, model.size());
  EXPECT_EQ(read_all(*fd, model.size()), model);
}

}  // namespace
}  // namespace kucofs
