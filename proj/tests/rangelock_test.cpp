#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <random>
#include <thread>
#include <vector>

#include "kucofs/rangelock.hpp"

namespace kucofs {
namespace {

using namespace std::chrono_literals;

constexpr std::uint64_t kLong = 10'000'000'000ULL;  // 10 s

ChecksumKey test_key() {
  ChecksumKey k{};
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = static_cast<std::uint8_t>(i * 17 + 3);
  return k;
}

TEST(LockRing, VersionPicksSlot) {
  LockRing ring(test_key(), 9);
  auto g = ring.acquire(0, 4096, kLong);
  ASSERT_TRUE(g.ok());
  EXPECT_EQ(g->version, 10u);
  EXPECT_EQ(g->slot, 2u);
  EXPECT_TRUE(ring.release(g->version).ok());
}

TEST(LockRing, DisjointRangesHeldTogether) {
  LockRing ring(test_key());
  auto a = ring.acquire(0, 4096, kLong);
  auto b = ring.acquire(4096, 4096, kLong);
  ASSERT_TRUE(a.ok());
  ASSERT_TRUE(b.ok());
  EXPECT_EQ(static_cast<SlotState>(ring.slots()[a->slot].state.load()), SlotState::kActive);
  EXPECT_EQ(static_cast<SlotState>(ring.slots()[b->slot].state.load()), SlotState::kActive);
  EXPECT_EQ(ring.stats().conflict_waits, 0u);
  EXPECT_TRUE(ring.release(a->version).ok());
  EXPECT_TRUE(ring.release(b->version).ok());
}

TEST(LockRing, OverlapWaitsForRelease) {
  LockRing ring(test_key());
  auto first = ring.acquire(0, 4096, kLong);
  ASSERT_TRUE(first.ok());

  std::atomic<bool> granted{false};
  std::thread second([&] {
    auto g = ring.acquire(100, 10, kLong);
    ASSERT_TRUE(g.ok());
    granted = true;
    EXPECT_TRUE(ring.release(g->version).ok());
  });
  std::this_thread::sleep_for(50ms);
  EXPECT_FALSE(granted.load());
  EXPECT_TRUE(ring.release(first->version).ok());
  second.join();
  EXPECT_TRUE(granted.load());
  EXPECT_EQ(ring.stats().lease_expiries, 0u);
}

TEST(LockRing, ReleaseTwice) {
  LockRing ring(test_key());
  auto g = ring.acquire(0, 1, kLong);
  ASSERT_TRUE(g.ok());
  EXPECT_TRUE(ring.release(g->version).ok());
  auto again = ring.release(g->version);
  ASSERT_FALSE(again.ok());
  EXPECT_EQ(again.error(), Errc::kStaleRelease);
  EXPECT_EQ(ring.stats().stale_releases, 1u);
}

TEST(LockRing, ZeroSizeRejected) {
  LockRing ring(test_key());
  auto g = ring.acquire(0, 0, kLong);
  ASSERT_FALSE(g.ok());
  EXPECT_EQ(g.error(), Errc::kInvalidArgument);
}

TEST(LockRing, AbandonedHolderExpires) {
  LockRing ring(test_key());
  const std::uint64_t lease = 30'000'000;  // 30 ms
  auto dead = ring.acquire(0, 4096, lease);
  ASSERT_TRUE(dead.ok());
  const auto t0 = std::chrono::steady_clock::now();
  auto g = ring.acquire(0, 4096, kLong);
  const auto waited = std::chrono::steady_clock::now() - t0;
  ASSERT_TRUE(g.ok());
  EXPECT_GE(waited, 20ms);
  EXPECT_EQ(ring.stats().lease_expiries, 1u);
}

TEST(LockRing, SlotReuseWaitsForOldHolder) {
  LockRing ring(test_key(), 0, 2);
  auto a = ring.acquire(0, 1, kLong);     // v1, slot 1
  auto b = ring.acquire(10, 1, kLong);    // v2, slot 0
  ASSERT_TRUE(a.ok());
  ASSERT_TRUE(b.ok());
  std::atomic<bool> granted{false};
  std::thread c([&] {
    auto g = ring.acquire(20, 1, kLong);  // v3 needs slot 1
    ASSERT_TRUE(g.ok());
    granted = true;
  });
  std::this_thread::sleep_for(30ms);
  EXPECT_FALSE(granted.load());
  EXPECT_TRUE(ring.release(a->version).ok());
  c.join();
  EXPECT_TRUE(granted.load());
}

TEST(SlotChecksum, Validation) {
  LockRing ring(test_key());
  const LockSlot& untouched = ring.slots()[5];
  EXPECT_TRUE(validate_slot(untouched, test_key()));

  auto g = ring.acquire(4096, 8192, kLong);
  ASSERT_TRUE(g.ok());
  LockSlot& slot = ring.slots()[g->slot];
  EXPECT_TRUE(validate_slot(slot, test_key()));
  ChecksumKey other = test_key();
  other[0] ^= 1;
  EXPECT_FALSE(validate_slot(slot, other));

  slot.size.fetch_xor(1ULL << 12);
  EXPECT_FALSE(validate_slot(slot, test_key()));
  slot.size.fetch_xor(1ULL << 12);
  EXPECT_TRUE(validate_slot(slot, test_key()));
}

TEST(SlotChecksum, RandomForgeriesFail) {
  const ChecksumKey key = test_key();
  std::mt19937_64 rng(99);
  LockSlot slot;
  slot.state.store(static_cast<std::uint8_t>(SlotState::kActive));
  int passes = 0;
  for (int i = 0; i < 1'000'000; ++i) {
    slot.offset.store(rng());
    slot.size.store(rng());
    slot.lease.store(rng());
    slot.checksum.store(rng());
    passes += validate_slot(slot, key);
  }
  EXPECT_EQ(passes, 0);
}

TEST(SlotChecksum, ForgedSlotCannotStallPastOwnLease) {
  LockRing ring(test_key());
  auto g = ring.acquire(0, 4096, kLong);
  ASSERT_TRUE(g.ok());
  // Rewrite the holder's slot with a far-future lease and no valid checksum.
  LockSlot& slot = ring.slots()[g->slot];
  slot.lease.store(~0ULL);
  const auto t0 = std::chrono::steady_clock::now();
  auto next = ring.acquire(0, 4096, 40'000'000);
  ASSERT_TRUE(next.ok());
  EXPECT_LT(std::chrono::steady_clock::now() - t0, 5s);
  EXPECT_GE(ring.stats().corrupt_slots, 1u);
}

// Writers take random ranges over a 64-cell array. Each cell counts holders;
// overlap would show a count above one.
TEST(LockRing, MutualExclusionStress) {
  LockRing ring(test_key());
  constexpr int kCells = 64;
  std::array<std::atomic<int>, kCells> cells{};
  std::atomic<int> violations{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 6; ++t) {
    threads.emplace_back([&, t] {
      std::mt19937_64 rng(t + 1);
      for (int i = 0; i < 3000; ++i) {
        const std::uint64_t off = rng() % kCells;
        const std::uint64_t len = 1 + rng() % std::min<std::uint64_t>(8, kCells - off);
        auto g = ring.acquire(off, len, kLong);
        ASSERT_TRUE(g.ok());
        for (std::uint64_t c = off; c < off + len; ++c) {
          if (cells[c].fetch_add(1) != 0) violations.fetch_add(1);
        }
        if (i % 16 == 0) std::this_thread::yield();
        for (std::uint64_t c = off; c < off + len; ++c) cells[c].fetch_sub(1);
        ASSERT_TRUE(ring.release(g->version).ok());
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(violations.load(), 0);
  EXPECT_EQ(ring.stats().lease_expiries, 0u);
  EXPECT_EQ(ring.stats().acquires, 6u * 3000u);
}

}  // namespace
}  // namespace kucofs
