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

#include "kucofs/rangelock.hpp"

#include <algorithm>
#include <array>
#include <thread>

#include "kucofs/codec.hpp"

namespace kucofs {
namespace {

// Spin for roughly a microsecond, then yield on every further round.
class Backoff {
 public:
  void pause() {
    if (spins_ < 64) {
      ++spins_;
#if defined(__x86_64__) || defined(__i386__)
      __builtin_ia32_pause();
#endif
      return;
    }
    std::this_thread::yield();
  }

 private:
  int spins_ = 0;
};

bool overlaps(std::uint64_t a_off, std::uint64_t a_size, std::uint64_t b_off, std::uint64_t b_size) {
  return a_off < b_off + b_size && b_off < a_off + a_size;
}

}  // namespace

std::uint64_t monotonic_ns() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
          .count());
}

std::uint64_t slot_checksum(const ChecksumKey& key, std::uint64_t offset, std::uint64_t size, std::uint64_t lease) {
  std::array<std::byte, 25> buf{};
  buf[0] = std::byte{static_cast<std::uint8_t>(SlotState::kActive)};
  put_u64(buf.data() + 1, offset);
  put_u64(buf.data() + 9, size);
  put_u64(buf.data() + 17, lease);
  return keyed_hash(key, buf);
}

bool validate_slot(const LockSlot& slot, const ChecksumKey& key) {
  // Only an ACTIVE slot makes a claim anyone acts on.
  if (static_cast<SlotState>(slot.state.load(std::memory_order_acquire)) != SlotState::kActive) return true;
  return slot.checksum.load(std::memory_order_acquire) ==
         slot_checksum(key, slot.offset.load(std::memory_order_acquire), slot.size.load(std::memory_order_acquire),
                       slot.lease.load(std::memory_order_acquire));
}

LockRing::LockRing(ChecksumKey key, std::uint64_t initial_version, std::uint32_t slots)
    : key_(key),
      initial_version_(initial_version),
      slot_count_(slots == 0 ? 1 : slots),
      slots_(new LockSlot[slot_count_]),
      version_(initial_version) {}

void LockRing::wait_for_reuse(LockSlot& slot, std::uint64_t previous, std::uint64_t lease_ns) {
  if (previous <= initial_version_) return;
  const std::uint64_t give_up = monotonic_ns() + lease_ns;
  Backoff backoff;
  for (;;) {
    const std::uint64_t v = slot.version.load(std::memory_order_acquire);
    if (v == previous) {
      const auto st = static_cast<SlotState>(slot.state.load(std::memory_order_acquire));
      if (st == SlotState::kReleased) return;
      if (st == SlotState::kActive && monotonic_ns() >= slot.lease.load(std::memory_order_acquire)) {
        lease_expiries_.fetch_add(1, std::memory_order_relaxed);
        return;
      }
    } else if (v > previous) {
      return;
    }
    // The previous holder never published, or is still publishing.
    if (monotonic_ns() >= give_up) {
      lease_expiries_.fetch_add(1, std::memory_order_relaxed);
      return;
    }
    backoff.pause();
  }
}

void LockRing::wait_for_conflict(LockSlot& slot, std::uint64_t version, std::uint64_t offset, std::uint64_t size,
                                 std::uint64_t lease_ns) {
  const std::uint64_t give_up = monotonic_ns() + lease_ns;
  bool waited = false;
  bool corrupt_seen = false;
  Backoff backoff;
  for (;;) {
    const std::uint64_t v = slot.version.load(std::memory_order_acquire);
    if (v > version) break;  // recycled, so `version` is long gone
    if (v == version) {
      const auto st = static_cast<SlotState>(slot.state.load(std::memory_order_acquire));
      if (st == SlotState::kReleased) break;
      if (st == SlotState::kActive) {
        const std::uint64_t o = slot.offset.load(std::memory_order_acquire);
        const std::uint64_t s = slot.size.load(std::memory_order_acquire);
        const std::uint64_t lease = slot.lease.load(std::memory_order_acquire);
        const std::uint64_t sum = slot.checksum.load(std::memory_order_acquire);
        if (slot.version.load(std::memory_order_acquire) != version) break;
        const bool intact = sum == slot_checksum(key_, o, s, lease);
        if (!intact) {
          if (!corrupt_seen) corrupt_slots_.fetch_add(1, std::memory_order_relaxed);
          corrupt_seen = true;
          // A forged lease cannot extend the wait beyond our own lease.
          if (monotonic_ns() >= std::min(lease, give_up)) {
            lease_expiries_.fetch_add(1, std::memory_order_relaxed);
            break;
          }
        } else {
          if (!overlaps(o, s, offset, size)) break;
          if (monotonic_ns() >= lease) {
            lease_expiries_.fetch_add(1, std::memory_order_relaxed);
            break;
          }
        }
      }
      // FREE with our version stamped: the holder is mid-publish.
    }
    if (v < version && monotonic_ns() >= give_up) {
      lease_expiries_.fetch_add(1, std::memory_order_relaxed);
      break;
    }
    if (!waited) {
      waited = true;
      conflict_waits_.fetch_add(1, std::memory_order_relaxed);
    }
    backoff.pause();
  }
}

Result<LockGrant> LockRing::acquire(std::uint64_t offset, std::uint64_t size, std::uint64_t lease_ns) {
  if (size == 0) return Errc::kInvalidArgument;
  const std::uint64_t v = version_.fetch_add(1, std::memory_order_acq_rel) + 1;
  LockSlot& mine = slot_of(v);
  if (v >= slot_count_) wait_for_reuse(mine, v - slot_count_, lease_ns);

  const std::uint64_t lease = monotonic_ns() + lease_ns;
  mine.state.store(static_cast<std::uint8_t>(SlotState::kFree), std::memory_order_release);
  mine.version.store(v, std::memory_order_release);
  mine.offset.store(offset, std::memory_order_release);
  mine.size.store(size, std::memory_order_release);
  mine.lease.store(lease, std::memory_order_release);
  mine.checksum.store(slot_checksum(key_, offset, size, lease), std::memory_order_release);
  mine.state.store(static_cast<std::uint8_t>(SlotState::kActive), std::memory_order_release);
  acquires_.fetch_add(1, std::memory_order_relaxed);

  // Every earlier overlapping holder still in the ring must finish first.
  const std::uint64_t floor = std::max<std::uint64_t>(v >= slot_count_ ? v - slot_count_ + 1 : 1, initial_version_ + 1);
  for (std::uint64_t u = v - 1; u >= floor && u > 0; --u) {
    wait_for_conflict(slot_of(u), u, offset, size, lease_ns);
  }
  return LockGrant{v, static_cast<std::uint32_t>(v % slot_count_)};
}

Status LockRing::release(std::uint64_t version) {
  LockSlot& slot = slot_of(version);
  if (slot.version.load(std::memory_order_acquire) != version ||
      static_cast<SlotState>(slot.state.load(std::memory_order_acquire)) != SlotState::kActive) {
    stale_releases_.fetch_add(1, std::memory_order_relaxed);
    return Errc::kStaleRelease;
  }
  slot.state.store(static_cast<std::uint8_t>(SlotState::kReleased), std::memory_order_release);
  releases_.fetch_add(1, std::memory_order_relaxed);
  return {};
}

LockRingStats LockRing::stats() const {
  return {acquires_.load(std::memory_order_relaxed),       releases_.load(std::memory_order_relaxed),
          stale_releases_.load(std::memory_order_relaxed), corrupt_slots_.load(std::memory_order_relaxed),
          lease_expiries_.load(std::memory_order_relaxed), conflict_waits_.load(std::memory_order_relaxed)};
}

}  // namespace kucofs
