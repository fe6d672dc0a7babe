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

// Direct-access range lock: a per-file ring of lock slots living in memory
// that every writer of the file can modify. Writers coordinate among
// themselves through atomic loads and stores; the master never takes part.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <span>

#include "kucofs/hash.hpp"
#include "kucofs/status.hpp"

namespace kucofs {

inline constexpr std::uint32_t kDefaultRingSlots = 8;
inline constexpr std::uint64_t kDefaultLeaseNs = 100'000'000;  // 100 ms

enum class SlotState : std::uint8_t { kFree = 0, kActive = 1, kReleased = 2 };

/// One cacheline. Byte layout:
///   0: state u8 | 1..7: pad | 8: offset | 16: size | 24: lease |
///   32: version | 40: checksum | 48..63: pad
struct alignas(64) LockSlot {
  std::atomic<std::uint8_t> state{0};
  std::atomic<std::uint64_t> offset{0};
  std::atomic<std::uint64_t> size{0};
  std::atomic<std::uint64_t> lease{0};  // steady-clock deadline, ns
  std::atomic<std::uint64_t> version{0};
  std::atomic<std::uint64_t> checksum{0};
};
static_assert(sizeof(LockSlot) == 64);

/// Keyed hash over (ACTIVE, offset, size, lease).
std::uint64_t slot_checksum(const ChecksumKey& key, std::uint64_t offset, std::uint64_t size, std::uint64_t lease);
/// True for any slot that is not ACTIVE, or ACTIVE with a matching checksum.
bool validate_slot(const LockSlot& slot, const ChecksumKey& key);

std::uint64_t monotonic_ns();

struct LockGrant {
  std::uint64_t version = 0;
  std::uint32_t slot = 0;
};

struct LockRingStats {
  std::uint64_t acquires = 0;
  std::uint64_t releases = 0;
  std::uint64_t stale_releases = 0;
  std::uint64_t corrupt_slots = 0;
  std::uint64_t lease_expiries = 0;  // waits ended by a lease deadline
  std::uint64_t conflict_waits = 0;  // acquires that had to wait on an overlap
};

class LockRing {
 public:
  /// Versions handed out start at `initial_version + 1`.
  explicit LockRing(ChecksumKey key, std::uint64_t initial_version = 0, std::uint32_t slots = kDefaultRingSlots);

  LockRing(const LockRing&) = delete;
  LockRing& operator=(const LockRing&) = delete;

  /// Blocks until [offset, offset + size) is free of every earlier
  /// overlapping holder.
  Result<LockGrant> acquire(std::uint64_t offset, std::uint64_t size, std::uint64_t lease_ns = kDefaultLeaseNs);
  Status release(std::uint64_t version);

  std::uint64_t current_version() const { return version_.load(std::memory_order_acquire); }
  std::uint64_t initial_version() const { return initial_version_; }
  std::uint32_t slot_count() const { return slot_count_; }
  std::span<LockSlot> slots() { return {slots_.get(), slot_count_}; }
  std::span<const LockSlot> slots() const { return {slots_.get(), slot_count_}; }
  LockRingStats stats() const;

 private:
  LockSlot& slot_of(std::uint64_t version) { return slots_[version % slot_count_]; }
  void wait_for_reuse(LockSlot& slot, std::uint64_t previous, std::uint64_t lease_ns);
  void wait_for_conflict(LockSlot& slot, std::uint64_t version, std::uint64_t offset, std::uint64_t size,
                         std::uint64_t lease_ns);

  const ChecksumKey key_;
  const std::uint64_t initial_version_;
  const std::uint32_t slot_count_;
  std::unique_ptr<LockSlot[]> slots_;
  alignas(64) std::atomic<std::uint64_t> version_;

  std::atomic<std::uint64_t> acquires_{0};
  std::atomic<std::uint64_t> releases_{0};
  std::atomic<std::uint64_t> stale_releases_{0};
  std::atomic<std::uint64_t> corrupt_slots_{0};
  std::atomic<std::uint64_t> lease_expiries_{0};
  std::atomic<std::uint64_t> conflict_waits_{0};
};

}  // namespace kucofs
