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

// Client <-> master message rings. Each client owns one channel: a 64-slot
// ring of 256-byte request slots and a 64-slot ring of 64-byte response
// slots, both single-producer/single-consumer.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kucofs/pmem.hpp"
#include "kucofs/status.hpp"

namespace kucofs {

enum class Opcode : std::uint8_t {
  kOpen = 1,
  kCreat,
  kMkdir,
  kUnlink,
  kRmdir,
  kRename,
  kWriteCommit,
  kLeasePages,
  kClose,
  kReadFallback,
  kRegister,
};

std::string_view opcode_name(Opcode op);

inline constexpr std::uint32_t kFlagCreate = 1;
inline constexpr std::uint32_t kFlagExclusive = 2;
inline constexpr std::uint32_t kFlagPaths = 4;  // names carry full paths; the master resolves them
inline constexpr std::uint32_t kFlagExit = 8;

inline constexpr std::size_t kRingSlots = 64;
inline constexpr std::size_t kRequestSlot = 256;
inline constexpr std::size_t kResponseSlot = 64;
inline constexpr std::size_t kRequestHeader = 16;
inline constexpr std::size_t kMaxRequestSlots = 4;
inline constexpr std::size_t kMaxRequestPayload = kMaxRequestSlots * kRequestSlot - kRequestHeader;
inline constexpr std::size_t kInlineRuns = 16;

/// Address of a dentry as seen by the client plus echoes of its fields.
struct DentryHandle {
  std::uint64_t node = 0;
  std::uint64_t key = 0;
  std::uint64_t ino = 0;
  bool operator==(const DentryHandle&) const = default;
};

struct InodeHandle {
  std::uint64_t ino = 0;
  std::uint64_t gen = 0;
  bool operator==(const InodeHandle&) const = default;
};

struct Request {
  Opcode op = Opcode::kRegister;
  std::uint64_t seq = 0;
  ClientId client = 0;
  std::uint32_t flags = 0;
  InodeHandle parent;
  InodeHandle parent2;
  InodeHandle inode;
  DentryHandle pred;
  DentryHandle pred2;
  DentryHandle target;
  std::uint32_t mode = 0;
  std::uint64_t offset = 0;
  std::uint64_t size = 0;
  std::uint64_t version = 0;
  std::uint64_t count = 0;
  std::uint64_t buffer = 0;
  std::uint64_t scratch_page = 0;
  std::string name;
  std::string name2;
  std::vector<PageRun> runs;

  bool operator==(const Request&) const = default;
};

struct Response {
  std::uint64_t seq = 0;
  Errc status = Errc::kOk;
  std::uint64_t v[5] = {};
};

/// Encodes into whole request slots. kNameTooLong if the payload needs more
/// than kMaxRequestSlots; kInvalidArgument if more than kInlineRuns runs are
/// inlined.
Result<std::vector<std::byte>> encode_request(const Request& req);
Result<Request> decode_request(std::span<const std::byte> slots);
/// Slot count recorded in an encoded request header.
std::size_t request_slots(std::span<const std::byte> first_slot);

void encode_response(const Response& resp, std::span<std::byte, kResponseSlot> out);
Response decode_response(std::span<const std::byte, kResponseSlot> in);

/// Wakes the master when requests arrive. Clients ring once per posted
/// request; the master can sleep until a number of requests is available.
class Doorbell {
 public:
  void ring();
  std::uint64_t rings() const { return rings_.load(std::memory_order_acquire); }
  /// Waits until rings() >= target or the timeout passes. Returns whether
  /// the target was met.
  bool wait_until(std::uint64_t target, std::chrono::microseconds timeout);
  /// Wakes a sleeping master regardless of the target (shutdown).
  void kick();

 private:
  std::atomic<std::uint64_t> rings_{0};
  std::atomic<bool> sleeping_{false};
  std::uint64_t target_ = 0;
  bool kicked_ = false;
  std::mutex mu_;
  std::condition_variable cv_;
};

class Channel {
 public:
  Channel(ClientId id, Doorbell& bell);
  Channel(const Channel&) = delete;
  Channel& operator=(const Channel&) = delete;

  ClientId id() const { return id_; }

  // client side
  Status post(const Request& req);
  /// Blocks for the next response. `pump`, when set, is called instead of
  /// sleeping (inline master).
  Response wait_response(const std::function<void()>& pump = {});

  // master side
  const Request* peek();
  void pop();
  void respond(const Response& resp);

  std::uint64_t posted() const { return posted_.load(std::memory_order_relaxed); }
  std::uint64_t answered() const { return answered_.load(std::memory_order_relaxed); }

 private:
  ClientId id_;
  Doorbell& bell_;
  std::unique_ptr<std::byte[]> req_;
  std::unique_ptr<std::byte[]> resp_;
  alignas(64) std::atomic<std::uint64_t> req_tail_{0};
  alignas(64) std::atomic<std::uint64_t> req_head_{0};
  alignas(64) std::atomic<std::uint64_t> resp_tail_{0};
  alignas(64) std::atomic<std::uint64_t> resp_head_{0};
  std::optional<Request> peeked_;
  std::size_t peeked_slots_ = 0;
  std::atomic<std::uint64_t> posted_{0};
  std::atomic<std::uint64_t> answered_{0};
};

}  // namespace kucofs
