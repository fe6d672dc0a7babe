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

// The single metadata authority. Drains the client channels in batches:
//   1. validate every request against the client supplied handles and build
//      its log record,
//   2. append all records with one persistence round,
//   3. apply the volatile updates in collection order and respond.
// A batch is cut at the first request that touches a resource an earlier
// request of the same batch already holds.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <set>
#include <unordered_map>
#include <vector>

#include "kucofs/hash.hpp"
#include "kucofs/message.hpp"
#include "kucofs/metadata.hpp"
#include "kucofs/oplog.hpp"
#include "kucofs/pmem.hpp"

namespace kucofs {

struct MasterOptions {
  std::size_t batch_max = 64;
  std::uint32_t ring_slots = kDefaultRingSlots;
  double checkpoint_fill = 0.75;
  std::uint64_t checkpoint_entries = 64ULL << 20;
  std::uint64_t housekeeping_requests = 1024;
  std::chrono::microseconds housekeeping_interval{10000};
  /// With k distinct clients answered recently, wait briefly for k requests
  /// before cutting the next batch.
  bool gather = true;
  std::chrono::microseconds gather_timeout{200};
};

struct MasterStats {
  std::atomic<std::uint64_t> requests{0};
  std::atomic<std::uint64_t> batches{0};
  std::atomic<std::uint64_t> max_batch{0};
  std::atomic<std::uint64_t> logged{0};
  std::atomic<std::uint64_t> creats{0};
  std::atomic<std::uint64_t> write_commits{0};
  std::atomic<std::uint64_t> leases{0};
  std::atomic<std::uint64_t> fallback_reads{0};
  std::atomic<std::uint64_t> protection_events{0};
  std::atomic<std::uint64_t> stale_releases{0};
  std::atomic<std::uint64_t> checkpoints{0};
  std::atomic<std::uint64_t> busy_ns{0};
  std::atomic<std::uint64_t> rings_retired{0};
};

/// Called after each logged operation is applied, in log order. For writes
/// `data` holds the committed bytes of [offset, offset + size).
using CommitObserver = std::function<void(const LogRecord& rec, std::span<const std::byte> data)>;

class Master {
 public:
  Master(Region& region, MetadataStore& md, PageAllocator& alloc, OpLog& log, ChecksumKey key,
         MasterOptions options = {});
  ~Master();
  Master(const Master&) = delete;
  Master& operator=(const Master&) = delete;

  Channel& attach(ClientId id);
  Doorbell& doorbell() { return bell_; }

  /// Processes at most one batch. Returns the number of requests handled.
  std::size_t run_once();
  /// Threaded service loop; returns after stop().
  void run();
  void stop();

  /// Checkpoint now (inline callers only, or from inside the loop).
  Result<std::uint64_t> checkpoint();
  /// Asks a running loop to checkpoint at its next iteration.
  void request_checkpoint() { checkpoint_requested_.store(true, std::memory_order_release); }
  void housekeeping();

  void set_commit_observer(CommitObserver fn) { observer_ = std::move(fn); }
  const MasterStats& stats() const { return stats_; }
  const MasterOptions& options() const { return options_; }
  void set_batch_max(std::size_t n) { options_.batch_max = n == 0 ? 1 : n; }
  const ChecksumKey& key() const { return key_; }
  std::uint64_t leased_pages(ClientId id) const;

 private:
  struct Pending;

  void collect(std::vector<Pending>& batch);
  Errc resolve_paths(Request& q);
  void validate(Pending& p);
  void apply(Pending& p);
  void respond(Pending& p);

  void validate_create(Pending& p);
  void validate_open(Pending& p);
  void validate_remove(Pending& p);
  void validate_rename(Pending& p);
  void validate_write(Pending& p);
  void apply_open(Pending& p, Inode* n);
  void do_lease(Pending& p);
  void do_close(Pending& p);
  void do_read_fallback(Pending& p);

  const Inode* live_inode(const InodeHandle& h) const;
  const Dentry* live_dentry(const DentryHandle& h, std::uint64_t dir) const;
  void release_version(const Pending& p);
  void return_leases(ClientId client);
  void notify_commit(const LogRecord& rec);

  Region& region_;
  MetadataStore& md_;
  PageAllocator& alloc_;
  OpLog& log_;
  ChecksumKey key_;
  MasterOptions options_;
  MasterStats stats_;
  Doorbell bell_;

  std::mutex channels_mu_;
  std::vector<std::unique_ptr<Channel>> channels_;
  std::atomic<std::uint64_t> channels_version_{0};
  std::vector<Channel*> snapshot_;
  std::uint64_t snapshot_version_ = ~0ULL;
  std::size_t rr_ = 0;

  std::uint64_t consumed_ = 0;
  // Clients answered over the last kGatherWindow requests; sizes the gather.
  static constexpr std::size_t kGatherWindow = 64;
  std::deque<ClientId> recent_;
  std::unordered_map<ClientId, std::uint32_t> recent_count_;
  std::uint64_t since_housekeeping_ = 0;
  std::chrono::steady_clock::time_point last_housekeeping_ = std::chrono::steady_clock::now();
  std::atomic<bool> stop_{false};
  std::atomic<bool> checkpoint_requested_{false};
  std::uint64_t entries_at_checkpoint_ = 0;

  std::unordered_map<ClientId, std::set<std::uint64_t>> leased_;
  CommitObserver observer_;
};

/// Wall-clock nanoseconds, used for mtimes.
std::uint64_t wall_ns();

}  // namespace kucofs
