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

// Volatile metadata arena. One mutator (the master) and any number of
// lock-free readers. Readers bracket every traversal with
// EpochManager::enter/exit; anything unlinked while a reader may still hold
// it is retired to the epoch manager instead of being freed.

#include <array>
#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "kucofs/blockmap.hpp"
#include "kucofs/pmem.hpp"
#include "kucofs/rangelock.hpp"
#include "kucofs/status.hpp"

namespace kucofs {

inline constexpr std::uint64_t kRootIno = 0;
inline constexpr std::size_t kMaxNameLen = 255;
inline constexpr int kMaxLevel = 16;

enum class InodeKind : std::uint8_t { kFile = 1, kDir = 2 };

class EpochManager {
 public:
  static constexpr std::size_t kMaxParticipants = 256;
  using Reclaim = std::function<void()>;

  EpochManager() = default;
  ~EpochManager();
  EpochManager(const EpochManager&) = delete;
  EpochManager& operator=(const EpochManager&) = delete;

  Result<std::uint32_t> register_participant();
  void unregister_participant(std::uint32_t id);

  void enter(std::uint32_t id);
  void exit(std::uint32_t id);

  /// Master only.
  void retire(Reclaim fn);
  /// Moves to the next epoch if every participant inside a section has
  /// observed the current one, then runs the queue retired two epochs ago.
  /// Returns the number of reclaimed items. Master only.
  std::size_t advance();
  /// Runs every queue. Only valid while no participant is inside.
  std::size_t drain();

  std::uint64_t epoch() const { return global_.load(std::memory_order_acquire); }
  std::uint64_t observed(std::uint32_t id) const;
  std::size_t pending() const;

 private:
  struct alignas(64) Participant {
    // 0 outside a section, otherwise (epoch << 1) | 1
    std::atomic<std::uint64_t> word{0};
    std::atomic<std::uint64_t> last_observed{0};
    std::atomic<bool> registered{false};
  };

  std::atomic<std::uint64_t> global_{0};
  std::array<Participant, kMaxParticipants> parts_;
  std::array<std::vector<Reclaim>, 3> queues_;
  std::mutex reg_mu_;
};

/// RAII reader section.
class EpochGuard {
 public:
  EpochGuard(EpochManager& ebr, std::uint32_t id) : ebr_(ebr), id_(id) { ebr_.enter(id_); }
  ~EpochGuard() { ebr_.exit(id_); }
  EpochGuard(const EpochGuard&) = delete;
  EpochGuard& operator=(const EpochGuard&) = delete;

 private:
  EpochManager& ebr_;
  std::uint32_t id_;
};

inline constexpr std::uint64_t kDentryMagic = 0x4b44454e54525931ULL;
inline constexpr std::uint64_t kHeadMagic = 0x4b44454e54484431ULL;
inline constexpr std::uint64_t kPoisonMagic = 0xdeaddeaddeaddeadULL;

/// Dentry liveness word: 0 live, 1 deleted, anything else is the address of
/// the rename source; the entry is live once that source is deleted.
inline constexpr std::uintptr_t kDentryLive = 0;
inline constexpr std::uintptr_t kDentryDeleted = 1;

struct Dentry {
  Dentry(std::uint64_t key_, std::string name_, std::uint64_t ino_, std::uint64_t dir_, int level_,
         std::uint64_t magic_ = kDentryMagic);

  std::atomic<std::uint64_t> magic;
  const std::uint64_t key;
  const std::string name;
  const std::uint64_t ino;
  const std::uint64_t dir;
  const int level;
  std::atomic<std::uintptr_t> state{kDentryLive};
  Dentry* prev = nullptr;  // bottom level, master only
  std::atomic<Dentry*> next[kMaxLevel];

  bool is_head() const { return magic.load(std::memory_order_relaxed) == kHeadMagic; }
  bool live() const;
};

/// Orders (key, name) pairs. Every call counts as one key comparison.
int compare_entry(std::uint64_t key_a, std::string_view name_a, std::uint64_t key_b, std::string_view name_b);

struct MetadataStats {
  std::atomic<std::uint64_t> key_comparisons{0};  // master side only
  std::atomic<std::uint64_t> stale_hints{0};
  std::atomic<std::uint64_t> poisoned_visits{0};
};

class SkipList {
 public:
  explicit SkipList(std::uint64_t dir_ino);
  ~SkipList();
  SkipList(const SkipList&) = delete;
  SkipList& operator=(const SkipList&) = delete;

  const Dentry* head() const { return head_.get(); }
  std::uint64_t dir() const { return dir_; }

  /// Lock-free. Returns the live entry for (key, name) or nullptr.
  const Dentry* lookup(std::uint64_t key, std::string_view name, std::uint64_t* comparisons = nullptr,
                       MetadataStats* stats = nullptr) const;
  /// Lock-free. Bottom-level node after which (key, name) sorts.
  const Dentry* predecessor(std::uint64_t key, std::string_view name, std::uint64_t* comparisons = nullptr,
                            MetadataStats* stats = nullptr) const;

  /// Visits live entries in bottom-level order. Lock-free.
  template <typename F>
  void for_each_live(F&& fn) const {
    for (const Dentry* d = head_->next[0].load(std::memory_order_acquire); d;
         d = d->next[0].load(std::memory_order_acquire)) {
      if (d->live()) fn(*d);
    }
  }
  bool has_live_entries() const;

  // Master only below.

  /// Links a new node after `pred`, which must be the bottom-level
  /// predecessor of (key, name). The bottom link is the publishing store.
  Dentry* link_after(Dentry* pred, std::uint64_t key, std::string name, std::uint64_t ino, int level,
                     std::uintptr_t initial_state);
  /// Unlinks a node already marked deleted. The node is not freed.
  void unlink(Dentry* node);
  Dentry* mutable_head() { return head_.get(); }
  std::size_t linked() const { return linked_; }

 private:
  std::uint64_t dir_;
  std::unique_ptr<Dentry> head_;
  std::size_t linked_ = 0;
};

struct Inode {
  Inode(std::uint64_t ino_, std::uint64_t generation_, InodeKind kind_, std::uint32_t mode_, std::uint64_t parent_);

  const std::uint64_t ino;
  const std::uint64_t generation;
  const InodeKind kind;
  const std::uint32_t mode;
  std::atomic<std::uint64_t> size{0};
  std::atomic<std::uint64_t> mtime{0};
  std::atomic<bool> dirty{false};
  std::unique_ptr<SkipList> dir;   // kDir
  std::unique_ptr<BlockMap> map;   // kFile
  std::atomic<LockRing*> ring{nullptr};

  // master only
  std::uint64_t parent;
  std::uint32_t open_count = 0;
  std::uint64_t max_version = 0;
};

/// Two-level array of inode links; slot 0 is the root directory.
class InodeTable {
 public:
  static constexpr std::uint64_t kChunk = 4096;
  static constexpr std::uint64_t kChunks = 4096;
  static constexpr std::uint64_t kCapacity = kChunk * kChunks;

  InodeTable();
  ~InodeTable();
  InodeTable(const InodeTable&) = delete;
  InodeTable& operator=(const InodeTable&) = delete;

  Inode* get(std::uint64_t ino) const;
  void publish(std::uint64_t ino, Inode* inode);
  void clear(std::uint64_t ino);

 private:
  struct Chunk {
    std::atomic<Inode*> slots[kChunk];
  };
  std::unique_ptr<std::atomic<Chunk*>[]> chunks_;
};

struct ResolvedPath {
  const Inode* parent = nullptr;
  const Dentry* pred = nullptr;    // insertion hint in parent
  const Dentry* dentry = nullptr;  // live entry of the leaf, if any
  const Inode* target = nullptr;
  std::string leaf;
};

/// Splits an absolute path into components. Empty components are dropped.
Result<std::vector<std::string>> split_path(std::string_view path);
Status validate_name(std::string_view name);

/// Master-owned metadata state. Reader entry points are lock-free and may
/// be called from any thread inside an epoch section.
class MetadataStore {
 public:
  struct Options {
    std::uint64_t rng_seed = 0x6b75636f;
    bool poison_freed = false;
  };

  explicit MetadataStore(Options options);
  MetadataStore() : MetadataStore(Options{}) {}
  ~MetadataStore();
  MetadataStore(const MetadataStore&) = delete;
  MetadataStore& operator=(const MetadataStore&) = delete;

  EpochManager& ebr() { return ebr_; }
  MetadataStats& stats() { return stats_; }
  const MetadataStats& stats() const { return stats_; }

  // Readers.
  const Inode* inode(std::uint64_t ino) const;
  const Inode* root() const { return inode(kRootIno); }
  Result<ResolvedPath> resolve(std::string_view path, std::uint64_t* comparisons = nullptr) const;

  // Master.
  Inode* mutable_inode(std::uint64_t ino) const { return table_.get(ino); }
  std::pair<std::uint64_t, std::uint64_t> reserve_ino();
  void reserve_specific(std::uint64_t ino, std::uint64_t generation);
  /// Returns a reserved but never created ino.
  void unreserve(std::uint64_t ino) { free_inos_.insert(ino); }
  std::uint64_t next_generation() const { return next_generation_; }
  void set_next_generation(std::uint64_t g) { next_generation_ = g; }

  /// Node validation for client supplied dentry handles.
  bool known_dentry(const Dentry* d) const { return nodes_.count(d) != 0; }

  /// Creates a file or directory under `parent`. `hint` (may be null) is
  /// a bottom-level predecessor; `expected_succ` is the successor observed
  /// when the hint was validated, letting the link skip re-comparison.
  Result<Inode*> create(std::uint64_t parent, std::string_view name, std::uint64_t ino, std::uint64_t generation,
                        InodeKind kind, std::uint32_t mode, std::uint64_t mtime, const Dentry* hint = nullptr,
                        const Dentry* expected_succ = nullptr, bool hint_checked = false);
  /// Removes a leaf (unlink or rmdir) and retires the inode.
  /// `handle`, when it still names the live entry, skips the search.
  Status remove(std::uint64_t parent, std::string_view name, InodeKind expected, const Dentry* handle = nullptr);
  Status rename(std::uint64_t src_parent, std::string_view src_name, std::uint64_t dst_parent,
                std::string_view dst_name, const Dentry* src_handle = nullptr, const Dentry* dst_hint = nullptr);
  /// Commits CoW pages; displaced pages go through the epoch manager to
  /// the page release hook.
  Status write(std::uint64_t ino, std::uint64_t offset, std::uint64_t size, std::uint64_t version,
               std::uint64_t mtime, std::span<const std::uint64_t> pages);

  /// Full (counted) search plus hint check. Returns the validated
  /// predecessor for insertion of (key, name) in `dir`, or kExists.
  Result<const Dentry*> insertion_point(const SkipList& dir, std::uint64_t key, std::string_view name,
                                        const Dentry* hint);
  /// Counted, master-side lookup.
  const Dentry* find(const SkipList& dir, std::uint64_t key, std::string_view name);

  /// True if `ino` is `ancestor` or lies beneath it.
  bool is_descendant(std::uint64_t ino, std::uint64_t ancestor) const;

  /// Page reclamation hook, run after the epoch grace period.
  void set_page_release(std::function<void(std::span<const std::uint64_t>)> fn) { release_pages_ = std::move(fn); }
  void set_ino_release(std::function<void(std::uint64_t)> fn) { release_ino_ = std::move(fn); }

  int random_level();
  std::uint64_t inode_count() const { return live_inodes_; }
  std::uint64_t max_ino() const { return next_ino_; }

  /// Master-only iteration over live inodes in ino order.
  template <typename F>
  void for_each_inode(F&& fn) const {
    for (std::uint64_t i = 0; i < next_ino_; ++i) {
      if (const Inode* n = table_.get(i); n && !n->dirty.load(std::memory_order_relaxed)) fn(*n);
    }
  }

  /// Publishes an inode directly (checkpoint load).
  Inode* install(std::unique_ptr<Inode> inode);
  Dentry* append_loaded(Inode& dir, Dentry* after, std::uint64_t key, std::string name, std::uint64_t ino);

  std::size_t quarantined() const { return quarantine_.size(); }

 private:
  void retire_dentry(Dentry* d);
  void retire_inode(Inode* n);
  void free_dentry(Dentry* d);

  Options options_;
  InodeTable table_;
  EpochManager ebr_;
  MetadataStats stats_;
  std::mt19937_64 rng_;
  std::unordered_set<const Dentry*> nodes_;
  std::set<std::uint64_t> free_inos_;
  std::uint64_t next_ino_ = 1;
  std::uint64_t next_generation_ = 1;
  std::uint64_t live_inodes_ = 0;
  std::deque<Dentry*> quarantine_;
  std::function<void(std::span<const std::uint64_t>)> release_pages_;
  std::function<void(std::uint64_t)> release_ino_;
};

}  // namespace kucofs
