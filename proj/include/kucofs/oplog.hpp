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

// Persistent operation log, metadata checkpoints and crash recovery.
//
// Log entries are appended in batches at 64-byte aligned offsets inside the
// oplog segment:
//   seq u64 | type u8 | len u16 | payload[len] | crc32c u32
// Each entry starts 8-byte aligned; a batch is zero padded to the next
// cacheline. The log tail in the superblock is persisted only after the
// batch itself, so a recovered log never ends in a torn entry unless the
// media lied. docs/format.md has the payload layouts.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kucofs/metadata.hpp"
#include "kucofs/pmem.hpp"
#include "kucofs/status.hpp"

namespace kucofs {

enum class LogType : std::uint8_t { kCreat = 1, kMkdir, kUnlink, kRmdir, kRename, kWrite };

inline constexpr std::size_t kEntryHeader = 11;
inline constexpr std::size_t kEntryTrailer = 4;
inline constexpr std::size_t kMaxEntrySize = 4080;
inline constexpr std::size_t kMaxRunsPerEntry = 256;

struct LogRecord {
  LogType type = LogType::kCreat;
  std::uint64_t ino = 0;
  std::uint64_t gen = 0;
  std::uint64_t parent = 0;
  std::uint64_t parent2 = 0;  // rename destination directory
  std::uint32_t mode = 0;
  std::uint64_t mtime = 0;
  std::string name;
  std::string name2;  // rename destination name
  std::uint64_t offset = 0;
  std::uint64_t size = 0;
  std::uint64_t version = 0;
  std::vector<PageRun> runs;

  bool operator==(const LogRecord&) const = default;
};

/// Encoded entry without alignment padding.
std::vector<std::byte> encode_entry(std::uint64_t seq, const LogRecord& rec);

struct DecodedEntry {
  std::uint64_t seq = 0;
  LogRecord rec;
  std::size_t length = 0;  // unpadded
};

/// kInconsistent for anything that is not a well-formed entry.
Result<DecodedEntry> decode_entry(std::span<const std::byte> bytes);

inline std::uint64_t align_up(std::uint64_t v, std::uint64_t a) { return (v + a - 1) / a * a; }

struct SeqRange {
  std::uint64_t first = 0;
  std::uint64_t last = 0;  // inclusive; last < first when empty
};

class OpLog {
 public:
  /// Attaches to the log area described by the superblock of `region`.
  OpLog(Region& region, std::uint64_t next_seq);

  /// One flush per touched line and one fence for the entries, then the
  /// tail store with its own fence. kLogFull if the batch does not fit.
  Result<SeqRange> append_batch(std::span<const LogRecord> records);
  /// head = tail = 0, persisted.
  void truncate();

  std::uint64_t next_seq() const { return next_seq_; }
  std::uint64_t head() const { return head_; }
  std::uint64_t tail() const { return tail_; }
  std::uint64_t capacity() const { return capacity_; }
  double fill() const { return capacity_ ? static_cast<double>(tail_) / static_cast<double>(capacity_) : 1.0; }
  std::uint64_t appended_entries() const { return appended_; }
  std::uint64_t appended_batches() const { return batches_; }

 private:
  Region& region_;
  std::uint64_t base_;
  std::uint64_t capacity_;
  std::uint64_t head_;
  std::uint64_t tail_;
  std::uint64_t next_seq_;
  std::uint64_t appended_ = 0;
  std::uint64_t batches_ = 0;
};

class PageAllocator;

inline constexpr char kCheckpointMagic[4] = {'K', 'C', 'K', 'P'};
inline constexpr std::size_t kCheckpointHeader = 64;

/// Which metadata half is active: 0 none, 1 first half, 2 second half.
std::uint64_t active_metadata(const Region& region);

/// Serializes `md` into the inactive metadata half, persists it with the
/// bitmap, flips the indicator and truncates the log. Returns the
/// checkpointed sequence number.
Result<std::uint64_t> write_checkpoint(Region& region, const MetadataStore& md, PageAllocator& alloc, OpLog& log);

struct RecoveryReport {
  std::uint64_t checkpoint_seq = 0;
  std::uint64_t replayed = 0;
  std::uint64_t skipped = 0;  // entries already covered by the checkpoint
  std::uint64_t apply_errors = 0;
  bool torn_tail = false;
  std::uint64_t referenced_pages = 0;
  std::uint64_t free_pages = 0;
  std::uint64_t double_refs = 0;
  std::uint64_t bad_refs = 0;
  std::uint64_t bitmap_mismatch = 0;
};

struct Recovered {
  std::unique_ptr<MetadataStore> md;
  std::vector<bool> in_use;
  std::uint64_t next_seq = 1;
  RecoveryReport report;
};

/// Rebuilds volatile state from a region: active checkpoint plus replay of
/// the valid log prefix. Never writes to the region.
Result<Recovered> recover(const Region& region, MetadataStore::Options options = {});

/// Replays one record against `md`. Shared by recovery and tests.
Status apply_record(MetadataStore& md, const LogRecord& rec);

}  // namespace kucofs
