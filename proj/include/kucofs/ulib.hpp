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

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kucofs/blockmap.hpp"
#include "kucofs/message.hpp"
#include "kucofs/metadata.hpp"
#include "kucofs/pmem.hpp"
#include "kucofs/rangelock.hpp"

namespace kucofs {

inline constexpr int kFirstFd = 1 << 20;
inline constexpr std::uint64_t kMaxWriteChunk = 4ULL << 20;

// open() flags
inline constexpr int kOpenCreate = 1;
inline constexpr int kOpenExclusive = 2;

struct ClientOptions {
  bool offload = true;  // resolve paths and pass hints; off sends raw paths
  std::uint64_t lease_pages = 1024;
  std::uint64_t lock_lease_ns = kDefaultLeaseNs;
  std::uint64_t read_retry_cap = kDefaultReadRetryCap;
};

struct FileStat {
  std::uint64_t ino = 0;
  InodeKind kind = InodeKind::kFile;
  std::uint64_t size = 0;
  std::uint64_t mtime = 0;
  std::uint32_t mode = 0;
};

struct ClientStats {
  std::uint64_t messages = 0;
  std::array<std::uint64_t, 16> by_op{};
  std::uint64_t reads = 0;
  std::uint64_t read_retries = 0;
  std::uint64_t fallback_reads = 0;
  std::uint64_t writes = 0;
  std::uint64_t leases = 0;

  std::uint64_t sent(Opcode op) const { return by_op[static_cast<std::size_t>(op)]; }
};

/// One client execution context. Not safe for concurrent use; each thread
/// gets its own.
class Client {
 public:
  /// `pump` drives an inline master while waiting for a response; leave it
  /// empty when the master has its own thread.
  Client(Region& region, MetadataStore& md, Channel& channel, std::function<void()> pump = {},
         ClientOptions options = {});
  ~Client();
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  Result<int> open(std::string_view path, int flags = 0, std::uint32_t mode = 0644);
  Result<int> creat(std::string_view path, std::uint32_t mode = 0644) {
    return open(path, kOpenCreate, mode);
  }
  Status close(int fd);
  /// Creates an empty file without opening it.
  Status mknod(std::string_view path, std::uint32_t mode = 0644) { return make(path, Opcode::kCreat, mode); }

  Result<std::uint64_t> read(int fd, std::span<std::byte> out);
  Result<std::uint64_t> write(int fd, std::span<const std::byte> data);
  Result<std::uint64_t> pread(int fd, std::span<std::byte> out, std::uint64_t offset);
  Result<std::uint64_t> pwrite(int fd, std::span<const std::byte> data, std::uint64_t offset);
  Status seek(int fd, std::uint64_t offset);

  Result<FileStat> stat(std::string_view path);
  Result<FileStat> fstat(int fd);
  /// Bottom-level order of the directory's skip list: (hash, name).
  Result<std::vector<std::string>> readdir(std::string_view path);

  Status mkdir(std::string_view path, std::uint32_t mode = 0755);
  Status rmdir(std::string_view path);
  Status unlink(std::string_view path);
  Status rename(std::string_view from, std::string_view to);

  /// Closes every fd and hands leased pages back to the master.
  Status exit();

  ClientId id() const { return channel_.id(); }
  const ClientStats& stats() const { return stats_; }
  std::uint64_t pool_pages() const { return total_pages(pool_); }
  const ChecksumKey& key() const { return key_; }
  Region& region() { return region_; }

 private:
  struct Fd {
    std::uint64_t ino = 0;
    std::uint64_t gen = 0;
    std::uint64_t cursor = 0;
    LockRing* ring = nullptr;
  };

  Response call(Request& req);
  Result<Fd*> lookup_fd(int fd);
  Status refill(std::uint64_t need);
  std::vector<PageRun> take_pages(std::uint64_t n);
  void give_back(std::span<const PageRun> runs);
  Result<std::uint64_t> write_chunk(Fd& f, std::span<const std::byte> data, std::uint64_t offset);
  Result<std::uint64_t> copy_out(const Inode& n, std::uint64_t file_size, std::uint64_t offset,
                                 std::span<std::byte> out);
  Status remove(std::string_view path, Opcode op);
  Status make(std::string_view path, Opcode op, std::uint32_t mode);

  Region& region_;
  MetadataStore& md_;
  Channel& channel_;
  std::function<void()> pump_;
  ClientOptions options_;
  ChecksumKey key_{};
  std::uint32_t ebr_id_ = 0;
  std::uint64_t seq_ = 0;
  int next_fd_ = kFirstFd;
  std::unordered_map<int, Fd> fds_;
  std::vector<PageRun> pool_;
  std::vector<std::byte> page_buf_;
  ClientStats stats_;
  bool exited_ = false;
};

}  // namespace kucofs
