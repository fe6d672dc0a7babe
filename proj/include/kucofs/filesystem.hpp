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

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <thread>

#include "kucofs/master.hpp"
#include "kucofs/metadata.hpp"
#include "kucofs/oplog.hpp"
#include "kucofs/pmem.hpp"
#include "kucofs/ulib.hpp"

namespace kucofs {

struct FsOptions {
  std::uint64_t pmem_size = 256ULL << 20;
  RegionConfig region;
  MetadataStore::Options metadata;
  MasterOptions master;
  ClientOptions client;
  /// Master on its own thread. Otherwise clients drive it inline while they
  /// wait, which keeps every run deterministic.
  bool threaded = true;
};

/// Owns a region and the master-side state built on it.
class FileSystem {
 public:
  static Result<std::unique_ptr<FileSystem>> format(const FsOptions& options);
  /// Rebuilds from a region image, then checkpoints so the log starts empty.
  static Result<std::unique_ptr<FileSystem>> recover(std::unique_ptr<Region> region, const FsOptions& options,
                                                     RecoveryReport* report = nullptr);

  ~FileSystem();
  FileSystem(const FileSystem&) = delete;
  FileSystem& operator=(const FileSystem&) = delete;

  /// Thread-safe.
  std::unique_ptr<Client> connect();
  std::unique_ptr<Client> connect(const ClientOptions& options);

  /// Threaded mode only.
  void start();
  void stop();
  /// One inline master step.
  void pump();

  Region& region() { return *region_; }
  MetadataStore& metadata() { return *md_; }
  PageAllocator& allocator() { return *alloc_; }
  OpLog& log() { return *log_; }
  Master& master() { return *master_; }
  const FsOptions& options() const { return options_; }

 private:
  FileSystem(std::unique_ptr<Region> region, std::unique_ptr<MetadataStore> md, std::unique_ptr<PageAllocator> alloc,
             std::uint64_t next_seq, const FsOptions& options);

  FsOptions options_;
  std::unique_ptr<Region> region_;
  std::unique_ptr<MetadataStore> md_;
  std::unique_ptr<PageAllocator> alloc_;
  std::unique_ptr<OpLog> log_;
  std::unique_ptr<Master> master_;
  std::mutex attach_mu_;
  std::mutex pump_mu_;
  std::atomic<ClientId> next_client_{1};
  std::thread thread_;
};

}  // namespace kucofs
