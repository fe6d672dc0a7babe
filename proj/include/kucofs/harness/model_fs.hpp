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

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kucofs/harness/state.hpp"
#include "kucofs/oplog.hpp"
#include "kucofs/status.hpp"

namespace kucofs::harness {

/// In-memory reference file system. Path operations return the same error
/// codes as the client library; `apply` replays committed log records.
class ModelFS {
 public:
  ModelFS();

  Errc create(std::string_view path);  // open with create: an existing file is fine
  Errc mknod(std::string_view path);
  Errc mkdir(std::string_view path);
  Errc unlink(std::string_view path);
  Errc rmdir(std::string_view path);
  Errc rename(std::string_view from, std::string_view to);
  Errc write(std::string_view path, std::uint64_t offset, std::span<const std::byte> data);
  Result<std::vector<std::byte>> read(std::string_view path, std::uint64_t offset, std::uint64_t size) const;
  Result<std::vector<std::string>> readdir(std::string_view path) const;
  Result<EntryState> stat(std::string_view path) const;

  void apply(const LogRecord& rec, std::span<const std::byte> data);

  FsState state() const;
  /// Every live path, directories included, sorted.
  std::vector<std::string> paths(InodeKind kind) const;
  std::size_t applied() const { return applied_; }

 private:
  struct Node {
    InodeKind kind = InodeKind::kFile;
    std::vector<std::byte> data;
    std::map<std::string, std::uint64_t> children;
    std::uint64_t parent = 0;
  };
  struct Walk {
    std::uint64_t parent = 0;
    std::string leaf;
    std::uint64_t node = 0;
    bool found = false;
  };

  Result<Walk> walk(std::string_view path) const;
  std::uint64_t add(std::uint64_t parent, const std::string& name, InodeKind kind);
  void drop(std::uint64_t parent, const std::string& name);
  bool descends(std::uint64_t node, std::uint64_t ancestor) const;
  void collect(std::uint64_t id, const std::string& path, FsState& out) const;

  std::unordered_map<std::uint64_t, Node> nodes_;
  std::uint64_t next_id_ = 1;
  std::unordered_map<std::uint64_t, std::uint64_t> by_ino_;
  std::size_t applied_ = 0;
};

}  // namespace kucofs::harness
