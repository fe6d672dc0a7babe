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
#include <vector>

#include "kucofs/metadata.hpp"
#include "kucofs/pmem.hpp"

namespace kucofs::harness {

struct EntryState {
  InodeKind kind = InodeKind::kFile;
  std::uint64_t size = 0;
  std::uint64_t content = 0;
  bool operator==(const EntryState&) const = default;
};

/// Namespace plus file contents, keyed by absolute path. Timestamps and
/// inode numbers are left out on purpose so two histories that reach the
/// same tree compare equal.
struct FsState {
  std::map<std::string, EntryState> entries;

  std::uint64_t digest() const;
  /// Human-readable list of differing paths, at most `limit` lines.
  std::string diff(const FsState& other, std::size_t limit = 8) const;
  bool operator==(const FsState&) const = default;
};

std::uint64_t content_hash(std::span<const std::byte> bytes);

/// Walks a quiescent metadata store.
FsState capture_state(const MetadataStore& md, const Region& region);

/// Reads a whole file through its block map.
std::vector<std::byte> read_file(const Inode& n, const Region& region);

}  // namespace kucofs::harness
