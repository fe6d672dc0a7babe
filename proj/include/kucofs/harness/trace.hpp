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
#include <string>
#include <vector>

#include "kucofs/status.hpp"

namespace kucofs::harness {

enum class TraceKind : std::uint8_t { kCreat, kMkdir, kUnlink, kRmdir, kRename, kWrite, kCheckpoint };

/// One line of a trace: `op path [offset size] [hexdata|#seed]`. Renames
/// carry the destination as a second path.
struct TraceOp {
  TraceKind kind = TraceKind::kCreat;
  std::string path;
  std::string path2;
  std::uint64_t offset = 0;
  std::uint64_t size = 0;
  bool seeded = true;
  std::uint64_t seed = 0;
  std::vector<std::byte> data;  // when not seeded

  std::vector<std::byte> bytes() const;
};

struct TraceError {
  std::size_t line = 0;
  std::string message;
};

Result<std::vector<TraceOp>, TraceError> parse_trace(std::string_view text);
std::string format_trace(const std::vector<TraceOp>& ops);

/// Deterministic fill for `#seed` payloads.
std::vector<std::byte> seeded_bytes(std::uint64_t seed, std::uint64_t size);

/// Mixed metadata/data trace that mostly targets live paths.
std::vector<TraceOp> generate_trace(std::size_t ops, std::uint64_t seed);

}  // namespace kucofs::harness
