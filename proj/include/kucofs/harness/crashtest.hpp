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

#include "kucofs/harness/trace.hpp"
#include "kucofs/pmem.hpp"

namespace kucofs::harness {

struct CrashOptions {
  CrashPolicy policy = CrashPolicy::kStrict;
  std::uint64_t seed = 1;
  std::uint64_t pmem_size = 16ULL << 20;
  /// Crash at every n-th fence.
  std::uint64_t every = 1;
  std::string pmem_path;  // file-backed persistent image when set
};

struct CrashViolation {
  std::uint64_t fence = 0;
  std::string what;
};

struct CrashReport {
  std::size_t ops = 0;
  std::uint64_t fences = 0;
  std::uint64_t crash_points = 0;
  std::uint64_t commits = 0;
  std::uint64_t torn_tails = 0;
  std::uint64_t replayed = 0;
  std::vector<CrashViolation> violations;
  double seconds = 0;

  bool passed() const { return violations.empty(); }
};

/// Replays `trace` on a fresh region. At each selected fence the persistent
/// image is crashed, recovered and checked against every prefix of the
/// master commit order.
Result<CrashReport> run_crashtest(const std::vector<TraceOp>& trace, const CrashOptions& options);

}  // namespace kucofs::harness
