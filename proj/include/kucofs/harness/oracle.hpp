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

#include "kucofs/status.hpp"

namespace kucofs::harness {

struct OracleOptions {
  std::uint64_t ops = 10000;
  unsigned threads = 1;
  std::uint64_t seed = 1;
  bool offload = true;
  std::uint64_t pmem_size = 512ULL << 20;
  /// Single-thread mode compares the whole tree this often, and the paths
  /// an op touched after every op.
  std::uint64_t full_every = 1000;
  std::string pmem_path;  // file-backed persistent image when set
};

struct OracleReport {
  std::uint64_t ops = 0;
  unsigned threads = 0;
  std::uint64_t divergences = 0;
  std::string first_divergence;
  std::uint64_t commits = 0;
  std::uint64_t client_messages = 0;
  std::uint64_t master_requests = 0;
  std::uint64_t creats = 0;
  std::uint64_t key_comparisons = 0;
  double seconds = 0;

  bool passed() const { return divergences == 0; }
};

OracleReport run_oracle(const OracleOptions& options);

}  // namespace kucofs::harness
