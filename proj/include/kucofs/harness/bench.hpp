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

#include <json.hpp>

#include "kucofs/status.hpp"

namespace kucofs::harness {

const std::vector<std::string>& workload_names();

struct BenchOptions {
  std::string workload = "creat-medium";
  unsigned threads = 1;
  std::uint64_t ops = 10000;  // per thread; ignored when duration > 0
  double duration = 0;        // seconds
  std::uint64_t io_size = 4096;
  std::uint64_t file_pages = 64;  // per-file size for the read/overwrite workloads
  std::uint64_t dir_files = 1000; // readdir-medium population
  std::uint64_t pmem_size = 1ULL << 30;
  std::uint64_t seed = 1;
  std::size_t batch_max = 64;
  bool offload = true;
  std::uint32_t ring_slots = 8;
  std::string pmem_path;  // file-backed persistent image when set
};

struct BenchReport {
  std::string workload;
  unsigned threads = 0;
  std::uint64_t ops = 0;
  double seconds = 0;
  double ops_per_sec = 0;
  double p50_us = 0;
  double p99_us = 0;
  double p999_us = 0;
  std::uint64_t reads = 0;
  std::uint64_t read_retries = 0;
  double retry_rate = 0;
  std::uint64_t fallback_reads = 0;
  std::uint64_t fences = 0;
  std::uint64_t flushes = 0;
  std::uint64_t tlb_flush_events = 0;
  std::uint64_t client_messages = 0;
  std::uint64_t master_requests = 0;
  std::uint64_t batches = 0;
  std::uint64_t max_batch = 0;
  std::uint64_t creats = 0;
  std::uint64_t key_comparisons = 0;
  double master_busy = 0;     // fraction of wall time
  double implied_cap = 0;     // requests/s at the measured mean service time
  std::uint64_t files_after = 0;
};

Result<BenchReport> run_bench(const BenchOptions& options);
nlohmann::json to_json(const BenchReport& r);
std::string to_table(const BenchReport& r);

}  // namespace kucofs::harness
