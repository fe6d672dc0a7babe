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

#include "kucofs/harness/crashtest.hpp"

#include <chrono>
#include <unordered_set>

#include <fmt/format.h>

#include "kucofs/filesystem.hpp"
#include "kucofs/harness/model_fs.hpp"
#include "kucofs/harness/state.hpp"

namespace kucofs::harness {

namespace {

struct CrashPoint {
  std::uint64_t fence = 0;
  std::uint64_t acked = 0;  // commits acknowledged before this fence
  std::uint64_t digest = 0;
};

// Recovers one crash image and checks page ownership. Returns the state
// digest or a description of what went wrong.
Result<std::uint64_t, std::string> check_image(std::vector<std::byte> image, const MetadataStore::Options& mopts,
                                               CrashReport& report) {
  auto region = Region::from_image(image);
  if (!region) return fmt::format("image rejected: {}", errc_name(region.error()));
  auto rec = recover(**region, mopts);
  if (!rec) return fmt::format("recovery failed: {}", errc_name(rec.error()));
  if (rec->report.torn_tail) ++report.torn_tails;
  report.replayed += rec->report.replayed;
  if (rec->report.apply_errors) return fmt::format("{} log records failed to replay", rec->report.apply_errors);
  if (rec->report.double_refs || rec->report.bad_refs) {
    return fmt::format("page ownership: {} double refs, {} bad refs", rec->report.double_refs, rec->report.bad_refs);
  }
  // Independent count of referenced pages against the rebuilt allocator.
  std::unordered_set<std::uint64_t> seen;
  bool dup = false;
  rec->md->for_each_inode([&](const Inode& n) {
    if (!n.map) return;
    for (std::uint64_t p : n.map->referenced_pages()) dup |= !seen.insert(p).second;
  });
  PageAllocator alloc(**region, rec->in_use);
  const auto census = alloc.census();
  // Page 0 is reserved and counts as committed.
  if (dup || census.committed != seen.size() + 1 || census.free + census.committed != census.total) {
    return fmt::format("allocator conservation: committed {} referenced {} free {} total {}", census.committed,
                       seen.size(), census.free, census.total);
  }
  return capture_state(*rec->md, **region).digest();
}

}  // namespace

Result<CrashReport> run_crashtest(const std::vector<TraceOp>& trace, const CrashOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  FsOptions fo;
  fo.pmem_size = options.pmem_size;
  fo.region.backing_path = options.pmem_path;
  fo.threaded = false;
  fo.client.lease_pages = 64;
  auto fs_r = FileSystem::format(fo);
  if (!fs_r) return fs_r.error();
  auto& fs = **fs_r;

  CrashReport report;
  report.ops = trace.size();
  ModelFS replay;
  std::vector<std::uint64_t> digests{replay.state().digest()};
  fs.master().set_commit_observer([&](const LogRecord& rec, std::span<const std::byte> data) {
    replay.apply(rec, data);
    digests.push_back(replay.state().digest());
  });

  std::vector<CrashPoint> points;
  fs.region().set_fence_observer([&](FencePhase phase) {
    const bool strict = options.policy == CrashPolicy::kStrict;
    if (phase != (strict ? FencePhase::kAfter : FencePhase::kBefore)) return;
    const std::uint64_t fence = ++report.fences;
    if (options.every > 1 && fence % options.every != 0) return;
    ++report.crash_points;
    auto image = fs.region().crash_snapshot(options.policy, options.seed * 0x9e3779b97f4a7c15ULL + fence);
    auto digest = check_image(std::move(image), fo.metadata, report);
    if (!digest) {
      report.violations.push_back({fence, digest.error()});
      return;
    }
    points.push_back({fence, digests.size() - 1, *digest});
  });

  {
    auto client = fs.connect();
    for (const TraceOp& op : trace) {
      switch (op.kind) {
        case TraceKind::kCreat:
          if (auto fd = client->creat(op.path)) (void)client->close(*fd);
          break;
        case TraceKind::kMkdir:
          (void)client->mkdir(op.path);
          break;
        case TraceKind::kUnlink:
          (void)client->unlink(op.path);
          break;
        case TraceKind::kRmdir:
          (void)client->rmdir(op.path);
          break;
        case TraceKind::kRename:
          (void)client->rename(op.path, op.path2);
          break;
        case TraceKind::kWrite:
          if (auto fd = client->open(op.path)) {
            (void)client->pwrite(*fd, op.bytes(), op.offset);
            (void)client->close(*fd);
          }
          break;
        case TraceKind::kCheckpoint:
          (void)fs.master().checkpoint();
          break;
      }
    }
  }
  fs.region().set_fence_observer(nullptr);
  report.commits = digests.size() - 1;

  // Each image must equal some commit prefix, no earlier than what had been
  // acknowledged and no earlier than the previous image. With one client the
  // only unacknowledged commit is the one in flight.
  std::uint64_t floor = 0;
  for (const CrashPoint& p : points) {
    const std::uint64_t lo = std::max(floor, p.acked);
    std::uint64_t match = ~0ULL;
    const std::uint64_t hi = std::min<std::uint64_t>(digests.size() - 1, p.acked + 1);
    for (std::uint64_t k = lo; k <= hi; ++k) {
      if (digests[k] == p.digest) {
        match = k;
        break;
      }
    }
    if (match == ~0ULL) {
      report.violations.push_back(
          {p.fence, fmt::format("recovered state matches no commit prefix in [{}, {}]", lo, hi)});
      continue;
    }
    floor = match;
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace kucofs::harness
