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

#include "kucofs/harness/bench.hpp"

#include <algorithm>
#include <barrier>
#include <chrono>
#include <random>
#include <thread>

#include <fmt/format.h>

#include "kucofs/filesystem.hpp"
#include "kucofs/harness/state.hpp"

namespace kucofs::harness {

const std::vector<std::string>& workload_names() {
  static const std::vector<std::string> names = {
      "read-low",     "read-medium",   "overwrite-low",  "overwrite-medium", "append-low",
      "creat-medium", "unlink-medium", "readdir-medium", "fileserver-lite",  "varmail-lite"};
  return names;
}

namespace {

using Clock = std::chrono::steady_clock;

struct Worker {
  unsigned id = 0;
  std::unique_ptr<Client> client;
  std::mt19937_64 rng;
  int fd = -1;
  std::vector<std::byte> buf;
  std::vector<std::uint64_t> lat_ns;
  std::uint64_t ops = 0;
  std::uint64_t msgs_before = 0;
  Errc error = Errc::kOk;
};

Status fill_file(Client& c, int fd, std::uint64_t pages, std::uint64_t seed) {
  std::vector<std::byte> chunk(kPageSize * std::min<std::uint64_t>(pages, 256));
  std::mt19937_64 rng(seed);
  for (auto& b : chunk) b = static_cast<std::byte>(rng());
  for (std::uint64_t done = 0; done < pages;) {
    const std::uint64_t n = std::min<std::uint64_t>(pages - done, chunk.size() / kPageSize);
    auto w = c.pwrite(fd, std::span(chunk).first(n * kPageSize), done * kPageSize);
    if (!w) return w.error();
    done += n;
  }
  return {};
}

std::string private_file(unsigned t) { return fmt::format("/t{}", t); }

// Per-thread setup before the clock starts.
Status setup(Worker& w, const BenchOptions& o) {
  Client& c = *w.client;
  const std::string& name = o.workload;
  if (name == "read-low" || name == "overwrite-low" || name == "append-low") {
    auto fd = c.creat(private_file(w.id));
    if (!fd) return fd.error();
    w.fd = *fd;
    if (name != "append-low") return fill_file(c, w.fd, o.file_pages, o.seed + w.id);
    return {};
  }
  if (name == "read-medium" || name == "overwrite-medium") {
    auto fd = c.open("/shared");
    if (!fd) return fd.error();
    w.fd = *fd;
    return {};
  }
  if (name == "unlink-medium") {
    for (std::uint64_t i = 0; i < o.ops; ++i) {
      if (auto s = c.mknod(fmt::format("/bench/t{}_{}", w.id, i)); !s) return s;
    }
  }
  return {};
}

Status shared_setup(Client& c, const BenchOptions& o) {
  const std::string& name = o.workload;
  if (name == "read-medium" || name == "overwrite-medium") {
    auto fd = c.creat("/shared");
    if (!fd) return fd.error();
    auto s = fill_file(c, *fd, o.file_pages, o.seed);
    (void)c.close(*fd);
    return s;
  }
  if (name == "creat-medium" || name == "unlink-medium" || name == "readdir-medium") {
    if (auto s = c.mkdir("/bench"); !s) return s;
  }
  if (name == "readdir-medium") {
    for (std::uint64_t i = 0; i < o.dir_files; ++i) {
      if (auto s = c.mknod(fmt::format("/bench/f{}", i)); !s) return s;
    }
  }
  if (name == "fileserver-lite" || name == "varmail-lite") {
    if (auto s = c.mkdir("/srv"); !s) return s;
  }
  return {};
}

Status one_op(Worker& w, const BenchOptions& o, std::uint64_t i) {
  Client& c = *w.client;
  const std::string& name = o.workload;
  const std::uint64_t blocks = std::max<std::uint64_t>(1, o.file_pages * kPageSize / o.io_size);
  auto random_block = [&] { return (w.rng() % blocks) * o.io_size; };

  if (name == "read-low" || name == "read-medium") {
    auto n = c.pread(w.fd, std::span(w.buf).first(o.io_size), random_block());
    return n ? Status{} : Status{n.error()};
  }
  if (name == "overwrite-low" || name == "overwrite-medium") {
    auto n = c.pwrite(w.fd, std::span(w.buf).first(o.io_size), random_block());
    return n ? Status{} : Status{n.error()};
  }
  if (name == "append-low") {
    auto n = c.write(w.fd, std::span(w.buf).first(o.io_size));
    return n ? Status{} : Status{n.error()};
  }
  if (name == "creat-medium") return c.mknod(fmt::format("/bench/t{}_{}", w.id, i));
  if (name == "unlink-medium") return c.unlink(fmt::format("/bench/t{}_{}", w.id, i));
  if (name == "readdir-medium") {
    auto r = c.readdir("/bench");
    return r ? Status{} : Status{r.error()};
  }
  // fileserver-lite and varmail-lite cycle one file through four stages.
  const bool varmail = name == "varmail-lite";
  const std::string path = fmt::format("/srv/t{}_{}", w.id, i / 4);
  const std::uint64_t io = 16 << 10;
  switch (i % 4) {
    case 0: {
      auto fd = c.creat(path);
      if (!fd) return fd.error();
      auto n = c.write(*fd, std::span(w.buf).first(io));
      (void)c.close(*fd);
      return n ? Status{} : Status{n.error()};
    }
    case 1:
    case 2: {
      auto fd = c.open(path);
      if (!fd) return fd.error();
      Result<std::uint64_t> n = std::uint64_t{0};
      if ((i % 4 == 1) != varmail) {
        auto st = c.fstat(*fd);
        n = st ? c.pwrite(*fd, std::span(w.buf).first(io), st->size) : Result<std::uint64_t>(st.error());
      } else {
        n = c.pread(*fd, std::span(w.buf).first(varmail ? w.buf.size() : io), 0);
      }
      (void)c.close(*fd);
      return n ? Status{} : Status{n.error()};
    }
    default:
      return c.unlink(path);
  }
}

double percentile(std::vector<std::uint64_t>& v, double q) {
  if (v.empty()) return 0;
  const std::size_t k = std::min(v.size() - 1, static_cast<std::size_t>(q * static_cast<double>(v.size())));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return static_cast<double>(v[k]) / 1000.0;
}

}  // namespace

Result<BenchReport> run_bench(const BenchOptions& o) {
  const auto& names = workload_names();
  if (std::find(names.begin(), names.end(), o.workload) == names.end()) return Errc::kInvalidArgument;
  if (o.threads == 0 || o.io_size == 0 || o.io_size > (4u << 20) || (o.ops == 0 && o.duration <= 0)) {
    return Errc::kInvalidArgument;
  }
  FsOptions fo;
  fo.pmem_size = o.pmem_size;
  fo.region.backing_path = o.pmem_path;
  fo.threaded = true;
  fo.master.batch_max = o.batch_max;
  fo.master.ring_slots = o.ring_slots;
  fo.client.offload = o.offload;
  auto fs_r = FileSystem::format(fo);
  if (!fs_r) return fs_r.error();
  FileSystem& fs = **fs_r;

  {
    auto c = fs.connect();
    if (auto s = shared_setup(*c, o); !s) return s.error();
  }

  std::vector<Worker> workers(o.threads);
  for (unsigned t = 0; t < o.threads; ++t) {
    workers[t].id = t;
    workers[t].client = fs.connect();
    workers[t].rng.seed(o.seed * 7919 + t);
    workers[t].buf.resize(std::max<std::uint64_t>(o.io_size, o.workload == "varmail-lite" ? (1u << 20) : (16u << 10)));
    for (auto& b : workers[t].buf) b = static_cast<std::byte>(workers[t].rng());
  }
  std::vector<std::thread> threads;
  std::barrier start(static_cast<std::ptrdiff_t>(o.threads) + 1);
  std::barrier go(static_cast<std::ptrdiff_t>(o.threads) + 1);
  std::atomic<bool> stop{false};
  for (auto& w : workers) {
    threads.emplace_back([&] {
      if (auto s = setup(w, o); !s) w.error = s.error();
      w.msgs_before = w.client->stats().messages;
      start.arrive_and_wait();
      go.arrive_and_wait();
      if (w.error != Errc::kOk) return;
      if (o.duration <= 0) w.lat_ns.reserve(o.ops);
      for (std::uint64_t i = 0; o.duration > 0 ? !stop.load(std::memory_order_relaxed) : i < o.ops; ++i) {
        const auto a = Clock::now();
        auto s = one_op(w, o, i);
        w.lat_ns.push_back(static_cast<std::uint64_t>((Clock::now() - a).count()));
        if (!s) {
          w.error = s.error();
          return;
        }
        ++w.ops;
      }
    });
  }
  start.arrive_and_wait();
  Master& m = fs.master();
  const auto c0 = fs.region().counters();
  const std::uint64_t tlb0 = fs.region().permissions().tlb_flush_events();
  const std::uint64_t req0 = m.stats().requests.load(), bat0 = m.stats().batches.load(),
                      busy0 = m.stats().busy_ns.load(), creat0 = m.stats().creats.load(),
                      cmp0 = fs.metadata().stats().key_comparisons.load();
  const auto t0 = Clock::now();
  go.arrive_and_wait();
  if (o.duration > 0) {
    std::this_thread::sleep_for(std::chrono::duration<double>(o.duration));
    stop.store(true);
  }
  for (auto& th : threads) th.join();
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();

  BenchReport r;
  r.workload = o.workload;
  r.threads = o.threads;
  r.seconds = secs;
  std::vector<std::uint64_t> lat;
  for (auto& w : workers) {
    if (w.error != Errc::kOk) return w.error;
    r.ops += w.ops;
    r.client_messages += w.client->stats().messages - w.msgs_before;
    r.reads += w.client->stats().reads;
    r.read_retries += w.client->stats().read_retries;
    r.fallback_reads += w.client->stats().fallback_reads;
    lat.insert(lat.end(), w.lat_ns.begin(), w.lat_ns.end());
  }
  const auto c1 = fs.region().counters();
  r.fences = c1.fences - c0.fences;
  r.flushes = c1.flushes - c0.flushes;
  r.tlb_flush_events = fs.region().permissions().tlb_flush_events() - tlb0;
  r.master_requests = m.stats().requests.load() - req0;
  r.batches = m.stats().batches.load() - bat0;
  r.max_batch = m.stats().max_batch.load();
  r.creats = m.stats().creats.load() - creat0;
  r.key_comparisons = fs.metadata().stats().key_comparisons.load() - cmp0;
  const double busy = static_cast<double>(m.stats().busy_ns.load() - busy0);
  r.master_busy = secs > 0 ? busy / (secs * 1e9) : 0;
  r.implied_cap = busy > 0 ? static_cast<double>(r.master_requests) / (busy / 1e9) : 0;
  r.ops_per_sec = secs > 0 ? static_cast<double>(r.ops) / secs : 0;
  r.retry_rate = r.reads ? static_cast<double>(r.read_retries) / static_cast<double>(r.reads) : 0;
  r.p50_us = percentile(lat, 0.50);
  r.p99_us = percentile(lat, 0.99);
  r.p999_us = percentile(lat, 0.999);

  workers.clear();  // clients exit while the master still runs
  fs.stop();
  for (const auto& [path, e] : capture_state(fs.metadata(), fs.region()).entries) {
    r.files_after += e.kind == InodeKind::kFile;
  }
  return r;
}

nlohmann::json to_json(const BenchReport& r) {
  return {
      {"workload", r.workload},
      {"threads", r.threads},
      {"ops", r.ops},
      {"seconds", r.seconds},
      {"ops_per_sec", r.ops_per_sec},
      {"latency_us", {{"p50", r.p50_us}, {"p99", r.p99_us}, {"p999", r.p999_us}}},
      {"reads", r.reads},
      {"read_retries", r.read_retries},
      {"retry_rate", r.retry_rate},
      {"fallback_reads", r.fallback_reads},
      {"fences", r.fences},
      {"flushes", r.flushes},
      {"tlb_flush_events", r.tlb_flush_events},
      {"client_messages", r.client_messages},
      {"master_requests", r.master_requests},
      {"batches", r.batches},
      {"max_batch", r.max_batch},
      {"creats", r.creats},
      {"key_comparisons", r.key_comparisons},
      {"master_busy", r.master_busy},
      {"implied_cap", r.implied_cap},
      {"files_after", r.files_after},
  };
}

std::string to_table(const BenchReport& r) {
  std::string out;
  auto row = [&](std::string_view k, const std::string& v) { out += fmt::format("{:<18} {}\n", k, v); };
  row("workload", r.workload);
  row("threads", std::to_string(r.threads));
  row("ops", std::to_string(r.ops));
  row("seconds", fmt::format("{:.3f}", r.seconds));
  row("ops/s", fmt::format("{:.0f}", r.ops_per_sec));
  row("latency us", fmt::format("p50 {:.1f}  p99 {:.1f}  p99.9 {:.1f}", r.p50_us, r.p99_us, r.p999_us));
  row("read retries", fmt::format("{} ({:.4f}/read, {} fallbacks)", r.read_retries, r.retry_rate, r.fallback_reads));
  row("fences", std::to_string(r.fences));
  row("flushes", std::to_string(r.flushes));
  row("tlb events", std::to_string(r.tlb_flush_events));
  row("messages", fmt::format("client {}  master {}", r.client_messages, r.master_requests));
  row("batches", fmt::format("{} (max {})", r.batches, r.max_batch));
  row("master busy", fmt::format("{:.1f}%", 100 * r.master_busy));
  row("implied cap", fmt::format("{:.0f} req/s", r.implied_cap));
  row("files after", std::to_string(r.files_after));
  return out;
}

}  // namespace kucofs::harness
