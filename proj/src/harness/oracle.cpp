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

#include "kucofs/harness/oracle.hpp"

#include <chrono>
#include <random>
#include <thread>

#include <fmt/format.h>

#include "kucofs/filesystem.hpp"
#include "kucofs/harness/model_fs.hpp"
#include "kucofs/harness/state.hpp"
#include "kucofs/harness/trace.hpp"

namespace kucofs::harness {

namespace {

enum class Op { kCreat, kWrite, kRead, kUnlink, kMkdir, kRmdir, kRename, kReaddir, kStat };

struct GenOp {
  Op op = Op::kCreat;
  std::string path;
  std::string path2;
  std::uint64_t offset = 0;
  std::uint64_t size = 0;
  std::uint64_t seed = 0;
};

// Small name pools keep the tree bounded and make collisions (and hence
// error paths) common.
std::string random_path(std::mt19937_64& rng, bool dir_leaf) {
  std::string path;
  const int depth = std::uniform_int_distribution<int>(0, 2)(rng);
  for (int i = 0; i < depth; ++i) path += "/d" + std::to_string(rng() % 4);
  if (dir_leaf) return path + "/d" + std::to_string(rng() % 4);
  return path + "/f" + std::to_string(rng() % 12);
}

GenOp generate(std::mt19937_64& rng) {
  GenOp g;
  const int roll = std::uniform_int_distribution<int>(0, 99)(rng);
  if (roll < 20) {
    g.op = Op::kCreat;
  } else if (roll < 45) {
    g.op = Op::kWrite;
  } else if (roll < 60) {
    g.op = Op::kRead;
  } else if (roll < 68) {
    g.op = Op::kUnlink;
  } else if (roll < 75) {
    g.op = Op::kMkdir;
  } else if (roll < 79) {
    g.op = Op::kRmdir;
  } else if (roll < 87) {
    g.op = Op::kRename;
  } else if (roll < 95) {
    g.op = Op::kReaddir;
  } else {
    g.op = Op::kStat;
  }
  const bool dir = g.op == Op::kMkdir || g.op == Op::kRmdir || g.op == Op::kReaddir ||
                   ((g.op == Op::kRename || g.op == Op::kStat) && rng() % 4 == 0);
  g.path = random_path(rng, dir);
  if (g.op == Op::kReaddir && rng() % 4 == 0) g.path = g.path.substr(0, g.path.rfind('/'));
  if (g.path.empty()) g.path = "/";
  if (g.op == Op::kRename) g.path2 = random_path(rng, dir);
  if (g.op == Op::kWrite || g.op == Op::kRead) {
    const bool big = rng() % 16 == 0;
    g.offset = std::uniform_int_distribution<std::uint64_t>(0, big ? (1u << 20) : (64u << 10))(rng);
    if (rng() % 3 == 0) g.offset &= ~std::uint64_t{4095};
    g.size = std::uniform_int_distribution<std::uint64_t>(1, big ? (64u << 10) : (16u << 10))(rng);
    g.seed = rng();
  }
  return g;
}

std::string describe(const GenOp& g) {
  switch (g.op) {
    case Op::kCreat: return "creat " + g.path;
    case Op::kWrite: return fmt::format("write {} {} {}", g.path, g.offset, g.size);
    case Op::kRead: return fmt::format("read {} {} {}", g.path, g.offset, g.size);
    case Op::kUnlink: return "unlink " + g.path;
    case Op::kMkdir: return "mkdir " + g.path;
    case Op::kRmdir: return "rmdir " + g.path;
    case Op::kRename: return "rename " + g.path + " " + g.path2;
    case Op::kReaddir: return "readdir " + g.path;
    case Op::kStat: return "stat " + g.path;
  }
  return {};
}

Errc code(const Status& s) { return code_of(s); }
template <typename T>
Errc code(const Result<T>& r) {
  return r ? Errc::kOk : r.error();
}

struct Outcome {
  Errc status = Errc::kOk;
  std::vector<std::byte> bytes;
  std::vector<std::string> names;
  EntryState stat;
};

Outcome run_client(Client& c, const GenOp& g) {
  Outcome out;
  switch (g.op) {
    case Op::kCreat: {
      auto fd = c.creat(g.path);
      out.status = code(fd);
      if (fd) (void)c.close(*fd);
      break;
    }
    case Op::kWrite: {
      auto fd = c.open(g.path);
      out.status = code(fd);
      if (!fd) break;
      auto n = c.pwrite(*fd, seeded_bytes(g.seed, g.size), g.offset);
      out.status = code(n);
      (void)c.close(*fd);
      break;
    }
    case Op::kRead: {
      auto fd = c.open(g.path);
      out.status = code(fd);
      if (!fd) break;
      out.bytes.resize(g.size);
      auto n = c.pread(*fd, out.bytes, g.offset);
      out.status = code(n);
      out.bytes.resize(n ? *n : 0);
      (void)c.close(*fd);
      break;
    }
    case Op::kUnlink: out.status = code(c.unlink(g.path)); break;
    case Op::kMkdir: out.status = code(c.mkdir(g.path)); break;
    case Op::kRmdir: out.status = code(c.rmdir(g.path)); break;
    case Op::kRename: out.status = code(c.rename(g.path, g.path2)); break;
    case Op::kReaddir: {
      auto names = c.readdir(g.path);
      out.status = code(names);
      if (names) out.names = std::move(*names);
      break;
    }
    case Op::kStat: {
      auto st = c.stat(g.path);
      out.status = code(st);
      if (st) out.stat = {st->kind, st->kind == InodeKind::kDir ? 0 : st->size, 0};
      break;
    }
  }
  return out;
}

Outcome run_model(ModelFS& m, const GenOp& g) {
  Outcome out;
  switch (g.op) {
    case Op::kCreat: out.status = m.create(g.path); break;
    case Op::kWrite: out.status = m.write(g.path, g.offset, seeded_bytes(g.seed, g.size)); break;
    case Op::kRead: {
      auto r = m.read(g.path, g.offset, g.size);
      out.status = code(r);
      if (r) out.bytes = std::move(*r);
      break;
    }
    case Op::kUnlink: out.status = m.unlink(g.path); break;
    case Op::kMkdir: out.status = m.mkdir(g.path); break;
    case Op::kRmdir: out.status = m.rmdir(g.path); break;
    case Op::kRename: out.status = m.rename(g.path, g.path2); break;
    case Op::kReaddir: {
      auto r = m.readdir(g.path);
      out.status = code(r);
      if (r) out.names = std::move(*r);
      break;
    }
    case Op::kStat: {
      auto r = m.stat(g.path);
      out.status = code(r);
      if (r) out.stat = {r->kind, r->size, 0};
      break;
    }
  }
  return out;
}

// Path-level state as seen through the metadata store, for the paths an op
// touched.
Result<EntryState> fs_entry(FileSystem& fs, std::string_view path) {
  auto res = fs.metadata().resolve(path);
  if (!res) return res.error();
  if (!res->target) return Errc::kNotFound;
  if (res->target->kind == InodeKind::kDir) return EntryState{InodeKind::kDir, 0, 0};
  const auto bytes = read_file(*res->target, fs.region());
  return EntryState{InodeKind::kFile, bytes.size(), content_hash(bytes)};
}

void note(OracleReport& r, std::string what) {
  if (r.divergences++ == 0) r.first_divergence = std::move(what);
}

void single_thread(const OracleOptions& o, OracleReport& report) {
  FsOptions fo;
  fo.pmem_size = o.pmem_size;
  fo.region.backing_path = o.pmem_path;
  fo.threaded = false;
  fo.client.offload = o.offload;
  fo.client.lease_pages = 256;
  auto fs_r = FileSystem::format(fo);
  if (!fs_r) {
    note(report, fmt::format("format failed: {}", errc_name(fs_r.error())));
    return;
  }
  FileSystem& fs = **fs_r;
  ModelFS model;
  ModelFS replay;
  fs.master().set_commit_observer([&](const LogRecord& rec, std::span<const std::byte> data) {
    replay.apply(rec, data);
  });
  const std::uint64_t cmp0 = fs.metadata().stats().key_comparisons.load();
  {
    auto client = fs.connect();
    std::mt19937_64 rng(o.seed);
    for (std::uint64_t i = 0; i < o.ops; ++i) {
      const GenOp g = generate(rng);
      const Outcome got = run_client(*client, g);
      const Outcome want = run_model(model, g);
      if (got.status != want.status) {
        note(report, fmt::format("op {} {}: fs {} model {}", i, describe(g), errc_name(got.status),
                                 errc_name(want.status)));
      } else if (got.bytes != want.bytes || got.names != want.names || !(got.stat == want.stat)) {
        note(report, fmt::format("op {} {}: result differs", i, describe(g)));
      }
      for (const std::string* p : {&g.path, &g.path2}) {
        if (p->empty()) continue;
        auto a = fs_entry(fs, *p);
        auto b = model.stat(*p);
        if (code(a) != code(b) || (a && b && !(*a == *b))) {
          note(report, fmt::format("op {} {}: state of {} differs", i, describe(g), *p));
        }
      }
      if (o.full_every && (i + 1) % o.full_every == 0) {
        const FsState s = capture_state(fs.metadata(), fs.region());
        const FsState m = model.state();
        if (!(s == m)) note(report, fmt::format("after op {}: tree differs\n{}", i, s.diff(m)));
      }
    }
    report.client_messages = client->stats().messages;
  }
  const FsState s = capture_state(fs.metadata(), fs.region());
  if (!(s == model.state())) note(report, "final tree differs\n" + s.diff(model.state()));
  if (!(replay.state() == model.state())) note(report, "log replay differs\n" + replay.state().diff(model.state()));
  report.commits = replay.applied();
  report.master_requests = fs.master().stats().requests.load();
  report.creats = fs.master().stats().creats.load();
  report.key_comparisons = fs.metadata().stats().key_comparisons.load() - cmp0;
}

void multi_thread(const OracleOptions& o, OracleReport& report) {
  FsOptions fo;
  fo.pmem_size = o.pmem_size;
  fo.region.backing_path = o.pmem_path;
  fo.threaded = true;
  fo.client.offload = o.offload;
  fo.client.lease_pages = 256;
  auto fs_r = FileSystem::format(fo);
  if (!fs_r) {
    note(report, fmt::format("format failed: {}", errc_name(fs_r.error())));
    return;
  }
  FileSystem& fs = **fs_r;
  ModelFS replay;
  fs.master().set_commit_observer([&](const LogRecord& rec, std::span<const std::byte> data) {
    replay.apply(rec, data);
  });
  const std::uint64_t cmp0 = fs.metadata().stats().key_comparisons.load();
  std::vector<std::thread> threads;
  std::vector<std::uint64_t> messages(o.threads);
  for (unsigned t = 0; t < o.threads; ++t) {
    const std::uint64_t n = o.ops / o.threads + (t < o.ops % o.threads ? 1 : 0);
    threads.emplace_back([&, t, n] {
      auto client = fs.connect();
      std::mt19937_64 rng(o.seed * 1000003 + t);
      for (std::uint64_t i = 0; i < n; ++i) (void)run_client(*client, generate(rng));
      (void)client->exit();
      messages[t] = client->stats().messages;
    });
  }
  for (auto& th : threads) th.join();
  fs.stop();
  for (std::uint64_t m : messages) report.client_messages += m;
  report.master_requests = fs.master().stats().requests.load();
  // Registration and exit messages are included on both sides.
  if (report.client_messages != report.master_requests) {
    note(report, fmt::format("message identity: clients sent {}, master served {}", report.client_messages,
                             report.master_requests));
  }
  const FsState s = capture_state(fs.metadata(), fs.region());
  const FsState m = replay.state();
  if (!(s == m)) {
    const std::string d = s.diff(m, 1000);
    report.first_divergence = "final tree differs from log-order replay\n" + s.diff(m);
    report.divergences += std::count(d.begin(), d.end(), '\n');
  }
  report.commits = replay.applied();
  report.creats = fs.master().stats().creats.load();
  report.key_comparisons = fs.metadata().stats().key_comparisons.load() - cmp0;
}

}  // namespace

OracleReport run_oracle(const OracleOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  OracleReport report;
  report.ops = options.ops;
  report.threads = std::max(1u, options.threads);
  if (options.ops > 0) {
    if (report.threads == 1) {
      single_thread(options, report);
    } else {
      OracleOptions o = options;
      o.threads = report.threads;
      multi_thread(o, report);
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace kucofs::harness
