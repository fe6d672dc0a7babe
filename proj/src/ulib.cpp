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

#include "kucofs/ulib.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

#include "kucofs/codec.hpp"
#include "kucofs/hash.hpp"
#include "kucofs/oplog.hpp"

namespace kucofs {

namespace {

DentryHandle handle_of(const Dentry* d) {
  if (!d) return {};
  return {reinterpret_cast<std::uint64_t>(d), d->key, d->ino};
}

FileStat stat_of(const Inode& n) {
  return {n.ino, n.kind, n.size.load(std::memory_order_acquire), n.mtime.load(std::memory_order_acquire), n.mode};
}

}  // namespace

Client::Client(Region& region, MetadataStore& md, Channel& channel, std::function<void()> pump, ClientOptions options)
    : region_(region), md_(md), channel_(channel), pump_(std::move(pump)), options_(options), page_buf_(kPageSize) {
  auto id = md_.ebr().register_participant();
  if (!id) throw std::runtime_error("kucofs: too many clients");
  ebr_id_ = *id;
  Request req;
  req.op = Opcode::kRegister;
  const Response resp = call(req);
  std::memcpy(key_.data(), &resp.v[0], 8);
  std::memcpy(key_.data() + 8, &resp.v[1], 8);
}

Client::~Client() {
  if (!exited_) (void)exit();
  md_.ebr().unregister_participant(ebr_id_);
}

Response Client::call(Request& req) {
  req.seq = ++seq_;
  req.client = channel_.id();
  if (auto s = channel_.post(req); !s) {
    Response r;
    r.seq = req.seq;
    r.status = s.error();
    return r;
  }
  ++stats_.messages;
  ++stats_.by_op[static_cast<std::size_t>(req.op)];
  return channel_.wait_response(pump_);
}

Result<Client::Fd*> Client::lookup_fd(int fd) {
  auto it = fds_.find(fd);
  if (it == fds_.end()) return Errc::kBadFd;
  return &it->second;
}

// ---- namespace ---------------------------------------------------------------

Result<int> Client::open(std::string_view path, int flags, std::uint32_t mode) {
  Request req;
  req.op = Opcode::kOpen;
  req.mode = mode;
  if (flags & kOpenCreate) req.flags |= kFlagCreate;
  if (flags & kOpenExclusive) req.flags |= kFlagExclusive;
  Response resp;
  if (!options_.offload) {
    req.flags |= kFlagPaths;
    req.name = std::string(path);
    resp = call(req);
  } else {
    EpochGuard guard(md_.ebr(), ebr_id_);
    auto res = md_.resolve(path);
    if (!res) return res.error();
    if (res->leaf.empty()) return Errc::kIsADirectory;
    if (res->dentry) {
      if ((flags & kOpenCreate) && (flags & kOpenExclusive)) return Errc::kExists;
      if (res->target->kind == InodeKind::kDir) return Errc::kIsADirectory;
      req.target = handle_of(res->dentry);
      req.inode = {res->target->ino, res->target->generation};
    } else if (!(flags & kOpenCreate)) {
      return Errc::kNotFound;
    }
    req.parent = {res->parent->ino, res->parent->generation};
    req.pred = handle_of(res->pred);
    req.name = res->leaf;
    resp = call(req);
  }
  if (resp.status != Errc::kOk) return resp.status;
  const int fd = next_fd_++;
  fds_[fd] = Fd{resp.v[0], resp.v[1], 0, reinterpret_cast<LockRing*>(resp.v[2])};
  return fd;
}

Status Client::close(int fd) {
  auto f = lookup_fd(fd);
  if (!f) return f.error();
  Request req;
  req.op = Opcode::kClose;
  req.inode = {(*f)->ino, (*f)->gen};
  fds_.erase(fd);
  return status_from(call(req).status);
}

Status Client::make(std::string_view path, Opcode op, std::uint32_t mode) {
  Request req;
  req.op = op;
  req.mode = mode;
  if (!options_.offload) {
    req.flags = kFlagPaths;
    req.name = std::string(path);
    return status_from(call(req).status);
  }
  EpochGuard guard(md_.ebr(), ebr_id_);
  auto res = md_.resolve(path);
  if (!res) return res.error();
  if (res->leaf.empty() || res->dentry) return Errc::kExists;
  req.parent = {res->parent->ino, res->parent->generation};
  req.pred = handle_of(res->pred);
  req.name = res->leaf;
  return status_from(call(req).status);
}

Status Client::mkdir(std::string_view path, std::uint32_t mode) { return make(path, Opcode::kMkdir, mode); }

Status Client::remove(std::string_view path, Opcode op) {
  Request req;
  req.op = op;
  if (!options_.offload) {
    req.flags = kFlagPaths;
    req.name = std::string(path);
    return status_from(call(req).status);
  }
  EpochGuard guard(md_.ebr(), ebr_id_);
  auto res = md_.resolve(path);
  if (!res) return res.error();
  if (res->leaf.empty()) return Errc::kInvalidArgument;
  if (!res->dentry) return Errc::kNotFound;
  req.parent = {res->parent->ino, res->parent->generation};
  req.target = handle_of(res->dentry);
  req.inode = {res->target->ino, res->target->generation};
  req.name = res->leaf;
  return status_from(call(req).status);
}

Status Client::unlink(std::string_view path) { return remove(path, Opcode::kUnlink); }
Status Client::rmdir(std::string_view path) { return remove(path, Opcode::kRmdir); }

Status Client::rename(std::string_view from, std::string_view to) {
  Request req;
  req.op = Opcode::kRename;
  if (!options_.offload) {
    req.flags = kFlagPaths;
    req.name = std::string(from);
    req.name2 = std::string(to);
    return status_from(call(req).status);
  }
  EpochGuard guard(md_.ebr(), ebr_id_);
  auto src = md_.resolve(from);
  if (!src) return src.error();
  if (src->leaf.empty()) return Errc::kInvalidArgument;
  if (!src->dentry) return Errc::kNotFound;
  auto dst = md_.resolve(to);
  if (!dst) return dst.error();
  if (dst->leaf.empty() || dst->dentry) return Errc::kExists;
  req.parent = {src->parent->ino, src->parent->generation};
  req.target = handle_of(src->dentry);
  req.inode = {src->target->ino, src->target->generation};
  req.name = src->leaf;
  req.parent2 = {dst->parent->ino, dst->parent->generation};
  req.pred2 = handle_of(dst->pred);
  req.name2 = dst->leaf;
  return status_from(call(req).status);
}

Result<FileStat> Client::stat(std::string_view path) {
  EpochGuard guard(md_.ebr(), ebr_id_);
  auto res = md_.resolve(path);
  if (!res) return res.error();
  if (!res->target) return Errc::kNotFound;
  return stat_of(*res->target);
}

Result<FileStat> Client::fstat(int fd) {
  auto f = lookup_fd(fd);
  if (!f) return f.error();
  EpochGuard guard(md_.ebr(), ebr_id_);
  const Inode* n = md_.inode((*f)->ino);
  if (!n || n->generation != (*f)->gen) return Errc::kStaleHandle;
  return stat_of(*n);
}

Result<std::vector<std::string>> Client::readdir(std::string_view path) {
  EpochGuard guard(md_.ebr(), ebr_id_);
  auto res = md_.resolve(path);
  if (!res) return res.error();
  if (!res->target) return Errc::kNotFound;
  if (res->target->kind != InodeKind::kDir) return Errc::kNotADirectory;
  std::vector<std::string> names;
  res->target->dir->for_each_live([&](const Dentry& d) {
    if (md_.inode(d.ino)) names.push_back(d.name);
  });
  return names;
}

// ---- data ------------------------------------------------------------------

Status Client::seek(int fd, std::uint64_t offset) {
  auto f = lookup_fd(fd);
  if (!f) return f.error();
  (*f)->cursor = offset;
  return {};
}

Result<std::uint64_t> Client::read(int fd, std::span<std::byte> out) {
  auto f = lookup_fd(fd);
  if (!f) return f.error();
  auto n = pread(fd, out, (*f)->cursor);
  if (n) (*f)->cursor += *n;
  return n;
}

Result<std::uint64_t> Client::write(int fd, std::span<const std::byte> data) {
  auto f = lookup_fd(fd);
  if (!f) return f.error();
  auto n = pwrite(fd, data, (*f)->cursor);
  if (n) (*f)->cursor += *n;
  return n;
}

Result<std::uint64_t> Client::copy_out(const Inode& n, std::uint64_t file_size, std::uint64_t offset,
                                       std::span<std::byte> out) {
  auto snap = n.map->snapshot_read(offset, out.size(), file_size, options_.read_retry_cap);
  if (!snap) return snap.error();
  stats_.read_retries += snap->retries;
  std::uint64_t done = 0;
  for (const PageSlice& s : snap->slices) {
    if (s.page_no == 0) {
      std::memset(out.data() + done, 0, s.length);
    } else {
      std::memcpy(out.data() + done, region_.page(s.page_no) + s.offset, s.length);
    }
    done += s.length;
  }
  return done;
}

Result<std::uint64_t> Client::pread(int fd, std::span<std::byte> out, std::uint64_t offset) {
  auto f = lookup_fd(fd);
  if (!f) return f.error();
  if (out.empty()) return std::uint64_t{0};
  ++stats_.reads;
  EpochGuard guard(md_.ebr(), ebr_id_);
  const Inode* n = md_.inode((*f)->ino);
  if (!n || n->generation != (*f)->gen) return Errc::kStaleHandle;
  const std::uint64_t size = n->size.load(std::memory_order_acquire);
  if (offset >= size) return std::uint64_t{0};
  const std::uint64_t len = std::min<std::uint64_t>(out.size(), size - offset);
  auto got = copy_out(*n, size, offset, out.first(len));
  if (got || got.error() != Errc::kInconsistent) return got;

  ++stats_.fallback_reads;
  Request req;
  req.op = Opcode::kReadFallback;
  req.inode = {(*f)->ino, (*f)->gen};
  req.offset = offset;
  req.size = len;
  req.buffer = reinterpret_cast<std::uint64_t>(out.data());
  const Response resp = call(req);
  if (resp.status != Errc::kOk) return resp.status;
  return resp.v[0];
}

Status Client::refill(std::uint64_t need) {
  while (pool_pages() < need) {
    Request req;
    req.op = Opcode::kLeasePages;
    req.count = std::min<std::uint64_t>(4096, std::max(options_.lease_pages, need - pool_pages()));
    const Response resp = call(req);
    if (resp.status != Errc::kOk) return resp.status;
    ++stats_.leases;
    std::vector<PageRun> runs;
    const std::uint64_t nruns = resp.v[0];
    if (nruns <= 2) {
      for (std::uint64_t i = 0; i < nruns; ++i) runs.push_back({resp.v[1 + 2 * i], resp.v[2 + 2 * i]});
    } else {
      const std::byte* list = region_.page(resp.v[1]);
      for (std::uint64_t i = 0; i < nruns; ++i) runs.push_back({get_u64(list + 12 * i), get_u32(list + 12 * i + 8)});
    }
    // Fresh leases go first so the next write gets few runs.
    pool_.insert(pool_.begin(), runs.begin(), runs.end());
  }
  return {};
}

std::vector<PageRun> Client::take_pages(std::uint64_t n) {
  std::vector<PageRun> out;
  std::size_t i = 0;
  while (n > 0 && i < pool_.size()) {
    PageRun& r = pool_[i];
    const std::uint64_t k = std::min(n, r.count);
    out.push_back({r.page_no, k});
    r.page_no += k;
    r.count -= k;
    n -= k;
    if (r.count == 0) ++i;
  }
  pool_.erase(pool_.begin(), pool_.begin() + static_cast<std::ptrdiff_t>(i));
  return out;
}

void Client::give_back(std::span<const PageRun> runs) { pool_.insert(pool_.end(), runs.begin(), runs.end()); }

Result<std::uint64_t> Client::pwrite(int fd, std::span<const std::byte> data, std::uint64_t offset) {
  auto f = lookup_fd(fd);
  if (!f) return f.error();
  std::uint64_t done = 0;
  while (done < data.size()) {
    const std::uint64_t n = std::min<std::uint64_t>(kMaxWriteChunk, data.size() - done);
    auto w = write_chunk(**f, data.subspan(done, n), offset + done);
    if (!w) return done > 0 ? Result<std::uint64_t>(done) : w;
    done += *w;
  }
  return done;
}

Result<std::uint64_t> Client::write_chunk(Fd& f, std::span<const std::byte> data, std::uint64_t offset) {
  const std::uint64_t n = data.size();
  if (offset > kMaxFilePages * kPageSize || n > kMaxFilePages * kPageSize - offset) return Errc::kFileTooLarge;
  if (!f.ring) return Errc::kBadFd;
  const std::uint64_t first = offset / kPageSize;
  const std::uint64_t np = (offset + n - 1) / kPageSize - first + 1;
  if (auto s = refill(np + 1); !s) return s.error();

  std::vector<PageRun> dest = take_pages(np);
  if (dest.size() > kMaxRunsPerEntry) {
    give_back(dest);
    if (auto s = refill(pool_pages() + np + 1); !s) return s.error();
    dest = take_pages(np);
    if (dest.size() > kMaxRunsPerEntry) {
      give_back(dest);
      return Errc::kOutOfSpace;
    }
  }

  auto grant = f.ring->acquire(first * kPageSize, np * kPageSize, options_.lock_lease_ns);
  if (!grant) {
    give_back(dest);
    return grant.error();
  }
  const std::uint64_t version = grant->version;
  auto fail = [&](Errc e) -> Result<std::uint64_t> {
    (void)f.ring->release(version);
    give_back(dest);
    return e;
  };

  const Actor me = Actor::client(channel_.id());
  const std::vector<std::uint64_t> pages = pages_from_runs(dest);
  {
    EpochGuard guard(md_.ebr(), ebr_id_);
    const Inode* node = md_.inode(f.ino);
    if (!node || node->generation != f.gen) return fail(Errc::kStaleHandle);
    const std::uint64_t size = node->size.load(std::memory_order_acquire);
    for (std::uint64_t i = 0; i < np; ++i) {
      const std::uint64_t page_start = (first + i) * kPageSize;
      const std::uint64_t lo = std::max(offset, page_start);
      const std::uint64_t hi = std::min(offset + n, page_start + kPageSize);
      std::span<const std::byte> src;
      if (lo == page_start && hi == page_start + kPageSize) {
        src = data.subspan(lo - offset, kPageSize);
      } else {
        std::fill(page_buf_.begin(), page_buf_.end(), std::byte{0});
        if (page_start < size) {
          auto got = copy_out(*node, size, page_start, page_buf_);
          if (!got) return fail(got.error());
        }
        std::memcpy(page_buf_.data() + (lo - page_start), data.data() + (lo - offset), hi - lo);
        src = page_buf_;
      }
      const std::uint64_t addr = region_.layout().page_addr(pages[i]);
      if (auto s = region_.checked_store(me, addr, src); !s) return fail(Errc::kProtectionFault);
      region_.flush(addr, kPageSize);
    }
  }

  Request req;
  req.op = Opcode::kWriteCommit;
  req.inode = {f.ino, f.gen};
  req.offset = offset;
  req.size = n;
  req.version = version;
  std::vector<PageRun> scratch;
  if (dest.size() > kInlineRuns) {
    scratch = take_pages(1);
    std::vector<std::byte> list;
    ByteWriter w(list);
    for (const PageRun& r : dest) {
      w.u64(r.page_no);
      w.u32(static_cast<std::uint32_t>(r.count));
    }
    const std::uint64_t addr = region_.layout().page_addr(scratch.front().page_no);
    if (auto s = region_.checked_store(me, addr, list); !s) {
      give_back(scratch);
      return fail(Errc::kProtectionFault);
    }
    req.scratch_page = scratch.front().page_no;
    req.count = dest.size();
  } else {
    req.runs = dest;
  }
  region_.fence();

  ++stats_.writes;
  const Response resp = call(req);
  give_back(scratch);
  if (resp.status != Errc::kOk) {
    // The master has already released the version.
    give_back(dest);
    return resp.status;
  }
  return n;
}

Status Client::exit() {
  if (exited_) return {};
  std::vector<int> open;
  for (const auto& [fd, f] : fds_) open.push_back(fd);
  for (int fd : open) (void)close(fd);
  Request req;
  req.op = Opcode::kClose;
  req.flags = kFlagExit;
  req.inode.ino = ~0ULL;
  const Response resp = call(req);
  pool_.clear();
  exited_ = true;
  return status_from(resp.status);
}

}  // namespace kucofs
