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

#include "kucofs/master.hpp"

#include <algorithm>
#include <cstring>

#include "kucofs/codec.hpp"
#include "kucofs/hash.hpp"

namespace kucofs {

std::uint64_t wall_ns() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::system_clock::now().time_since_epoch())
          .count());
}

namespace {

struct ResKey {
  std::uint8_t kind = 0;  // 0 global, 1 inode, 2 dentry
  std::uint64_t a = 0;
  std::string name;
  bool exclusive = false;
};

bool conflicts(const std::vector<ResKey>& held, const std::vector<ResKey>& want) {
  for (const ResKey& w : want) {
    for (const ResKey& h : held) {
      if (h.kind == w.kind && h.a == w.a && h.name == w.name && (h.exclusive || w.exclusive)) return true;
    }
  }
  return false;
}

std::uint64_t pages_spanned(std::uint64_t offset, std::uint64_t size) {
  if (size == 0) return 0;
  return (offset + size - 1) / kPageSize - offset / kPageSize + 1;
}

}  // namespace

struct Master::Pending {
  Channel* ch = nullptr;
  Request req;
  Errc status = Errc::kOk;
  bool logged = false;
  LogRecord rec;
  Response resp;
  std::vector<ResKey> keys;

  Inode* parent = nullptr;
  Inode* parent2 = nullptr;
  Inode* inode = nullptr;
  const Dentry* hint = nullptr;
  const Dentry* succ = nullptr;
  const Dentry* target = nullptr;
  const Dentry* hint2 = nullptr;
  bool open_existing = false;
  std::vector<std::uint64_t> pages;
  std::vector<PageRun> runs;
  LockRing* ring = nullptr;
};

Master::Master(Region& region, MetadataStore& md, PageAllocator& alloc, OpLog& log, ChecksumKey key,
               MasterOptions options)
    : region_(region), md_(md), alloc_(alloc), log_(log), key_(key), options_(options) {
  if (options_.batch_max == 0) options_.batch_max = 1;
  md_.set_page_release([this](std::span<const std::uint64_t> pages) {
    std::vector<std::uint64_t> sorted(pages.begin(), pages.end());
    std::sort(sorted.begin(), sorted.end());
    alloc_.free(runs_from_pages(sorted));
  });
  entries_at_checkpoint_ = log_.appended_entries();
}

Master::~Master() { md_.set_page_release(nullptr); }

Channel& Master::attach(ClientId id) {
  std::lock_guard lock(channels_mu_);
  channels_.push_back(std::make_unique<Channel>(id, bell_));
  channels_version_.fetch_add(1, std::memory_order_release);
  return *channels_.back();
}

std::uint64_t Master::leased_pages(ClientId id) const {
  auto it = leased_.find(id);
  return it == leased_.end() ? 0 : it->second.size();
}

const Inode* Master::live_inode(const InodeHandle& h) const {
  const Inode* n = md_.inode(h.ino);
  if (!n || n->generation != h.gen) return nullptr;
  return n;
}

const Dentry* Master::live_dentry(const DentryHandle& h, std::uint64_t dir) const {
  const auto* d = reinterpret_cast<const Dentry*>(h.node);
  if (!d || !md_.known_dentry(d)) return nullptr;
  if (d->dir != dir || d->key != h.key || d->ino != h.ino || !d->live()) return nullptr;
  return d;
}

// Fills the handles a client would have sent, with the same error
// precedence as the client library.
Errc Master::resolve_paths(Request& q) {
  auto lookup = [&](const std::string& path) {
    std::uint64_t cmps = 0;
    auto res = md_.resolve(path, &cmps);
    md_.stats().key_comparisons.fetch_add(cmps, std::memory_order_relaxed);
    return res;
  };
  auto dentry = [](const Dentry* d) -> DentryHandle {
    if (!d) return {};
    return {reinterpret_cast<std::uint64_t>(d), d->key, d->ino};
  };
  auto res = lookup(q.name);
  if (!res) return res.error();
  const bool create = q.flags & kFlagCreate;
  switch (q.op) {
    case Opcode::kOpen:
      if (res->leaf.empty()) return Errc::kIsADirectory;
      if (res->dentry) {
        if (create && (q.flags & kFlagExclusive)) return Errc::kExists;
        if (res->target->kind == InodeKind::kDir) return Errc::kIsADirectory;
      } else if (!create) {
        return Errc::kNotFound;
      }
      break;
    case Opcode::kCreat:
    case Opcode::kMkdir:
      if (res->leaf.empty() || res->dentry) return Errc::kExists;
      break;
    case Opcode::kUnlink:
    case Opcode::kRmdir:
    case Opcode::kRename:
      if (res->leaf.empty()) return Errc::kInvalidArgument;
      if (!res->dentry) return Errc::kNotFound;
      break;
    default:
      return Errc::kInvalidArgument;
  }
  q.parent = {res->parent->ino, res->parent->generation};
  q.pred = dentry(res->pred);
  q.target = dentry(res->dentry);
  if (res->target && res->dentry) q.inode = {res->target->ino, res->target->generation};
  q.name = res->leaf;
  if (q.op == Opcode::kRename) {
    auto dst = lookup(q.name2);
    if (!dst) return dst.error();
    if (dst->leaf.empty() || dst->dentry) return Errc::kExists;
    q.parent2 = {dst->parent->ino, dst->parent->generation};
    q.pred2 = dentry(dst->pred);
    q.name2 = dst->leaf;
  }
  return Errc::kOk;
}

// ---- batch assembly --------------------------------------------------------

void Master::collect(std::vector<Pending>& batch) {
  if (channels_version_.load(std::memory_order_acquire) != snapshot_version_) {
    std::lock_guard lock(channels_mu_);
    snapshot_.clear();
    for (auto& c : channels_) snapshot_.push_back(c.get());
    snapshot_version_ = channels_version_.load(std::memory_order_relaxed);
  }
  const std::size_t n = snapshot_.size();
  if (n == 0) return;
  std::vector<ResKey> held;
  bool progress = true;
  bool cut = false;
  while (!cut && progress && batch.size() < options_.batch_max) {
    progress = false;
    for (std::size_t k = 0; k < n && batch.size() < options_.batch_max; ++k) {
      Channel* ch = snapshot_[(rr_ + k) % n];
      const Request* r = ch->peek();
      if (!r) continue;
      Pending p;
      p.ch = ch;
      p.req = *r;

      // Path mode: the master resolves on behalf of the client.
      if (p.req.flags & kFlagPaths && p.req.flags != 0xffffffff) p.status = resolve_paths(p.req);

      const Request& q = p.req;
      p.keys.push_back({0, 0, {}, false});
      if (p.status == Errc::kOk) {
        switch (q.op) {
          case Opcode::kCreat:
          case Opcode::kMkdir:
            p.keys.push_back({1, q.parent.ino, {}, false});
            p.keys.push_back({2, q.parent.ino, q.name, true});
            break;
          case Opcode::kOpen:
            p.keys.push_back({1, q.parent.ino, {}, false});
            p.keys.push_back({2, q.parent.ino, q.name, true});
            if (q.target.node) p.keys.push_back({1, q.target.ino, {}, false});
            break;
          case Opcode::kUnlink:
          case Opcode::kRmdir:
            p.keys.push_back({1, q.parent.ino, {}, false});
            p.keys.push_back({2, q.parent.ino, q.name, true});
            p.keys.push_back({1, q.target.ino, {}, true});
            break;
          case Opcode::kRename: {
            const Inode* src = md_.inode(q.target.ino);
            if (src && src->kind == InodeKind::kDir) {
              p.keys[0].exclusive = true;
            } else {
              p.keys.push_back({1, q.parent.ino, {}, false});
              p.keys.push_back({1, q.parent2.ino, {}, false});
              p.keys.push_back({2, q.parent.ino, q.name, true});
              p.keys.push_back({2, q.parent2.ino, q.name2, true});
              p.keys.push_back({1, q.target.ino, {}, false});
            }
            break;
          }
          case Opcode::kWriteCommit:
          case Opcode::kClose:
          case Opcode::kReadFallback:
            p.keys.push_back({1, q.inode.ino, {}, false});
            break;
          default:
            break;
        }
      }
      if (!batch.empty() && conflicts(held, p.keys)) {
        cut = true;
        break;
      }
      ch->pop();
      ++consumed_;
      held.insert(held.end(), p.keys.begin(), p.keys.end());
      if (p.status == Errc::kOk) validate(p);
      batch.push_back(std::move(p));
      progress = true;
      if (held.front().exclusive) {
        cut = true;
        break;
      }
    }
  }
  rr_ = (rr_ + 1) % n;
}

// ---- phase 1 ---------------------------------------------------------------

void Master::validate(Pending& p) {
  switch (p.req.op) {
    case Opcode::kCreat:
    case Opcode::kMkdir:
      validate_create(p);
      break;
    case Opcode::kOpen:
      validate_open(p);
      break;
    case Opcode::kUnlink:
    case Opcode::kRmdir:
      validate_remove(p);
      break;
    case Opcode::kRename:
      validate_rename(p);
      break;
    case Opcode::kWriteCommit:
      validate_write(p);
      break;
    case Opcode::kRegister:
      if (p.req.flags == 0xffffffff) p.status = Errc::kInvalidArgument;
      break;
    default:
      break;
  }
}

void Master::validate_create(Pending& p) {
  const Request& q = p.req;
  const Inode* parent = live_inode(q.parent);
  if (!parent) {
    p.status = Errc::kNotFound;
    return;
  }
  if (parent->kind != InodeKind::kDir) {
    p.status = Errc::kNotADirectory;
    return;
  }
  if (auto s = validate_name(q.name); !s) {
    p.status = s.error();
    return;
  }
  const auto* hint = reinterpret_cast<const Dentry*>(q.pred.node);
  auto ip = md_.insertion_point(*parent->dir, fnv1a64(q.name), q.name, hint);
  if (!ip) {
    p.status = ip.error();
    return;
  }
  p.parent = md_.mutable_inode(parent->ino);
  p.hint = *ip;
  p.succ = p.hint->next[0].load(std::memory_order_acquire);
  const auto [ino, gen] = md_.reserve_ino();
  const bool is_dir = q.op == Opcode::kMkdir;
  p.rec = LogRecord{};
  p.rec.type = is_dir ? LogType::kMkdir : LogType::kCreat;
  p.rec.ino = ino;
  p.rec.gen = gen;
  p.rec.parent = parent->ino;
  p.rec.mode = q.mode;
  p.rec.mtime = wall_ns();
  p.rec.name = q.name;
  p.logged = true;
}

void Master::validate_open(Pending& p) {
  const Request& q = p.req;
  const Inode* parent = live_inode(q.parent);
  if (!parent) {
    p.status = Errc::kNotFound;
    return;
  }
  if (parent->kind != InodeKind::kDir) {
    p.status = Errc::kNotADirectory;
    return;
  }
  const Dentry* d = q.target.node ? live_dentry(q.target, parent->ino) : nullptr;
  if (!d && (q.flags & kFlagCreate)) {
    validate_create(p);
    if (p.status != Errc::kExists || (q.flags & kFlagExclusive)) return;
    // Created by someone else since the client looked.
    p.status = Errc::kOk;
    d = md_.find(*parent->dir, fnv1a64(q.name), q.name);
  }
  if (!d) {
    p.status = Errc::kNotFound;
    return;
  }
  if (q.flags & kFlagExclusive) {
    p.status = Errc::kExists;
    return;
  }
  Inode* n = md_.mutable_inode(d->ino);
  if (!n || n->dirty.load(std::memory_order_relaxed)) {
    p.status = Errc::kNotFound;
    return;
  }
  if (n->kind == InodeKind::kDir) {
    p.status = Errc::kIsADirectory;
    return;
  }
  p.inode = n;
  p.open_existing = true;
}

void Master::validate_remove(Pending& p) {
  const Request& q = p.req;
  const Inode* parent = live_inode(q.parent);
  if (!parent) {
    p.status = Errc::kNotFound;
    return;
  }
  if (parent->kind != InodeKind::kDir) {
    p.status = Errc::kNotADirectory;
    return;
  }
  const Dentry* d = live_dentry(q.target, parent->ino);
  if (!d || d->name != q.name) {
    p.status = Errc::kNotFound;
    return;
  }
  const Inode* n = live_inode({d->ino, q.inode.gen});
  if (!n) {
    p.status = Errc::kNotFound;
    return;
  }
  const bool rmdir = q.op == Opcode::kRmdir;
  if (!rmdir && n->kind == InodeKind::kDir) {
    p.status = Errc::kIsADirectory;
    return;
  }
  if (rmdir && n->kind != InodeKind::kDir) {
    p.status = Errc::kNotADirectory;
    return;
  }
  if (rmdir && n->dir->has_live_entries()) {
    p.status = Errc::kNotEmpty;
    return;
  }
  p.target = d;
  p.rec = LogRecord{};
  p.rec.type = rmdir ? LogType::kRmdir : LogType::kUnlink;
  p.rec.ino = n->ino;
  p.rec.parent = parent->ino;
  p.rec.name = d->name;
  p.logged = true;
}

void Master::validate_rename(Pending& p) {
  const Request& q = p.req;
  const Inode* sp = live_inode(q.parent);
  const Inode* dp = live_inode(q.parent2);
  if (!sp || !dp) {
    p.status = Errc::kNotFound;
    return;
  }
  if (sp->kind != InodeKind::kDir || dp->kind != InodeKind::kDir) {
    p.status = Errc::kNotADirectory;
    return;
  }
  const Dentry* d = live_dentry(q.target, sp->ino);
  if (!d || d->name != q.name) {
    p.status = Errc::kNotFound;
    return;
  }
  const Inode* n = live_inode({d->ino, q.inode.gen});
  if (!n) {
    p.status = Errc::kNotFound;
    return;
  }
  if (auto s = validate_name(q.name2); !s) {
    p.status = s.error();
    return;
  }
  if (n->kind == InodeKind::kDir && md_.is_descendant(dp->ino, n->ino)) {
    p.status = Errc::kInvalidArgument;
    return;
  }
  auto ip = md_.insertion_point(*dp->dir, fnv1a64(q.name2), q.name2, reinterpret_cast<const Dentry*>(q.pred2.node));
  if (!ip) {
    p.status = ip.error();
    return;
  }
  p.target = d;
  p.hint2 = *ip;
  p.rec = LogRecord{};
  p.rec.type = LogType::kRename;
  p.rec.ino = n->ino;
  p.rec.parent = sp->ino;
  p.rec.parent2 = dp->ino;
  p.rec.name = q.name;
  p.rec.name2 = q.name2;
  p.logged = true;
}

void Master::validate_write(Pending& p) {
  const Request& q = p.req;
  const Inode* cn = live_inode(q.inode);
  if (!cn) {
    p.status = Errc::kNotFound;
    return;
  }
  Inode* n = md_.mutable_inode(cn->ino);
  p.ring = n->ring.load(std::memory_order_acquire);
  if (n->kind != InodeKind::kFile) {
    p.status = Errc::kIsADirectory;
    return;
  }
  if (!p.ring) {
    p.status = Errc::kBadFd;
    return;
  }
  const ClientId client = p.ch->id();
  auto& mine = leased_[client];
  auto owned = [&](std::uint64_t page) {
    return page != 0 && page < alloc_.census().total && alloc_.state(page) == PageState::kLeased &&
           region_.permissions().writable_by(page, client) && mine.count(page) != 0;
  };

  if (q.scratch_page) {
    if (!owned(q.scratch_page) || q.count > kMaxRunsPerEntry) {
      p.status = q.count > kMaxRunsPerEntry ? Errc::kInvalidArgument : Errc::kLeaseViolation;
      if (p.status == Errc::kLeaseViolation) stats_.protection_events.fetch_add(1, std::memory_order_relaxed);
      return;
    }
    const std::byte* list = region_.page(q.scratch_page);
    p.runs.resize(q.count);
    for (std::uint64_t i = 0; i < q.count; ++i) {
      p.runs[i].page_no = get_u64(list + 12 * i);
      p.runs[i].count = get_u32(list + 12 * i + 8);
    }
  } else {
    p.runs = q.runs;
  }
  if (p.runs.size() > kMaxRunsPerEntry) {
    p.status = Errc::kInvalidArgument;
    return;
  }
  if (q.size == 0 || q.offset > kMaxFilePages * kPageSize || q.size > kMaxFilePages * kPageSize - q.offset) {
    p.status = q.size == 0 ? Errc::kInvalidArgument : Errc::kFileTooLarge;
    return;
  }
  if (total_pages(p.runs) != pages_spanned(q.offset, q.size) || total_pages(p.runs) > kMaxFilePages) {
    p.status = Errc::kInvalidArgument;
    return;
  }
  p.pages = pages_from_runs(p.runs);
  std::vector<std::uint64_t> sorted = p.pages;
  std::sort(sorted.begin(), sorted.end());
  bool ok = std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
  for (std::uint64_t page : sorted) {
    if (!ok) break;
    ok = owned(page);
  }
  if (!ok) {
    p.status = Errc::kLeaseViolation;
    stats_.protection_events.fetch_add(1, std::memory_order_relaxed);
    return;
  }
  p.inode = n;
  p.rec = LogRecord{};
  p.rec.type = LogType::kWrite;
  p.rec.ino = n->ino;
  p.rec.offset = q.offset;
  p.rec.size = q.size;
  p.rec.version = q.version;
  p.rec.mtime = wall_ns();
  p.rec.runs = p.runs;
  p.logged = true;
}

// ---- phase 3 ---------------------------------------------------------------

void Master::release_version(const Pending& p) {
  if (!p.ring) return;
  if (!p.ring->release(p.req.version)) stats_.stale_releases.fetch_add(1, std::memory_order_relaxed);
}

void Master::apply_open(Pending& p, Inode* n) {
  ++n->open_count;
  LockRing* ring = n->ring.load(std::memory_order_relaxed);
  if (!ring) {
    ring = new LockRing(key_, n->max_version, options_.ring_slots);
    n->ring.store(ring, std::memory_order_release);
  }
  p.resp.v[0] = n->ino;
  p.resp.v[1] = n->generation;
  p.resp.v[2] = reinterpret_cast<std::uint64_t>(ring);
}

void Master::notify_commit(const LogRecord& rec) {
  if (!observer_) return;
  if (rec.type != LogType::kWrite) {
    observer_(rec, {});
    return;
  }
  std::vector<std::byte> data(rec.size);
  const auto pages = pages_from_runs(rec.runs);
  const std::uint64_t first = rec.offset / kPageSize;
  for (std::size_t i = 0; i < pages.size(); ++i) {
    const std::uint64_t page_start = (first + i) * kPageSize;
    const std::uint64_t lo = std::max(rec.offset, page_start);
    const std::uint64_t hi = std::min(rec.offset + rec.size, page_start + kPageSize);
    std::memcpy(data.data() + (lo - rec.offset), region_.page(pages[i]) + (lo - page_start), hi - lo);
  }
  observer_(rec, data);
}

void Master::apply(Pending& p) {
  const Request& q = p.req;
  if (p.status != Errc::kOk) {
    if (q.op == Opcode::kWriteCommit) release_version(p);
    return;
  }
  switch (q.op) {
    case Opcode::kCreat:
    case Opcode::kMkdir:
    case Opcode::kOpen: {
      if (p.open_existing) {
        apply_open(p, p.inode);
        break;
      }
      auto made = md_.create(p.rec.parent, p.rec.name, p.rec.ino, p.rec.gen,
                             p.rec.type == LogType::kMkdir ? InodeKind::kDir : InodeKind::kFile, p.rec.mode,
                             p.rec.mtime, p.hint, p.succ, true);
      if (!made) {
        p.status = made.error();
        break;
      }
      stats_.creats.fetch_add(1, std::memory_order_relaxed);
      p.resp.v[0] = p.rec.ino;
      p.resp.v[1] = p.rec.gen;
      if (q.op == Opcode::kOpen) apply_open(p, *made);
      notify_commit(p.rec);
      break;
    }
    case Opcode::kUnlink:
    case Opcode::kRmdir:
      if (auto s = md_.remove(p.rec.parent, p.rec.name,
                              q.op == Opcode::kRmdir ? InodeKind::kDir : InodeKind::kFile, p.target);
          !s) {
        p.status = s.error();
        break;
      }
      notify_commit(p.rec);
      break;
    case Opcode::kRename:
      if (auto s = md_.rename(p.rec.parent, p.rec.name, p.rec.parent2, p.rec.name2, p.target, p.hint2); !s) {
        p.status = s.error();
        break;
      }
      notify_commit(p.rec);
      break;
    case Opcode::kWriteCommit: {
      if (auto s = md_.write(p.rec.ino, p.rec.offset, p.rec.size, p.rec.version, p.rec.mtime, p.pages); !s) {
        p.status = s.error();
        release_version(p);
        break;
      }
      alloc_.commit(p.runs);
      auto& mine = leased_[p.ch->id()];
      for (std::uint64_t page : p.pages) mine.erase(page);
      release_version(p);
      stats_.write_commits.fetch_add(1, std::memory_order_relaxed);
      p.resp.v[0] = p.inode->size.load(std::memory_order_relaxed);
      notify_commit(p.rec);
      break;
    }
    case Opcode::kLeasePages:
      do_lease(p);
      break;
    case Opcode::kClose:
      do_close(p);
      break;
    case Opcode::kReadFallback:
      do_read_fallback(p);
      break;
    case Opcode::kRegister:
      std::memcpy(&p.resp.v[0], key_.data(), 8);
      std::memcpy(&p.resp.v[1], key_.data() + 8, 8);
      p.resp.v[2] = p.ch->id();
      break;
  }
}

void Master::do_lease(Pending& p) {
  const std::uint64_t count = p.req.count;
  if (count == 0 || count > 4096) {
    p.status = Errc::kInvalidArgument;
    return;
  }
  auto runs = alloc_.alloc_pages(count);
  for (int i = 0; i < 3 && !runs && runs.error() == Errc::kOutOfSpace; ++i) {
    md_.ebr().advance();
    runs = alloc_.alloc_pages(count);
  }
  if (!runs) {
    p.status = runs.error();
    return;
  }
  const ClientId client = p.ch->id();
  region_.permissions().set_permission(*runs, PageMode::kWritable, client);
  auto& mine = leased_[client];
  for (const PageRun& r : *runs) {
    for (std::uint64_t pg = r.page_no; pg < r.page_no + r.count; ++pg) mine.insert(pg);
  }
  stats_.leases.fetch_add(1, std::memory_order_relaxed);
  p.resp.v[0] = runs->size();
  if (runs->size() <= 2) {
    for (std::size_t i = 0; i < runs->size(); ++i) {
      p.resp.v[1 + 2 * i] = (*runs)[i].page_no;
      p.resp.v[2 + 2 * i] = (*runs)[i].count;
    }
  } else {
    // Run list goes into the first leased page.
    std::vector<std::byte> list;
    ByteWriter w(list);
    for (const PageRun& r : *runs) {
      w.u64(r.page_no);
      w.u32(static_cast<std::uint32_t>(r.count));
    }
    const std::uint64_t page = runs->front().page_no;
    if (list.size() > kPageSize) list.resize(kPageSize - kPageSize % 12);
    region_.store(region_.layout().page_addr(page), list);
    p.resp.v[1] = page;
  }
}

void Master::return_leases(ClientId client) {
  auto it = leased_.find(client);
  if (it == leased_.end()) return;
  std::vector<std::uint64_t> pages(it->second.begin(), it->second.end());
  leased_.erase(it);
  if (pages.empty()) return;
  const auto runs = runs_from_pages(pages);
  region_.permissions().set_permission(runs, PageMode::kReadOnly, 0);
  alloc_.free(runs);
}

void Master::do_close(Pending& p) {
  const Request& q = p.req;
  if (q.inode.ino != ~0ULL) {
    Inode* n = md_.mutable_inode(q.inode.ino);
    if (n && n->generation == q.inode.gen && n->open_count > 0) {
      if (--n->open_count == 0) {
        LockRing* ring = n->ring.exchange(nullptr, std::memory_order_acq_rel);
        if (ring) {
          n->max_version = std::max(n->max_version, ring->current_version() & kVersionMask);
          md_.ebr().retire([ring] { delete ring; });
          stats_.rings_retired.fetch_add(1, std::memory_order_relaxed);
        }
      }
    }
  }
  if (q.flags & kFlagExit) return_leases(p.ch->id());
}

void Master::do_read_fallback(Pending& p) {
  const Request& q = p.req;
  const Inode* n = live_inode(q.inode);
  if (!n) {
    p.status = Errc::kNotFound;
    return;
  }
  if (n->kind != InodeKind::kFile) {
    p.status = Errc::kIsADirectory;
    return;
  }
  auto snap = n->map->snapshot_read(q.offset, q.size, n->size.load(std::memory_order_acquire));
  if (!snap) {
    p.status = snap.error();
    return;
  }
  auto* out = reinterpret_cast<std::byte*>(q.buffer);
  std::uint64_t done = 0;
  for (const PageSlice& s : snap->slices) {
    if (s.page_no == 0) {
      std::memset(out + done, 0, s.length);
    } else {
      std::memcpy(out + done, region_.page(s.page_no) + s.offset, s.length);
    }
    done += s.length;
  }
  stats_.fallback_reads.fetch_add(1, std::memory_order_relaxed);
  p.resp.v[0] = done;
}

void Master::respond(Pending& p) {
  p.resp.seq = p.req.seq;
  p.resp.status = p.status;
  p.ch->respond(p.resp);
}

// ---- loop ------------------------------------------------------------------

std::size_t Master::run_once() {
  if (checkpoint_requested_.exchange(false, std::memory_order_acq_rel)) (void)checkpoint();

  if (options_.gather && options_.batch_max > 1 && recent_count_.size() > 1) {
    const std::uint64_t target = consumed_ + std::min(recent_count_.size(), options_.batch_max);
    if (bell_.rings() < target) bell_.wait_until(target, options_.gather_timeout);
  }

  std::vector<Pending> batch;
  collect(batch);
  if (batch.empty()) {
    recent_.clear();
    recent_count_.clear();
    return 0;
  }
  const auto t0 = std::chrono::steady_clock::now();

  // Committed pages turn read-only before their log entries persist; one
  // permission call covers the whole batch.
  std::vector<PageRun> revoke;
  for (const Pending& p : batch) {
    if (p.logged && p.req.op == Opcode::kWriteCommit) revoke.insert(revoke.end(), p.runs.begin(), p.runs.end());
  }
  if (!revoke.empty()) region_.permissions().set_permission(revoke, PageMode::kReadOnly, 0);

  std::vector<LogRecord> records;
  for (const Pending& p : batch) {
    if (p.logged) records.push_back(p.rec);
  }
  if (!records.empty()) {
    auto appended = log_.append_batch(records);
    if (!appended && appended.error() == Errc::kLogFull) {
      if (checkpoint()) appended = log_.append_batch(records);
    }
    if (!appended) {
      for (Pending& p : batch) {
        if (!p.logged) continue;
        p.logged = false;
        p.status = appended.error();
        if (p.req.op == Opcode::kWriteCommit) {
          region_.permissions().set_permission(p.runs, PageMode::kWritable, p.ch->id());
        } else if (p.rec.type == LogType::kCreat || p.rec.type == LogType::kMkdir) {
          md_.unreserve(p.rec.ino);
        }
      }
    } else {
      stats_.logged.fetch_add(records.size(), std::memory_order_relaxed);
    }
  }

  for (Pending& p : batch) {
    apply(p);
    respond(p);
  }

  const std::size_t n = batch.size();
  for (const Pending& p : batch) {
    recent_.push_back(p.ch->id());
    ++recent_count_[p.ch->id()];
    if (recent_.size() > kGatherWindow) {
      auto it = recent_count_.find(recent_.front());
      if (--it->second == 0) recent_count_.erase(it);
      recent_.pop_front();
    }
  }
  stats_.requests.fetch_add(n, std::memory_order_relaxed);
  stats_.batches.fetch_add(1, std::memory_order_relaxed);
  std::uint64_t prev = stats_.max_batch.load(std::memory_order_relaxed);
  if (n > prev) stats_.max_batch.store(n, std::memory_order_relaxed);
  stats_.busy_ns.fetch_add(
      static_cast<std::uint64_t>(
          std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count()),
      std::memory_order_relaxed);

  since_housekeeping_ += n;
  if (since_housekeeping_ >= options_.housekeeping_requests ||
      std::chrono::steady_clock::now() - last_housekeeping_ >= options_.housekeeping_interval) {
    housekeeping();
  }
  return n;
}

void Master::housekeeping() {
  since_housekeeping_ = 0;
  last_housekeeping_ = std::chrono::steady_clock::now();
  md_.ebr().advance();
  if (log_.fill() >= options_.checkpoint_fill ||
      log_.appended_entries() - entries_at_checkpoint_ >= options_.checkpoint_entries) {
    (void)checkpoint();
  }
}

Result<std::uint64_t> Master::checkpoint() {
  auto seq = write_checkpoint(region_, md_, alloc_, log_);
  if (seq) {
    stats_.checkpoints.fetch_add(1, std::memory_order_relaxed);
    entries_at_checkpoint_ = log_.appended_entries();
  }
  return seq;
}

void Master::run() {
  while (!stop_.load(std::memory_order_acquire)) {
    if (run_once() == 0) {
      if (!bell_.wait_until(consumed_ + 1, options_.housekeeping_interval)) housekeeping();
    }
  }
}

void Master::stop() {
  stop_.store(true, std::memory_order_release);
  bell_.kick();
}

}  // namespace kucofs
