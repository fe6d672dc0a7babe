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

#include "kucofs/metadata.hpp"

#include <algorithm>
#include <bit>
#include <cassert>

#include "kucofs/hash.hpp"

namespace kucofs {

// ---- EpochManager ----------------------------------------------------------

EpochManager::~EpochManager() = default;

Result<std::uint32_t> EpochManager::register_participant() {
  std::lock_guard lock(reg_mu_);
  for (std::uint32_t i = 0; i < kMaxParticipants; ++i) {
    if (!parts_[i].registered.load(std::memory_order_relaxed)) {
      parts_[i].word.store(0, std::memory_order_relaxed);
      parts_[i].last_observed.store(global_.load(std::memory_order_acquire), std::memory_order_relaxed);
      parts_[i].registered.store(true, std::memory_order_release);
      return i;
    }
  }
  return Errc::kOutOfSpace;
}

void EpochManager::unregister_participant(std::uint32_t id) {
  std::lock_guard lock(reg_mu_);
  parts_[id].word.store(0, std::memory_order_release);
  parts_[id].registered.store(false, std::memory_order_release);
}

void EpochManager::enter(std::uint32_t id) {
  Participant& p = parts_[id];
  for (;;) {
    const std::uint64_t e = global_.load(std::memory_order_seq_cst);
    p.word.store((e << 1) | 1, std::memory_order_seq_cst);
    if (global_.load(std::memory_order_seq_cst) == e) {
      p.last_observed.store(e, std::memory_order_relaxed);
      return;
    }
  }
}

void EpochManager::exit(std::uint32_t id) { parts_[id].word.store(0, std::memory_order_release); }

void EpochManager::retire(Reclaim fn) {
  queues_[global_.load(std::memory_order_relaxed) % 3].push_back(std::move(fn));
}

std::size_t EpochManager::advance() {
  const std::uint64_t e = global_.load(std::memory_order_relaxed);
  for (const Participant& p : parts_) {
    if (!p.registered.load(std::memory_order_acquire)) continue;
    const std::uint64_t w = p.word.load(std::memory_order_seq_cst);
    if ((w & 1) && (w >> 1) != e) return 0;
  }
  global_.store(e + 1, std::memory_order_seq_cst);
  // Items retired in epoch e - 1 are now unreachable: every reader inside a
  // section has observed e.
  auto batch = std::move(queues_[(e + 2) % 3]);
  queues_[(e + 2) % 3].clear();
  for (auto& fn : batch) fn();
  return batch.size();
}

std::size_t EpochManager::drain() {
  std::size_t n = 0;
  for (int round = 0; round < 3; ++round) {
    for (auto& q : queues_) {
      auto batch = std::move(q);
      q.clear();
      for (auto& fn : batch) fn();
      n += batch.size();
    }
  }
  return n;
}

std::uint64_t EpochManager::observed(std::uint32_t id) const {
  return parts_[id].last_observed.load(std::memory_order_relaxed);
}

std::size_t EpochManager::pending() const {
  std::size_t n = 0;
  for (const auto& q : queues_) n += q.size();
  return n;
}

// ---- Dentry / SkipList -----------------------------------------------------

Dentry::Dentry(std::uint64_t key_, std::string name_, std::uint64_t ino_, std::uint64_t dir_, int level_,
               std::uint64_t magic_)
    : magic(magic_), key(key_), name(std::move(name_)), ino(ino_), dir(dir_), level(level_) {
  for (auto& n : next) n.store(nullptr, std::memory_order_relaxed);
}

bool Dentry::live() const {
  const std::uintptr_t s = state.load(std::memory_order_acquire);
  if (s == kDentryLive) return true;
  if (s == kDentryDeleted) return false;
  return reinterpret_cast<const Dentry*>(s)->state.load(std::memory_order_acquire) == kDentryDeleted;
}

int compare_entry(std::uint64_t key_a, std::string_view name_a, std::uint64_t key_b, std::string_view name_b) {
  if (key_a != key_b) return key_a < key_b ? -1 : 1;
  const int c = name_a.compare(name_b);
  return c < 0 ? -1 : (c > 0 ? 1 : 0);
}

namespace {

void note_visit(const Dentry* d, MetadataStats* stats) {
  if (stats && d->magic.load(std::memory_order_relaxed) == kPoisonMagic) {
    stats->poisoned_visits.fetch_add(1, std::memory_order_relaxed);
  }
}

}  // namespace

SkipList::SkipList(std::uint64_t dir_ino)
    : dir_(dir_ino), head_(std::make_unique<Dentry>(0, std::string(), 0, dir_ino, kMaxLevel, kHeadMagic)) {}

SkipList::~SkipList() {
  Dentry* d = head_->next[0].load(std::memory_order_relaxed);
  while (d) {
    Dentry* n = d->next[0].load(std::memory_order_relaxed);
    delete d;
    d = n;
  }
}

const Dentry* SkipList::predecessor(std::uint64_t key, std::string_view name, std::uint64_t* comparisons,
                                    MetadataStats* stats) const {
  const Dentry* x = head_.get();
  std::uint64_t cmps = 0;
  for (int i = kMaxLevel - 1; i >= 0; --i) {
    for (;;) {
      const Dentry* y = x->next[i].load(std::memory_order_acquire);
      if (!y) break;
      note_visit(y, stats);
      ++cmps;
      if (compare_entry(y->key, y->name, key, name) < 0) {
        x = y;
      } else {
        break;
      }
    }
  }
  if (comparisons) *comparisons += cmps;
  return x;
}

const Dentry* SkipList::lookup(std::uint64_t key, std::string_view name, std::uint64_t* comparisons,
                               MetadataStats* stats) const {
  const Dentry* pred = predecessor(key, name, comparisons, stats);
  for (const Dentry* y = pred->next[0].load(std::memory_order_acquire); y;
       y = y->next[0].load(std::memory_order_acquire)) {
    note_visit(y, stats);
    if (comparisons) ++*comparisons;
    if (compare_entry(y->key, y->name, key, name) != 0) break;
    if (y->live()) return y;
  }
  return nullptr;
}

bool SkipList::has_live_entries() const {
  for (const Dentry* d = head_->next[0].load(std::memory_order_acquire); d;
       d = d->next[0].load(std::memory_order_acquire)) {
    if (d->live()) return true;
  }
  return false;
}

Dentry* SkipList::link_after(Dentry* pred, std::uint64_t key, std::string name, std::uint64_t ino, int level,
                             std::uintptr_t initial_state) {
  auto* node = new Dentry(key, std::move(name), ino, dir_, level);
  node->state.store(initial_state, std::memory_order_relaxed);
  Dentry* succ = pred->next[0].load(std::memory_order_relaxed);
  node->next[0].store(succ, std::memory_order_relaxed);

  // Upper-level predecessors are the nearest earlier nodes tall enough;
  // walk back along the bottom level without comparing keys.
  Dentry* preds[kMaxLevel];
  Dentry* p = pred;
  for (int i = 1; i < level; ++i) {
    while (p->level <= i) p = p->prev;
    preds[i] = p;
    node->next[i].store(p->next[i].load(std::memory_order_relaxed), std::memory_order_relaxed);
  }
  node->prev = pred;
  if (succ) succ->prev = node;

  pred->next[0].store(node, std::memory_order_release);
  for (int i = 1; i < level; ++i) preds[i]->next[i].store(node, std::memory_order_release);
  ++linked_;
  return node;
}

void SkipList::unlink(Dentry* node) {
  Dentry* p = node->prev;
  for (int i = node->level - 1; i >= 1; --i) {
    Dentry* q = p;
    while (q->level <= i) q = q->prev;
    assert(q->next[i].load(std::memory_order_relaxed) == node);
    q->next[i].store(node->next[i].load(std::memory_order_relaxed), std::memory_order_release);
  }
  Dentry* succ = node->next[0].load(std::memory_order_relaxed);
  p->next[0].store(succ, std::memory_order_release);
  if (succ) succ->prev = p;
  --linked_;
}

// ---- Inode / InodeTable ----------------------------------------------------

Inode::Inode(std::uint64_t ino_, std::uint64_t generation_, InodeKind kind_, std::uint32_t mode_,
             std::uint64_t parent_)
    : ino(ino_), generation(generation_), kind(kind_), mode(mode_), parent(parent_) {
  if (kind == InodeKind::kDir) {
    dir = std::make_unique<SkipList>(ino);
  } else {
    map = std::make_unique<BlockMap>();
  }
}

InodeTable::InodeTable() : chunks_(new std::atomic<Chunk*>[kChunks]) {
  for (std::uint64_t i = 0; i < kChunks; ++i) chunks_[i].store(nullptr, std::memory_order_relaxed);
}

InodeTable::~InodeTable() {
  for (std::uint64_t c = 0; c < kChunks; ++c) {
    Chunk* chunk = chunks_[c].load(std::memory_order_relaxed);
    if (!chunk) continue;
    for (auto& s : chunk->slots) {
      Inode* n = s.load(std::memory_order_relaxed);
      if (n) {
        delete n->ring.load(std::memory_order_relaxed);
        delete n;
      }
    }
    delete chunk;
  }
}

Inode* InodeTable::get(std::uint64_t ino) const {
  if (ino >= kCapacity) return nullptr;
  Chunk* chunk = chunks_[ino / kChunk].load(std::memory_order_acquire);
  if (!chunk) return nullptr;
  return chunk->slots[ino % kChunk].load(std::memory_order_acquire);
}

void InodeTable::publish(std::uint64_t ino, Inode* inode) {
  auto& cref = chunks_[ino / kChunk];
  Chunk* chunk = cref.load(std::memory_order_relaxed);
  if (!chunk) {
    chunk = new Chunk();
    for (auto& s : chunk->slots) s.store(nullptr, std::memory_order_relaxed);
    cref.store(chunk, std::memory_order_release);
  }
  chunk->slots[ino % kChunk].store(inode, std::memory_order_release);
}

void InodeTable::clear(std::uint64_t ino) {
  Chunk* chunk = chunks_[ino / kChunk].load(std::memory_order_relaxed);
  if (chunk) chunk->slots[ino % kChunk].store(nullptr, std::memory_order_release);
}

// ---- paths -----------------------------------------------------------------

Status validate_name(std::string_view name) {
  if (name.empty() || name == "." || name == "..") return Errc::kInvalidArgument;
  if (name.size() > kMaxNameLen) return Errc::kNameTooLong;
  if (name.find('\0') != std::string_view::npos) return Errc::kInvalidArgument;
  return {};
}

Result<std::vector<std::string>> split_path(std::string_view path) {
  if (path.empty() || path.front() != '/') return Errc::kInvalidArgument;
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    std::size_t j = i;
    while (j < path.size() && path[j] != '/') ++j;
    if (j > i) {
      std::string_view comp = path.substr(i, j - i);
      if (auto s = validate_name(comp); !s) return s.error();
      parts.emplace_back(comp);
    }
    i = j;
  }
  return parts;
}

// ---- MetadataStore ---------------------------------------------------------

MetadataStore::MetadataStore(Options options) : options_(options), rng_(options.rng_seed) {
  auto root = std::make_unique<Inode>(kRootIno, 0, InodeKind::kDir, 0755, kRootIno);
  table_.publish(kRootIno, root.release());
  live_inodes_ = 1;
}

MetadataStore::~MetadataStore() {
  release_pages_ = nullptr;
  release_ino_ = nullptr;
  ebr_.drain();
  for (Dentry* d : quarantine_) delete d;
}

const Inode* MetadataStore::inode(std::uint64_t ino) const {
  const Inode* n = table_.get(ino);
  if (!n || n->dirty.load(std::memory_order_acquire)) return nullptr;
  return n;
}

Result<ResolvedPath> MetadataStore::resolve(std::string_view path, std::uint64_t* comparisons) const {
  auto parts = split_path(path);
  if (!parts) return parts.error();
  ResolvedPath out;
  const Inode* cur = root();
  if (parts->empty()) {
    out.parent = cur;
    out.target = cur;
    out.pred = cur->dir->head();
    return out;
  }
  MetadataStats* stats = const_cast<MetadataStats*>(&stats_);
  for (std::size_t i = 0; i + 1 < parts->size(); ++i) {
    const std::string& name = (*parts)[i];
    const Dentry* d = cur->dir->lookup(fnv1a64(name), name, comparisons, stats);
    if (!d) return Errc::kNotFound;
    const Inode* n = inode(d->ino);
    if (!n) return Errc::kNotFound;
    if (n->kind != InodeKind::kDir) return Errc::kNotADirectory;
    cur = n;
  }
  out.leaf = parts->back();
  out.parent = cur;
  const std::uint64_t key = fnv1a64(out.leaf);
  out.pred = cur->dir->predecessor(key, out.leaf, comparisons, stats);
  for (const Dentry* y = out.pred->next[0].load(std::memory_order_acquire); y;
       y = y->next[0].load(std::memory_order_acquire)) {
    if (comparisons) ++*comparisons;
    if (compare_entry(y->key, y->name, key, out.leaf) != 0) break;
    if (y->live()) {
      if (const Inode* n = inode(y->ino)) {
        out.dentry = y;
        out.target = n;
      }
      break;
    }
  }
  return out;
}

std::pair<std::uint64_t, std::uint64_t> MetadataStore::reserve_ino() {
  std::uint64_t ino;
  if (!free_inos_.empty()) {
    ino = *free_inos_.begin();
    free_inos_.erase(free_inos_.begin());
  } else {
    ino = next_ino_++;
  }
  return {ino, next_generation_++};
}

void MetadataStore::reserve_specific(std::uint64_t ino, std::uint64_t generation) {
  if (ino >= next_ino_) {
    for (std::uint64_t i = next_ino_; i < ino; ++i) {
      if (!table_.get(i)) free_inos_.insert(i);
    }
    next_ino_ = ino + 1;
  } else {
    free_inos_.erase(ino);
  }
  next_generation_ = std::max(next_generation_, generation + 1);
}

int MetadataStore::random_level() {
  const std::uint64_t bits = rng_() | (1ULL << (kMaxLevel - 1));
  return 1 + std::countr_zero(bits);
}

const Dentry* MetadataStore::find(const SkipList& dir, std::uint64_t key, std::string_view name) {
  std::uint64_t cmps = 0;
  const Dentry* d = dir.lookup(key, name, &cmps, &stats_);
  stats_.key_comparisons.fetch_add(cmps, std::memory_order_relaxed);
  return d;
}

Result<const Dentry*> MetadataStore::insertion_point(const SkipList& dir, std::uint64_t key, std::string_view name,
                                                     const Dentry* hint) {
  std::uint64_t cmps = 0;
  const bool usable = hint && (hint == dir.head() || (known_dentry(hint) && hint->dir == dir.dir())) &&
                      hint->state.load(std::memory_order_acquire) != kDentryDeleted;
  if (usable) {
    int c1 = -1;
    if (hint != dir.head()) {
      ++cmps;
      c1 = compare_entry(hint->key, hint->name, key, name);
    }
    if (c1 < 0) {
      const Dentry* succ = hint->next[0].load(std::memory_order_acquire);
      int c2 = -1;
      if (succ) {
        ++cmps;
        c2 = compare_entry(key, name, succ->key, succ->name);
      }
      if (c2 <= 0) {
        stats_.key_comparisons.fetch_add(cmps, std::memory_order_relaxed);
        if (c2 == 0) return Errc::kExists;
        return hint;
      }
    }
  }
  if (hint) stats_.stale_hints.fetch_add(1, std::memory_order_relaxed);
  const Dentry* pred = dir.predecessor(key, name, &cmps, &stats_);
  const Dentry* succ = pred->next[0].load(std::memory_order_acquire);
  if (succ) ++cmps;
  stats_.key_comparisons.fetch_add(cmps, std::memory_order_relaxed);
  if (succ && compare_entry(key, name, succ->key, succ->name) == 0) return Errc::kExists;
  return pred;
}

Result<Inode*> MetadataStore::create(std::uint64_t parent, std::string_view name, std::uint64_t ino,
                                     std::uint64_t generation, InodeKind kind, std::uint32_t mode, std::uint64_t mtime,
                                     const Dentry* hint, const Dentry* expected_succ, bool hint_checked) {
  Inode* p = table_.get(parent);
  if (!p || p->dirty.load(std::memory_order_relaxed)) return Errc::kNotFound;
  if (p->kind != InodeKind::kDir) return Errc::kNotADirectory;
  if (auto s = validate_name(name); !s) return s.error();
  if (ino >= InodeTable::kCapacity) return Errc::kOutOfSpace;
  if (table_.get(ino)) return Errc::kExists;
  const std::uint64_t key = fnv1a64(name);

  const Dentry* pred = nullptr;
  if (hint_checked && hint && (hint == p->dir->head() || known_dentry(hint)) &&
      hint->state.load(std::memory_order_acquire) != kDentryDeleted &&
      hint->next[0].load(std::memory_order_acquire) == expected_succ) {
    pred = hint;  // unchanged since validation
  } else {
    auto ip = insertion_point(*p->dir, key, name, hint);
    if (!ip) return ip.error();
    pred = *ip;
  }

  reserve_specific(ino, generation);
  auto* node = new Inode(ino, generation, kind, mode, parent);
  node->mtime.store(mtime, std::memory_order_relaxed);
  table_.publish(ino, node);
  ++live_inodes_;

  Dentry* d = p->dir->link_after(const_cast<Dentry*>(pred), key, std::string(name), ino, random_level(), kDentryLive);
  nodes_.insert(d);
  p->mtime.store(mtime, std::memory_order_relaxed);
  return node;
}

Status MetadataStore::remove(std::uint64_t parent, std::string_view name, InodeKind expected,
                             const Dentry* handle) {
  Inode* p = table_.get(parent);
  if (!p || p->dirty.load(std::memory_order_relaxed)) return Errc::kNotFound;
  if (p->kind != InodeKind::kDir) return Errc::kNotADirectory;
  const std::uint64_t key = fnv1a64(name);
  const Dentry* d = nullptr;
  if (handle && known_dentry(handle) && handle->dir == parent && handle->key == key && handle->live() &&
      handle->name == name) {
    d = handle;
  } else {
    d = find(*p->dir, key, name);
  }
  if (!d) return Errc::kNotFound;
  Inode* n = table_.get(d->ino);
  if (!n) return Errc::kNotFound;
  if (expected == InodeKind::kFile && n->kind == InodeKind::kDir) return Errc::kIsADirectory;
  if (expected == InodeKind::kDir && n->kind != InodeKind::kDir) return Errc::kNotADirectory;
  if (n->kind == InodeKind::kDir && n->dir->has_live_entries()) return Errc::kNotEmpty;

  auto* md = const_cast<Dentry*>(d);
  md->state.store(kDentryDeleted, std::memory_order_release);
  p->dir->unlink(md);
  retire_dentry(md);
  retire_inode(n);
  return {};
}

Status MetadataStore::rename(std::uint64_t src_parent, std::string_view src_name, std::uint64_t dst_parent,
                             std::string_view dst_name, const Dentry* src_handle, const Dentry* dst_hint) {
  Inode* sp = table_.get(src_parent);
  Inode* dp = table_.get(dst_parent);
  if (!sp || sp->dirty.load(std::memory_order_relaxed) || !dp || dp->dirty.load(std::memory_order_relaxed)) {
    return Errc::kNotFound;
  }
  if (sp->kind != InodeKind::kDir || dp->kind != InodeKind::kDir) return Errc::kNotADirectory;
  if (auto s = validate_name(dst_name); !s) return s.error();
  const std::uint64_t skey = fnv1a64(src_name);
  const Dentry* s = nullptr;
  if (src_handle && known_dentry(src_handle) && src_handle->dir == src_parent && src_handle->key == skey &&
      src_handle->live() && src_handle->name == src_name) {
    s = src_handle;
  } else {
    s = find(*sp->dir, skey, src_name);
  }
  if (!s) return Errc::kNotFound;
  Inode* n = table_.get(s->ino);
  if (!n) return Errc::kNotFound;
  if (n->kind == InodeKind::kDir && is_descendant(dst_parent, n->ino)) return Errc::kInvalidArgument;

  const std::uint64_t dkey = fnv1a64(dst_name);
  auto ip = insertion_point(*dp->dir, dkey, dst_name, dst_hint);
  if (!ip) return ip.error();

  // The new entry is born pending on the source; deleting the source is
  // the single store that moves visibility from one name to the other.
  auto* ms = const_cast<Dentry*>(s);
  Dentry* nd = dp->dir->link_after(const_cast<Dentry*>(*ip), dkey, std::string(dst_name), s->ino, random_level(),
                                   reinterpret_cast<std::uintptr_t>(ms));
  nodes_.insert(nd);
  ms->state.store(kDentryDeleted, std::memory_order_release);
  nd->state.store(kDentryLive, std::memory_order_release);
  sp->dir->unlink(ms);
  retire_dentry(ms);
  n->parent = dst_parent;
  return {};
}

Status MetadataStore::write(std::uint64_t ino, std::uint64_t offset, std::uint64_t size, std::uint64_t version,
                            std::uint64_t mtime, std::span<const std::uint64_t> pages) {
  Inode* n = table_.get(ino);
  if (!n || n->dirty.load(std::memory_order_relaxed)) return Errc::kNotFound;
  if (n->kind != InodeKind::kFile) return Errc::kIsADirectory;
  if (size == 0) return {};
  if (offset > kMaxFilePages * kPageSize || size > kMaxFilePages * kPageSize - offset) return Errc::kFileTooLarge;
  const std::uint64_t first = offset / kPageSize;
  const std::uint64_t last = (offset + size - 1) / kPageSize;
  if (pages.size() != last - first + 1) return Errc::kInvalidArgument;

  auto displaced = n->map->commit(first, pages, version);
  if (!displaced) return displaced.error();
  const std::uint64_t end = offset + size;
  if (end > n->size.load(std::memory_order_relaxed)) n->size.store(end, std::memory_order_release);
  n->mtime.store(mtime, std::memory_order_release);
  n->max_version = std::max(n->max_version, version & kVersionMask);
  if (!displaced->empty()) {
    ebr_.retire([this, pages = std::move(*displaced)] {
      if (release_pages_) release_pages_(pages);
    });
  }
  return {};
}

bool MetadataStore::is_descendant(std::uint64_t ino, std::uint64_t ancestor) const {
  std::uint64_t cur = ino;
  for (std::uint64_t guard = 0; guard <= next_ino_; ++guard) {
    if (cur == ancestor) return true;
    if (cur == kRootIno) return false;
    const Inode* n = table_.get(cur);
    if (!n) return false;
    cur = n->parent;
  }
  return false;
}

Inode* MetadataStore::install(std::unique_ptr<Inode> inode) {
  Inode* n = inode.release();
  if (n->ino == kRootIno) {
    Inode* old = table_.get(kRootIno);
    table_.publish(kRootIno, n);
    delete old;
    return n;
  }
  reserve_specific(n->ino, n->generation);
  table_.publish(n->ino, n);
  ++live_inodes_;
  return n;
}

Dentry* MetadataStore::append_loaded(Inode& dir, Dentry* after, std::uint64_t key, std::string name,
                                     std::uint64_t ino) {
  Dentry* d = dir.dir->link_after(after, key, std::move(name), ino, random_level(), kDentryLive);
  nodes_.insert(d);
  return d;
}

void MetadataStore::retire_dentry(Dentry* d) {
  nodes_.erase(d);
  ebr_.retire([this, d] { free_dentry(d); });
}

void MetadataStore::free_dentry(Dentry* d) {
  if (!options_.poison_freed) {
    delete d;
    return;
  }
  d->magic.store(kPoisonMagic, std::memory_order_relaxed);
  quarantine_.push_back(d);
  if (quarantine_.size() > 4096) {
    delete quarantine_.front();
    quarantine_.pop_front();
  }
}

void MetadataStore::retire_inode(Inode* n) {
  n->dirty.store(true, std::memory_order_release);
  table_.clear(n->ino);
  --live_inodes_;
  ebr_.retire([this, n] {
    std::vector<std::uint64_t> pages;
    if (n->map) pages = n->map->referenced_pages();
    const std::uint64_t ino = n->ino;
    delete n->ring.load(std::memory_order_relaxed);
    delete n;
    if (!pages.empty() && release_pages_) release_pages_(pages);
    free_inos_.insert(ino);
    if (release_ino_) release_ino_(ino);
  });
}

}  // namespace kucofs
