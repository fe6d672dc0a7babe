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

#include "kucofs/harness/model_fs.hpp"

#include <algorithm>
#include <cstring>

#include "kucofs/hash.hpp"

namespace kucofs::harness {

ModelFS::ModelFS() {
  nodes_[0] = Node{InodeKind::kDir, {}, {}, 0};
  by_ino_[kRootIno] = 0;
}

Result<ModelFS::Walk> ModelFS::walk(std::string_view path) const {
  auto parts = split_path(path);
  if (!parts) return parts.error();
  Walk w;
  if (parts->empty()) {
    w.found = true;
    return w;
  }
  std::uint64_t cur = 0;
  for (std::size_t i = 0; i + 1 < parts->size(); ++i) {
    const Node& n = nodes_.at(cur);
    auto it = n.children.find((*parts)[i]);
    if (it == n.children.end()) return Errc::kNotFound;
    if (nodes_.at(it->second).kind != InodeKind::kDir) return Errc::kNotADirectory;
    cur = it->second;
  }
  w.parent = cur;
  w.leaf = parts->back();
  const Node& p = nodes_.at(cur);
  if (auto it = p.children.find(w.leaf); it != p.children.end()) {
    w.node = it->second;
    w.found = true;
  }
  return w;
}

std::uint64_t ModelFS::add(std::uint64_t parent, const std::string& name, InodeKind kind) {
  const std::uint64_t id = next_id_++;
  nodes_[id] = Node{kind, {}, {}, parent};
  nodes_[parent].children[name] = id;
  return id;
}

void ModelFS::drop(std::uint64_t parent, const std::string& name) {
  Node& p = nodes_[parent];
  auto it = p.children.find(name);
  if (it == p.children.end()) return;
  nodes_.erase(it->second);
  p.children.erase(it);
}

bool ModelFS::descends(std::uint64_t node, std::uint64_t ancestor) const {
  for (std::uint64_t cur = node;; cur = nodes_.at(cur).parent) {
    if (cur == ancestor) return true;
    if (cur == 0) return false;
  }
}

Errc ModelFS::create(std::string_view path) {
  auto w = walk(path);
  if (!w) return w.error();
  if (w->leaf.empty()) return Errc::kIsADirectory;
  if (w->found) return nodes_.at(w->node).kind == InodeKind::kDir ? Errc::kIsADirectory : Errc::kOk;
  add(w->parent, w->leaf, InodeKind::kFile);
  return Errc::kOk;
}

Errc ModelFS::mknod(std::string_view path) {
  auto w = walk(path);
  if (!w) return w.error();
  if (w->leaf.empty() || w->found) return Errc::kExists;
  add(w->parent, w->leaf, InodeKind::kFile);
  return Errc::kOk;
}

Errc ModelFS::mkdir(std::string_view path) {
  auto w = walk(path);
  if (!w) return w.error();
  if (w->leaf.empty() || w->found) return Errc::kExists;
  add(w->parent, w->leaf, InodeKind::kDir);
  return Errc::kOk;
}

Errc ModelFS::unlink(std::string_view path) {
  auto w = walk(path);
  if (!w) return w.error();
  if (w->leaf.empty()) return Errc::kInvalidArgument;
  if (!w->found) return Errc::kNotFound;
  if (nodes_.at(w->node).kind == InodeKind::kDir) return Errc::kIsADirectory;
  drop(w->parent, w->leaf);
  return Errc::kOk;
}

Errc ModelFS::rmdir(std::string_view path) {
  auto w = walk(path);
  if (!w) return w.error();
  if (w->leaf.empty()) return Errc::kInvalidArgument;
  if (!w->found) return Errc::kNotFound;
  const Node& n = nodes_.at(w->node);
  if (n.kind != InodeKind::kDir) return Errc::kNotADirectory;
  if (!n.children.empty()) return Errc::kNotEmpty;
  drop(w->parent, w->leaf);
  return Errc::kOk;
}

Errc ModelFS::rename(std::string_view from, std::string_view to) {
  auto s = walk(from);
  if (!s) return s.error();
  if (s->leaf.empty()) return Errc::kInvalidArgument;
  if (!s->found) return Errc::kNotFound;
  auto d = walk(to);
  if (!d) return d.error();
  if (d->leaf.empty() || d->found) return Errc::kExists;
  if (nodes_.at(s->node).kind == InodeKind::kDir && descends(d->parent, s->node)) return Errc::kInvalidArgument;
  nodes_[s->parent].children.erase(s->leaf);
  nodes_[d->parent].children[d->leaf] = s->node;
  nodes_[s->node].parent = d->parent;
  return Errc::kOk;
}

Errc ModelFS::write(std::string_view path, std::uint64_t offset, std::span<const std::byte> data) {
  auto w = walk(path);
  if (!w) return w.error();
  if (w->leaf.empty()) return Errc::kIsADirectory;
  if (!w->found) return Errc::kNotFound;
  Node& n = nodes_.at(w->node);
  if (n.kind == InodeKind::kDir) return Errc::kIsADirectory;
  if (data.empty()) return Errc::kOk;
  if (n.data.size() < offset + data.size()) n.data.resize(offset + data.size());
  std::memcpy(n.data.data() + offset, data.data(), data.size());
  return Errc::kOk;
}

Result<std::vector<std::byte>> ModelFS::read(std::string_view path, std::uint64_t offset, std::uint64_t size) const {
  auto w = walk(path);
  if (!w) return w.error();
  if (w->leaf.empty()) return Errc::kIsADirectory;
  if (!w->found) return Errc::kNotFound;
  const Node& n = nodes_.at(w->node);
  if (n.kind == InodeKind::kDir) return Errc::kIsADirectory;
  if (offset >= n.data.size()) return std::vector<std::byte>{};
  const std::uint64_t len = std::min<std::uint64_t>(size, n.data.size() - offset);
  return std::vector<std::byte>(n.data.begin() + static_cast<std::ptrdiff_t>(offset),
                                n.data.begin() + static_cast<std::ptrdiff_t>(offset + len));
}

Result<std::vector<std::string>> ModelFS::readdir(std::string_view path) const {
  auto w = walk(path);
  if (!w) return w.error();
  if (!w->found) return Errc::kNotFound;
  const Node& n = nodes_.at(w->node);
  if (n.kind != InodeKind::kDir) return Errc::kNotADirectory;
  std::vector<std::string> names;
  for (const auto& [name, id] : n.children) names.push_back(name);
  std::sort(names.begin(), names.end(), [](const std::string& a, const std::string& b) {
    return compare_entry(fnv1a64(a), a, fnv1a64(b), b) < 0;
  });
  return names;
}

Result<EntryState> ModelFS::stat(std::string_view path) const {
  auto w = walk(path);
  if (!w) return w.error();
  if (!w->found) return Errc::kNotFound;
  const Node& n = nodes_.at(w->node);
  if (n.kind == InodeKind::kDir) return EntryState{InodeKind::kDir, 0, 0};
  return EntryState{InodeKind::kFile, n.data.size(), content_hash(n.data)};
}

void ModelFS::apply(const LogRecord& rec, std::span<const std::byte> data) {
  ++applied_;
  auto node_of = [&](std::uint64_t ino) -> Node* {
    auto it = by_ino_.find(ino);
    return it == by_ino_.end() ? nullptr : &nodes_[it->second];
  };
  switch (rec.type) {
    case LogType::kCreat:
    case LogType::kMkdir: {
      auto p = by_ino_.find(rec.parent);
      if (p == by_ino_.end()) return;
      by_ino_[rec.ino] = add(p->second, rec.name, rec.type == LogType::kMkdir ? InodeKind::kDir : InodeKind::kFile);
      break;
    }
    case LogType::kUnlink:
    case LogType::kRmdir: {
      auto p = by_ino_.find(rec.parent);
      if (p != by_ino_.end()) drop(p->second, rec.name);
      by_ino_.erase(rec.ino);
      break;
    }
    case LogType::kRename: {
      auto s = by_ino_.find(rec.parent);
      auto d = by_ino_.find(rec.parent2);
      if (s == by_ino_.end() || d == by_ino_.end()) return;
      auto& from = nodes_[s->second].children;
      auto it = from.find(rec.name);
      if (it == from.end()) return;
      const std::uint64_t id = it->second;
      from.erase(it);
      nodes_[d->second].children[rec.name2] = id;
      nodes_[id].parent = d->second;
      break;
    }
    case LogType::kWrite: {
      Node* n = node_of(rec.ino);
      if (!n || data.size() != rec.size) return;
      if (n->data.size() < rec.offset + rec.size) n->data.resize(rec.offset + rec.size);
      std::memcpy(n->data.data() + rec.offset, data.data(), data.size());
      break;
    }
  }
}

void ModelFS::collect(std::uint64_t id, const std::string& path, FsState& out) const {
  const Node& n = nodes_.at(id);
  if (n.kind == InodeKind::kFile) {
    out.entries[path] = EntryState{InodeKind::kFile, n.data.size(), content_hash(n.data)};
    return;
  }
  out.entries[path.empty() ? "/" : path] = EntryState{InodeKind::kDir, 0, 0};
  for (const auto& [name, child] : n.children) collect(child, path + "/" + name, out);
}

FsState ModelFS::state() const {
  FsState out;
  collect(0, "", out);
  return out;
}

std::vector<std::string> ModelFS::paths(InodeKind kind) const {
  std::vector<std::string> out;
  std::vector<std::pair<std::uint64_t, std::string>> stack{{0, ""}};
  while (!stack.empty()) {
    auto [id, path] = std::move(stack.back());
    stack.pop_back();
    const Node& n = nodes_.at(id);
    if (n.kind == kind) out.push_back(path.empty() ? "/" : path);
    for (const auto& [name, child] : n.children) stack.emplace_back(child, path + "/" + name);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace kucofs::harness
