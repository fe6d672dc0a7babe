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

#include "kucofs/harness/state.hpp"

#include <cstring>
#include <sstream>

#include "kucofs/hash.hpp"

namespace kucofs::harness {

namespace {
constexpr ChecksumKey kStateKey{};
}

std::uint64_t content_hash(std::span<const std::byte> bytes) { return keyed_hash(kStateKey, bytes); }

std::uint64_t FsState::digest() const {
  std::vector<std::byte> buf;
  for (const auto& [path, e] : entries) {
    const auto* p = reinterpret_cast<const std::byte*>(path.data());
    buf.insert(buf.end(), p, p + path.size());
    buf.push_back(std::byte{0});
    std::uint64_t fields[3] = {static_cast<std::uint64_t>(e.kind), e.size, e.content};
    const auto* f = reinterpret_cast<const std::byte*>(fields);
    buf.insert(buf.end(), f, f + sizeof(fields));
  }
  return content_hash(buf);
}

std::string FsState::diff(const FsState& other, std::size_t limit) const {
  std::ostringstream out;
  std::size_t n = 0;
  auto line = [&](const std::string& s) {
    if (n++ < limit) out << s << '\n';
  };
  auto describe = [](const EntryState& e) {
    std::ostringstream s;
    s << (e.kind == InodeKind::kDir ? "dir" : "file") << " size=" << e.size << " hash=" << std::hex << e.content;
    return s.str();
  };
  for (const auto& [path, e] : entries) {
    auto it = other.entries.find(path);
    if (it == other.entries.end()) {
      line("only left: " + path);
    } else if (!(it->second == e)) {
      line("differs: " + path + " left " + describe(e) + " right " + describe(it->second));
    }
  }
  for (const auto& [path, e] : other.entries) {
    if (!entries.count(path)) line("only right: " + path);
  }
  if (n > limit) out << "... " << (n - limit) << " more\n";
  return out.str();
}

std::vector<std::byte> read_file(const Inode& n, const Region& region) {
  const std::uint64_t size = n.size.load(std::memory_order_acquire);
  std::vector<std::byte> out(size);
  if (size == 0) return out;
  auto snap = n.map->snapshot_read(0, size, size);
  if (!snap) return out;
  std::uint64_t done = 0;
  for (const PageSlice& s : snap->slices) {
    if (s.page_no != 0) std::memcpy(out.data() + done, region.page(s.page_no) + s.offset, s.length);
    done += s.length;
  }
  return out;
}

namespace {

void walk(const MetadataStore& md, const Region& region, const Inode& dir, const std::string& path, FsState& out) {
  out.entries[path.empty() ? "/" : path] = EntryState{InodeKind::kDir, 0, 0};
  dir.dir->for_each_live([&](const Dentry& d) {
    const Inode* n = md.inode(d.ino);
    if (!n) return;
    const std::string child = path + "/" + d.name;
    if (n->kind == InodeKind::kDir) {
      walk(md, region, *n, child, out);
    } else {
      const auto bytes = read_file(*n, region);
      out.entries[child] = EntryState{InodeKind::kFile, bytes.size(), content_hash(bytes)};
    }
  });
}

}  // namespace

FsState capture_state(const MetadataStore& md, const Region& region) {
  FsState out;
  walk(md, region, *md.root(), "", out);
  return out;
}

}  // namespace kucofs::harness
