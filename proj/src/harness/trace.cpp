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

#include "kucofs/harness/trace.hpp"

#include <charconv>
#include <random>
#include <sstream>

#include "kucofs/harness/model_fs.hpp"

namespace kucofs::harness {

namespace {

struct Name {
  TraceKind kind;
  std::string_view text;
};
constexpr Name kNames[] = {
    {TraceKind::kCreat, "creat"},   {TraceKind::kMkdir, "mkdir"}, {TraceKind::kUnlink, "unlink"},
    {TraceKind::kRmdir, "rmdir"},   {TraceKind::kRename, "rename"}, {TraceKind::kWrite, "write"},
    {TraceKind::kCheckpoint, "checkpoint"},
};

bool parse_u64(std::string_view s, std::uint64_t& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::vector<std::byte> seeded_bytes(std::uint64_t seed, std::uint64_t size) {
  std::vector<std::byte> out(size);
  std::mt19937_64 rng(seed);
  for (std::uint64_t i = 0; i < size; i += 8) {
    std::uint64_t v = rng();
    for (std::uint64_t j = 0; j < 8 && i + j < size; ++j) out[i + j] = static_cast<std::byte>(v >> (8 * j));
  }
  return out;
}

std::vector<std::byte> TraceOp::bytes() const { return seeded ? seeded_bytes(seed, size) : data; }

Result<std::vector<TraceOp>, TraceError> parse_trace(std::string_view text) {
  std::vector<TraceOp> ops;
  std::size_t lineno = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty() || tok[0][0] == '#') continue;
    auto fail = [&](std::string msg) { return TraceError{lineno, std::move(msg)}; };

    TraceOp op;
    bool known = false;
    for (const Name& n : kNames) {
      if (tok[0] == n.text) {
        op.kind = n.kind;
        known = true;
      }
    }
    if (!known) return fail("unknown op '" + tok[0] + "'");
    switch (op.kind) {
      case TraceKind::kCheckpoint:
        if (tok.size() != 1) return fail("checkpoint takes no arguments");
        break;
      case TraceKind::kRename:
        if (tok.size() != 3) return fail("rename needs two paths");
        op.path = tok[1];
        op.path2 = tok[2];
        break;
      case TraceKind::kWrite: {
        if (tok.size() != 5) return fail("write needs path offset size data");
        op.path = tok[1];
        if (!parse_u64(tok[2], op.offset) || !parse_u64(tok[3], op.size)) return fail("bad offset or size");
        const std::string& d = tok[4];
        if (d[0] == '#') {
          if (!parse_u64(std::string_view(d).substr(1), op.seed)) return fail("bad seed");
        } else {
          if (d.size() != 2 * op.size) return fail("hex data length does not match size");
          op.seeded = false;
          op.data.resize(op.size);
          for (std::uint64_t i = 0; i < op.size; ++i) {
            const int hi = hex_digit(d[2 * i]);
            const int lo = hex_digit(d[2 * i + 1]);
            if (hi < 0 || lo < 0) return fail("bad hex data");
            op.data[i] = static_cast<std::byte>(hi << 4 | lo);
          }
        }
        break;
      }
      default:
        if (tok.size() != 2) return fail(tok[0] + " needs one path");
        op.path = tok[1];
        break;
    }
    ops.push_back(std::move(op));
  }
  return ops;
}

std::string format_trace(const std::vector<TraceOp>& ops) {
  std::ostringstream out;
  for (const TraceOp& op : ops) {
    for (const Name& n : kNames) {
      if (n.kind == op.kind) out << n.text;
    }
    if (op.kind == TraceKind::kCheckpoint) {
      out << '\n';
      continue;
    }
    out << ' ' << op.path;
    if (op.kind == TraceKind::kRename) out << ' ' << op.path2;
    if (op.kind == TraceKind::kWrite) {
      out << ' ' << op.offset << ' ' << op.size << ' ';
      if (op.seeded) {
        out << '#' << op.seed;
      } else {
        static constexpr char kHex[] = "0123456789abcdef";
        for (std::byte b : op.data) out << kHex[std::to_integer<int>(b) >> 4] << kHex[std::to_integer<int>(b) & 15];
      }
    }
    out << '\n';
  }
  return out.str();
}

std::vector<TraceOp> generate_trace(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelFS model;
  std::vector<TraceOp> ops;
  std::uint64_t serial = 0;
  auto pick = [&](const std::vector<std::string>& v) -> const std::string& {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  auto join = [](const std::string& dir, const std::string& name) { return (dir == "/" ? "" : dir) + "/" + name; };

  while (ops.size() < count) {
    const auto files = model.paths(InodeKind::kFile);
    const auto dirs = model.paths(InodeKind::kDir);
    const int roll = std::uniform_int_distribution<int>(0, 99)(rng);
    TraceOp op;
    if (roll < 35 && !files.empty()) {
      op.kind = TraceKind::kWrite;
      op.path = pick(files);
      op.offset = std::uniform_int_distribution<std::uint64_t>(0, 6 * 4096)(rng);
      if (roll < 10) op.offset &= ~std::uint64_t{4095};
      op.size = std::uniform_int_distribution<std::uint64_t>(1, 3 * 4096)(rng);
      op.seed = rng();
      (void)model.write(op.path, op.offset, op.bytes());
    } else if (roll < 60 || files.empty()) {
      op.kind = TraceKind::kCreat;
      op.path = join(pick(dirs), "f" + std::to_string(serial++));
      (void)model.create(op.path);
    } else if (roll < 68) {
      op.kind = TraceKind::kMkdir;
      op.path = join(pick(dirs), "d" + std::to_string(serial++));
      (void)model.mkdir(op.path);
    } else if (roll < 80) {
      op.kind = TraceKind::kUnlink;
      op.path = pick(files);
      (void)model.unlink(op.path);
    } else if (roll < 85 && dirs.size() > 1) {
      op.kind = TraceKind::kRmdir;
      op.path = dirs[std::uniform_int_distribution<std::size_t>(1, dirs.size() - 1)(rng)];
      (void)model.rmdir(op.path);
    } else if (roll < 96) {
      op.kind = TraceKind::kRename;
      const bool dir = roll >= 93 && dirs.size() > 1;
      op.path = dir ? dirs[std::uniform_int_distribution<std::size_t>(1, dirs.size() - 1)(rng)] : pick(files);
      op.path2 = join(pick(dirs), "r" + std::to_string(serial++));
      (void)model.rename(op.path, op.path2);
    } else {
      op.kind = TraceKind::kCheckpoint;
    }
    ops.push_back(std::move(op));
  }
  return ops;
}

}  // namespace kucofs::harness
