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

#include "kucofs/message.hpp"

#include <cstring>
#include <thread>

#include "kucofs/codec.hpp"

namespace kucofs {
namespace {

void put_inode(ByteWriter& w, const InodeHandle& h) {
  w.u64(h.ino);
  w.u64(h.gen);
}
void put_dentry(ByteWriter& w, const DentryHandle& h) {
  w.u64(h.node);
  w.u64(h.key);
  w.u64(h.ino);
}
InodeHandle get_inode(ByteReader& r) {
  InodeHandle h;
  h.ino = r.u64();
  h.gen = r.u64();
  return h;
}
DentryHandle get_dentry(ByteReader& r) {
  DentryHandle h;
  h.node = r.u64();
  h.key = r.u64();
  h.ino = r.u64();
  return h;
}

// Names carry a u16 length: with kFlagPaths they hold whole paths.
void put_name(ByteWriter& w, const std::string& s) {
  w.u16(static_cast<std::uint16_t>(s.size()));
  w.bytes(std::as_bytes(std::span(s.data(), s.size())));
}
std::string get_name(ByteReader& r) {
  const std::size_t n = r.u16();
  auto b = r.bytes(n);
  return std::string(reinterpret_cast<const char*>(b.data()), b.size());
}

bool valid_opcode(std::uint8_t op) {
  return op >= static_cast<std::uint8_t>(Opcode::kOpen) && op <= static_cast<std::uint8_t>(Opcode::kRegister);
}

}  // namespace

std::string_view opcode_name(Opcode op) {
  switch (op) {
    case Opcode::kOpen: return "OPEN";
    case Opcode::kCreat: return "CREAT";
    case Opcode::kMkdir: return "MKDIR";
    case Opcode::kUnlink: return "UNLINK";
    case Opcode::kRmdir: return "RMDIR";
    case Opcode::kRename: return "RENAME";
    case Opcode::kWriteCommit: return "WRITE_COMMIT";
    case Opcode::kLeasePages: return "LEASE_PAGES";
    case Opcode::kClose: return "CLOSE";
    case Opcode::kReadFallback: return "READ_FALLBACK";
    case Opcode::kRegister: return "REGISTER";
  }
  return "?";
}

Result<std::vector<std::byte>> encode_request(const Request& q) {
  if (q.name.size() > 0xffff || q.name2.size() > 0xffff) return Errc::kNameTooLong;
  std::vector<std::byte> payload;
  ByteWriter w(payload);
  switch (q.op) {
    case Opcode::kOpen:
      w.u32(q.flags);
      put_inode(w, q.parent);
      put_dentry(w, q.pred);
      put_dentry(w, q.target);
      put_inode(w, q.inode);
      w.u32(q.mode);
      put_name(w, q.name);
      break;
    case Opcode::kCreat:
    case Opcode::kMkdir:
      w.u32(q.flags);
      put_inode(w, q.parent);
      put_dentry(w, q.pred);
      w.u32(q.mode);
      put_name(w, q.name);
      break;
    case Opcode::kUnlink:
    case Opcode::kRmdir:
      w.u32(q.flags);
      put_inode(w, q.parent);
      put_dentry(w, q.target);
      put_inode(w, q.inode);
      put_name(w, q.name);
      break;
    case Opcode::kRename:
      w.u32(q.flags);
      put_inode(w, q.parent);
      put_dentry(w, q.target);
      put_inode(w, q.inode);
      put_inode(w, q.parent2);
      put_dentry(w, q.pred2);
      put_name(w, q.name);
      put_name(w, q.name2);
      break;
    case Opcode::kWriteCommit:
      if (q.runs.size() > kInlineRuns) return Errc::kInvalidArgument;
      put_inode(w, q.inode);
      w.u64(q.offset);
      w.u64(q.size);
      w.u64(q.version);
      w.u64(q.scratch_page);
      w.u64(q.count);
      w.u8(static_cast<std::uint8_t>(q.runs.size()));
      for (const PageRun& r : q.runs) {
        w.u64(r.page_no);
        w.u32(static_cast<std::uint32_t>(r.count));
      }
      break;
    case Opcode::kLeasePages:
      w.u64(q.count);
      break;
    case Opcode::kClose:
      w.u32(q.flags);
      put_inode(w, q.inode);
      break;
    case Opcode::kReadFallback:
      put_inode(w, q.inode);
      w.u64(q.offset);
      w.u64(q.size);
      w.u64(q.buffer);
      break;
    case Opcode::kRegister:
      break;
  }
  if (payload.size() > kMaxRequestPayload) return Errc::kNameTooLong;
  const std::size_t slots = (kRequestHeader + payload.size() + kRequestSlot - 1) / kRequestSlot;
  std::vector<std::byte> out(std::max<std::size_t>(slots, 1) * kRequestSlot, std::byte{0});
  put_u64(out.data(), q.seq);
  out[8] = std::byte{static_cast<std::uint8_t>(q.op)};
  out[9] = std::byte{static_cast<std::uint8_t>(std::max<std::size_t>(slots, 1))};
  put_u16(out.data() + 10, static_cast<std::uint16_t>(payload.size()));
  put_u32(out.data() + 12, q.client);
  if (!payload.empty()) std::memcpy(out.data() + kRequestHeader, payload.data(), payload.size());
  return out;
}

std::size_t request_slots(std::span<const std::byte> first_slot) {
  return std::to_integer<std::size_t>(first_slot[9]);
}

Result<Request> decode_request(std::span<const std::byte> in) {
  if (in.size() < kRequestSlot) return Errc::kInvalidArgument;
  Request q;
  q.seq = get_u64(in.data());
  const std::uint8_t op = std::to_integer<std::uint8_t>(in[8]);
  const std::size_t slots = request_slots(in);
  const std::size_t len = get_u16(in.data() + 10);
  q.client = get_u32(in.data() + 12);
  if (!valid_opcode(op) || slots == 0 || slots > kMaxRequestSlots || slots * kRequestSlot > in.size() ||
      kRequestHeader + len > slots * kRequestSlot) {
    return Errc::kInvalidArgument;
  }
  q.op = static_cast<Opcode>(op);
  ByteReader r(in.subspan(kRequestHeader, len));
  switch (q.op) {
    case Opcode::kOpen:
      q.flags = r.u32();
      q.parent = get_inode(r);
      q.pred = get_dentry(r);
      q.target = get_dentry(r);
      q.inode = get_inode(r);
      q.mode = r.u32();
      q.name = get_name(r);
      break;
    case Opcode::kCreat:
    case Opcode::kMkdir:
      q.flags = r.u32();
      q.parent = get_inode(r);
      q.pred = get_dentry(r);
      q.mode = r.u32();
      q.name = get_name(r);
      break;
    case Opcode::kUnlink:
    case Opcode::kRmdir:
      q.flags = r.u32();
      q.parent = get_inode(r);
      q.target = get_dentry(r);
      q.inode = get_inode(r);
      q.name = get_name(r);
      break;
    case Opcode::kRename:
      q.flags = r.u32();
      q.parent = get_inode(r);
      q.target = get_dentry(r);
      q.inode = get_inode(r);
      q.parent2 = get_inode(r);
      q.pred2 = get_dentry(r);
      q.name = get_name(r);
      q.name2 = get_name(r);
      break;
    case Opcode::kWriteCommit: {
      q.inode = get_inode(r);
      q.offset = r.u64();
      q.size = r.u64();
      q.version = r.u64();
      q.scratch_page = r.u64();
      q.count = r.u64();
      const std::size_t n = r.u8();
      if (n > kInlineRuns) return Errc::kInvalidArgument;
      q.runs.resize(n);
      for (auto& run : q.runs) {
        run.page_no = r.u64();
        run.count = r.u32();
      }
      break;
    }
    case Opcode::kLeasePages:
      q.count = r.u64();
      break;
    case Opcode::kClose:
      q.flags = r.u32();
      q.inode = get_inode(r);
      break;
    case Opcode::kReadFallback:
      q.inode = get_inode(r);
      q.offset = r.u64();
      q.size = r.u64();
      q.buffer = r.u64();
      break;
    case Opcode::kRegister:
      break;
  }
  if (r.failed() || r.remaining() != 0) return Errc::kInvalidArgument;
  return q;
}

void encode_response(const Response& resp, std::span<std::byte, kResponseSlot> out) {
  std::memset(out.data(), 0, out.size());
  put_u64(out.data(), resp.seq);
  put_u32(out.data() + 8, static_cast<std::uint32_t>(resp.status));
  for (int i = 0; i < 5; ++i) put_u64(out.data() + 16 + 8 * i, resp.v[i]);
}

Response decode_response(std::span<const std::byte, kResponseSlot> in) {
  Response r;
  r.seq = get_u64(in.data());
  r.status = static_cast<Errc>(get_u32(in.data() + 8));
  for (int i = 0; i < 5; ++i) r.v[i] = get_u64(in.data() + 16 + 8 * i);
  return r;
}

// ---- Doorbell --------------------------------------------------------------

void Doorbell::ring() {
  const std::uint64_t now = rings_.fetch_add(1, std::memory_order_seq_cst) + 1;
  if (sleeping_.load(std::memory_order_seq_cst)) {
    std::lock_guard lock(mu_);
    if (now >= target_) cv_.notify_one();
  }
}

bool Doorbell::wait_until(std::uint64_t target, std::chrono::microseconds timeout) {
  std::unique_lock lock(mu_);
  target_ = target;
  sleeping_.store(true, std::memory_order_seq_cst);
  const bool met = cv_.wait_for(lock, timeout, [&] {
    return kicked_ || rings_.load(std::memory_order_seq_cst) >= target_;
  });
  sleeping_.store(false, std::memory_order_relaxed);
  kicked_ = false;
  return met;
}

void Doorbell::kick() {
  std::lock_guard lock(mu_);
  kicked_ = true;
  cv_.notify_all();
}

// ---- Channel ---------------------------------------------------------------

Channel::Channel(ClientId id, Doorbell& bell)
    : id_(id),
      bell_(bell),
      req_(new std::byte[kRingSlots * kRequestSlot]()),
      resp_(new std::byte[kRingSlots * kResponseSlot]()) {}

Status Channel::post(const Request& req) {
  auto bytes = encode_request(req);
  if (!bytes) return bytes.error();
  const std::size_t n = bytes->size() / kRequestSlot;
  const std::uint64_t tail = req_tail_.load(std::memory_order_relaxed);
  while (tail + n - req_head_.load(std::memory_order_acquire) > kRingSlots) std::this_thread::yield();
  for (std::size_t i = 0; i < n; ++i) {
    std::memcpy(req_.get() + ((tail + i) % kRingSlots) * kRequestSlot, bytes->data() + i * kRequestSlot,
                kRequestSlot);
  }
  req_tail_.store(tail + n, std::memory_order_release);
  posted_.fetch_add(1, std::memory_order_relaxed);
  bell_.ring();
  return {};
}

Response Channel::wait_response(const std::function<void()>& pump) {
  const std::uint64_t head = resp_head_.load(std::memory_order_relaxed);
  for (;;) {
    const std::uint64_t tail = resp_tail_.load(std::memory_order_acquire);
    if (tail != head) break;
    if (pump) {
      pump();
    } else {
      resp_tail_.wait(tail, std::memory_order_acquire);
    }
  }
  Response r = decode_response(std::span<const std::byte, kResponseSlot>(
      resp_.get() + (head % kRingSlots) * kResponseSlot, kResponseSlot));
  resp_head_.store(head + 1, std::memory_order_release);
  return r;
}

const Request* Channel::peek() {
  if (peeked_) return &*peeked_;
  const std::uint64_t head = req_head_.load(std::memory_order_relaxed);
  const std::uint64_t tail = req_tail_.load(std::memory_order_acquire);
  if (head == tail) return nullptr;
  // Gather the (possibly wrapping) slots of one request.
  const std::byte* first = req_.get() + (head % kRingSlots) * kRequestSlot;
  std::size_t n = request_slots(std::span(first, kRequestSlot));
  if (n == 0 || n > kMaxRequestSlots || head + n > tail) n = 1;
  std::vector<std::byte> buf(n * kRequestSlot);
  for (std::size_t i = 0; i < n; ++i) {
    std::memcpy(buf.data() + i * kRequestSlot, req_.get() + ((head + i) % kRingSlots) * kRequestSlot,
                kRequestSlot);
  }
  auto q = decode_request(buf);
  if (!q) {
    // Malformed; the master answers kInvalidArgument.
    Request bad;
    bad.op = Opcode::kRegister;
    bad.seq = get_u64(buf.data());
    bad.client = id_;
    bad.flags = 0xffffffff;
    peeked_ = bad;
  } else {
    peeked_ = std::move(*q);
    peeked_->client = id_;
  }
  peeked_slots_ = n;
  return &*peeked_;
}

void Channel::pop() {
  if (!peeked_) return;
  req_head_.store(req_head_.load(std::memory_order_relaxed) + peeked_slots_, std::memory_order_release);
  peeked_.reset();
  peeked_slots_ = 0;
}

void Channel::respond(const Response& resp) {
  const std::uint64_t tail = resp_tail_.load(std::memory_order_relaxed);
  while (tail - resp_head_.load(std::memory_order_acquire) >= kRingSlots) std::this_thread::yield();
  encode_response(resp, std::span<std::byte, kResponseSlot>(resp_.get() + (tail % kRingSlots) * kResponseSlot,
                                                            kResponseSlot));
  resp_tail_.store(tail + 1, std::memory_order_release);
  answered_.fetch_add(1, std::memory_order_relaxed);
  resp_tail_.notify_all();
}

}  // namespace kucofs
