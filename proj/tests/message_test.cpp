#include <gtest/gtest.h>

#include <thread>

#include "kucofs/message.hpp"

namespace kucofs {
namespace {

// Each opcode carries only its own fields; everything else decodes as the
// default.
Request sample(Opcode op) {
  Request r;
  r.op = op;
  r.seq = 12;
  r.client = 3;
  switch (op) {
    case Opcode::kOpen:
      r.flags = kFlagCreate | kFlagExclusive;
      r.parent = {5, 6};
      r.pred = {0x1000, 0xabcdef, 11};
      r.target = {0x3000, 0x777, 13};
      r.inode = {9, 10};
      r.mode = 0644;
      r.name = "file";
      break;
    case Opcode::kCreat:
    case Opcode::kMkdir:
      r.flags = kFlagPaths;
      r.parent = {5, 6};
      r.pred = {0x1000, 0xabcdef, 11};
      r.mode = 0755;
      r.name = "/some/path";
      break;
    case Opcode::kUnlink:
    case Opcode::kRmdir:
      r.parent = {5, 6};
      r.target = {0x3000, 0x777, 13};
      r.inode = {9, 10};
      r.name = "victim";
      break;
    case Opcode::kRename:
      r.parent = {5, 6};
      r.target = {0x3000, 0x777, 13};
      r.inode = {9, 10};
      r.parent2 = {7, 8};
      r.pred2 = {0x2000, 0x123456, 12};
      r.name = "source-name";
      r.name2 = "destination-name";
      break;
    case Opcode::kWriteCommit:
      r.inode = {9, 10};
      r.offset = 1ULL << 40;
      r.size = 12345;
      r.version = 99;
      r.scratch_page = 77;
      r.count = 6;
      r.runs = {{1, 2}, {10, 4}};
      break;
    case Opcode::kLeasePages:
      r.count = 1024;
      break;
    case Opcode::kClose:
      r.flags = kFlagExit;
      r.inode = {9, 10};
      break;
    case Opcode::kReadFallback:
      r.inode = {9, 10};
      r.offset = 4096;
      r.size = 100;
      r.buffer = 0xdeadbeef;
      break;
    case Opcode::kRegister:
      break;
  }
  return r;
}

TEST(RequestCodec, RoundTripEveryOpcode) {
  for (int op = 1; op <= static_cast<int>(Opcode::kRegister); ++op) {
    const Request r = sample(static_cast<Opcode>(op));
    auto bytes = encode_request(r);
    ASSERT_TRUE(bytes.ok()) << op;
    EXPECT_EQ(bytes->size() % kRequestSlot, 0u);
    EXPECT_EQ(request_slots(*bytes), bytes->size() / kRequestSlot);
    auto back = decode_request(*bytes);
    ASSERT_TRUE(back.ok()) << op;
    EXPECT_EQ(*back, r) << opcode_name(r.op);
  }
}

TEST(RequestCodec, SmallRequestIsOneSlot) {
  Request r;
  r.op = Opcode::kLeasePages;
  r.count = 1024;
  auto bytes = encode_request(r);
  ASSERT_TRUE(bytes.ok());
  EXPECT_EQ(bytes->size(), kRequestSlot);
}

TEST(RequestCodec, LongNamesSpanSlots) {
  Request r;
  r.op = Opcode::kRename;
  r.name = std::string(255, 'a');
  r.name2 = std::string(255, 'b');
  auto bytes = encode_request(r);
  ASSERT_TRUE(bytes.ok());
  EXPECT_GT(bytes->size(), kRequestSlot);
  EXPECT_LE(bytes->size(), kMaxRequestSlots * kRequestSlot);
  EXPECT_EQ(*decode_request(*bytes), r);
}

TEST(RequestCodec, Limits) {
  Request big;
  big.op = Opcode::kCreat;
  big.name = std::string(kMaxRequestPayload, 'x');
  auto r = encode_request(big);
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.error(), Errc::kNameTooLong);

  Request runs;
  runs.op = Opcode::kWriteCommit;
  for (std::size_t i = 0; i <= kInlineRuns; ++i) runs.runs.push_back({i * 10 + 1, 1});
  auto rr = encode_request(runs);
  ASSERT_FALSE(rr.ok());
  EXPECT_EQ(rr.error(), Errc::kInvalidArgument);
}

TEST(RequestCodec, Truncated) {
  auto bytes = encode_request(sample(Opcode::kRename));
  ASSERT_TRUE(bytes.ok());
  EXPECT_FALSE(decode_request(std::span(bytes->data(), 8)).ok());
}

TEST(ResponseCodec, RoundTrip) {
  Response r;
  r.seq = 5;
  r.status = Errc::kLeaseViolation;
  for (int i = 0; i < 5; ++i) r.v[i] = 1ULL << (10 * i + 3);
  std::array<std::byte, kResponseSlot> buf{};
  encode_response(r, buf);
  const Response back = decode_response(buf);
  EXPECT_EQ(back.seq, 5u);
  EXPECT_EQ(back.status, Errc::kLeaseViolation);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(back.v[i], r.v[i]);
}

// Master thread echoes each request's seq and mode. Far more messages than
// ring slots forces wrap-around on both rings.
TEST(ChannelTest, EchoAcrossWrap) {
  Doorbell bell;
  Channel ch(4, bell);
  constexpr int kCount = 2000;
  std::thread master([&] {
    int served = 0;
    while (served < kCount) {
      const Request* q = ch.peek();
      if (!q) {
        bell.wait_until(bell.rings(), std::chrono::microseconds(100));
        continue;
      }
      Response resp;
      resp.seq = q->seq;
      resp.v[0] = q->mode;
      resp.v[1] = q->name.size();
      ch.pop();
      ch.respond(resp);
      ++served;
    }
  });
  for (int i = 0; i < kCount; ++i) {
    Request r;
    r.op = Opcode::kCreat;
    r.seq = i;
    r.mode = i * 3;
    r.name = std::string(static_cast<std::size_t>(i % 400), 'n');
    ASSERT_TRUE(ch.post(r).ok());
    const Response resp = ch.wait_response();
    ASSERT_EQ(resp.seq, static_cast<std::uint64_t>(i));
    ASSERT_EQ(resp.v[0], static_cast<std::uint64_t>(i) * 3);
    ASSERT_EQ(resp.v[1], static_cast<std::uint64_t>(i % 400));
  }
  master.join();
  EXPECT_EQ(ch.posted(), static_cast<std::uint64_t>(kCount));
  EXPECT_EQ(ch.answered(), static_cast<std::uint64_t>(kCount));
  EXPECT_GE(bell.rings(), static_cast<std::uint64_t>(kCount));
}

TEST(ChannelTest, InlinePump) {
  Doorbell bell;
  Channel ch(1, bell);
  int pumps = 0;
  Request r;
  r.op = Opcode::kLeasePages;
  r.seq = 1;
  ASSERT_TRUE(ch.post(r).ok());
  const Response resp = ch.wait_response([&] {
    ++pumps;
    if (const Request* q = ch.peek()) {
      Response out;
      out.seq = q->seq;
      ch.pop();
      ch.respond(out);
    }
  });
  EXPECT_EQ(resp.seq, 1u);
  EXPECT_GE(pumps, 1);
}

}  // namespace
}  // namespace kucofs
