#include <gtest/gtest.h>

#include "kucofs/harness/bench.hpp"
#include "kucofs/harness/crashtest.hpp"
#include "kucofs/harness/model_fs.hpp"
#include "kucofs/harness/oracle.hpp"
#include "kucofs/harness/trace.hpp"

namespace kucofs::harness {
namespace {

std::vector<TraceOp> parse(std::string_view text) {
  auto r = parse_trace(text);
  EXPECT_TRUE(r.ok()) << (r.ok() ? "" : r.error().message);
  return r.ok() ? *r : std::vector<TraceOp>{};
}

TEST(Trace, ParseAndFormat) {
  const auto ops = parse(
      "# setup\n"
      "mkdir /d\n"
      "\n"
      "creat /d/f\n"
      "write /d/f 10 4 #99\n"
      "write /d/f 0 3 0aff10\n"
      "rename /d/f /d/g\n"
      "checkpoint\n"
      "unlink /d/g\n"
      "rmdir /d\n");
  ASSERT_EQ(ops.size(), 8u);
  EXPECT_EQ(ops[0].kind, TraceKind::kMkdir);
  EXPECT_EQ(ops[2].offset, 10u);
  EXPECT_TRUE(ops[2].seeded);
  EXPECT_EQ(ops[2].seed, 99u);
  EXPECT_EQ(ops[2].bytes(), seeded_bytes(99, 4));
  EXPECT_FALSE(ops[3].seeded);
  EXPECT_EQ(ops[3].bytes(), (std::vector<std::byte>{std::byte{0x0a}, std::byte{0xff}, std::byte{0x10}}));
  EXPECT_EQ(ops[4].path2, "/d/g");
  EXPECT_EQ(ops[5].kind, TraceKind::kCheckpoint);

  const auto again = parse(format_trace(ops));
  EXPECT_EQ(format_trace(again), format_trace(ops));
}

TEST(Trace, Errors) {
  auto bad = parse_trace("creat /a\nfrobnicate /b\n");
  ASSERT_FALSE(bad.ok());
  EXPECT_EQ(bad.error().line, 2u);
  EXPECT_FALSE(parse_trace("write /a 0 2 abc\n").ok());
  EXPECT_FALSE(parse_trace("rename /a\n").ok());
  EXPECT_FALSE(parse_trace("checkpoint now\n").ok());
}

TEST(Trace, GeneratedIsDeterministicAndMostlyLive) {
  const auto a = generate_trace(500, 7);
  const auto b = generate_trace(500, 7);
  ASSERT_EQ(a.size(), 500u);
  EXPECT_EQ(format_trace(a), format_trace(b));
  EXPECT_NE(format_trace(a), format_trace(generate_trace(500, 8)));

  // A few ops are meant to fail (non-empty rmdir, a directory renamed into
  // itself); the rest must apply cleanly in order.
  ModelFS m;
  std::size_t failed = 0;
  for (const auto& op : a) {
    Errc e = Errc::kOk;
    switch (op.kind) {
      case TraceKind::kCreat: e = m.create(op.path); break;
      case TraceKind::kMkdir: e = m.mkdir(op.path); break;
      case TraceKind::kUnlink: e = m.unlink(op.path); break;
      case TraceKind::kRmdir: e = m.rmdir(op.path); break;
      case TraceKind::kRename: e = m.rename(op.path, op.path2); break;
      case TraceKind::kWrite: e = m.write(op.path, op.offset, op.bytes()); break;
      case TraceKind::kCheckpoint: break;
    }
    failed += e != Errc::kOk;
  }
  EXPECT_LT(failed, a.size() / 10);
  EXPECT_GT(m.paths(InodeKind::kFile).size(), 10u);
}

TEST(Model, Basics) {
  ModelFS m;
  EXPECT_EQ(m.mkdir("/d"), Errc::kOk);
  EXPECT_EQ(m.create("/d/f"), Errc::kOk);
  EXPECT_EQ(m.mkdir("/d"), Errc::kExists);
  EXPECT_EQ(m.rmdir("/d"), Errc::kNotEmpty);
  const auto data = seeded_bytes(3, 10);
  EXPECT_EQ(m.write("/d/f", 5, data), Errc::kOk);
  auto r = m.read("/d/f", 0, 100);
  ASSERT_TRUE(r.ok());
  ASSERT_EQ(r->size(), 15u);
  for (int i = 0; i < 5; ++i) EXPECT_EQ((*r)[i], std::byte{0});
  EXPECT_EQ(m.stat("/d/f")->size, 15u);
  EXPECT_EQ(m.rename("/d/f", "/g"), Errc::kOk);
  EXPECT_EQ(m.stat("/d/f").error(), Errc::kNotFound);
  EXPECT_EQ(m.rmdir("/d"), Errc::kOk);
}

TEST(Crash, ThreePageWriteEveryFence) {
  const auto trace = parse("creat /f\nwrite /f 0 12288 #5\nwrite /f 100 8000 #6\n");
  CrashOptions opts;
  auto r = run_crashtest(trace, opts);
  ASSERT_TRUE(r.ok());
  EXPECT_TRUE(r->passed()) << (r->violations.empty() ? "" : r->violations[0].what);
  EXPECT_EQ(r->ops, 3u);
  EXPECT_GT(r->crash_points, 0u);
  EXPECT_EQ(r->crash_points, r->fences);
}

TEST(Crash, ProbabilisticRunsRepeat) {
  const auto trace = generate_trace(60, 11);
  CrashOptions opts;
  opts.policy = CrashPolicy::kProbabilistic;
  opts.seed = 42;
  auto a = run_crashtest(trace, opts);
  auto b = run_crashtest(trace, opts);
  ASSERT_TRUE(a.ok());
  ASSERT_TRUE(b.ok());
  EXPECT_TRUE(a->passed()) << (a->violations.empty() ? "" : a->violations[0].what);
  EXPECT_EQ(a->fences, b->fences);
  EXPECT_EQ(a->crash_points, b->crash_points);
  EXPECT_EQ(a->commits, b->commits);
  EXPECT_EQ(a->torn_tails, b->torn_tails);
  EXPECT_EQ(a->replayed, b->replayed);
  EXPECT_EQ(a->violations.size(), b->violations.size());
}

TEST(Crash, StrictShortTrace) {
  auto r = run_crashtest(generate_trace(150, 3), CrashOptions{});
  ASSERT_TRUE(r.ok());
  EXPECT_TRUE(r->passed()) << (r->violations.empty() ? "" : r->violations[0].what);
}

TEST(Oracle, ZeroOps) {
  OracleOptions opts;
  opts.ops = 0;
  opts.pmem_size = 64ULL << 20;
  const auto r = run_oracle(opts);
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(r.ops, 0u);
}

TEST(Oracle, ShortRunBothModes) {
  for (bool offload : {true, false}) {
    OracleOptions opts;
    opts.ops = 3000;
    opts.offload = offload;
    opts.pmem_size = 128ULL << 20;
    const auto r = run_oracle(opts);
    EXPECT_TRUE(r.passed()) << r.first_divergence;
    EXPECT_EQ(r.ops, 3000u);
  }
}

TEST(Bench, CreatMedium) {
  BenchOptions opts;
  opts.workload = "creat-medium";
  opts.ops = 10000;
  opts.pmem_size = 256ULL << 20;
  auto r = run_bench(opts);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r->ops, 10000u);
  EXPECT_EQ(r->files_after, 10000u);
  EXPECT_EQ(r->creats, 10000u);
  EXPECT_GT(r->ops_per_sec, 0.0);
  const auto j = to_json(*r);
  EXPECT_EQ(j.at("workload"), "creat-medium");
  EXPECT_FALSE(to_table(*r).empty());
}

TEST(Bench, UnknownWorkload) {
  BenchOptions opts;
  opts.workload = "nope";
  EXPECT_FALSE(run_bench(opts).ok());
}

}  // namespace
}  // namespace kucofs::harness
