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

// kucofs command-line driver: bench, crashtest, oracle, gentrace.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "kucofs/harness/bench.hpp"
#include "kucofs/harness/crashtest.hpp"
#include "kucofs/harness/oracle.hpp"
#include "kucofs/harness/trace.hpp"

namespace h = kucofs::harness;

namespace {

std::string pmem_path() {
  const char* p = std::getenv("KUCOFS_PMEM_PATH");
  return p ? p : "";
}

int cmd_bench(const h::BenchOptions& o, const std::string& format) {
  auto r = h::run_bench(o);
  if (!r) {
    std::cerr << "bench failed: " << kucofs::errc_name(r.error()) << '\n';
    return 1;
  }
  if (format == "json") {
    std::cout << h::to_json(*r).dump(2) << '\n';
  } else {
    std::cout << h::to_table(*r);
  }
  return 0;
}

int cmd_crashtest(const std::string& path, const h::CrashOptions& o) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "cannot read " << path << '\n';
    return 2;
  }
  std::stringstream text;
  text << in.rdbuf();
  auto trace = h::parse_trace(text.str());
  if (!trace) {
    std::cerr << fmt::format("{}:{}: {}\n", path, trace.error().line, trace.error().message);
    return 2;
  }
  auto r = h::run_crashtest(*trace, o);
  if (!r) {
    std::cerr << "crashtest failed: " << kucofs::errc_name(r.error()) << '\n';
    return 1;
  }
  nlohmann::json j = {{"ops", r->ops},          {"fences", r->fences},         {"crash_points", r->crash_points},
                      {"commits", r->commits},  {"torn_tails", r->torn_tails}, {"seconds", r->seconds},
                      {"passed", r->passed()},  {"violations", nlohmann::json::array()}};
  for (const auto& v : r->violations) j["violations"].push_back({{"fence", v.fence}, {"what", v.what}});
  std::cout << j.dump(2) << '\n';
  return r->passed() ? 0 : 1;
}

int cmd_oracle(const h::OracleOptions& o) {
  const auto r = h::run_oracle(o);
  nlohmann::json j = {{"ops", r.ops},
                      {"threads", r.threads},
                      {"commits", r.commits},
                      {"client_messages", r.client_messages},
                      {"master_requests", r.master_requests},
                      {"creats", r.creats},
                      {"key_comparisons", r.key_comparisons},
                      {"divergences", r.divergences},
                      {"seconds", r.seconds},
                      {"passed", r.passed()}};
  std::cout << j.dump(2) << '\n';
  if (!r.passed()) std::cerr << r.first_divergence << '\n';
  return r.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kucofs: persistent-memory file system library driver"};
  app.require_subcommand(1);

  h::BenchOptions bo;
  std::string report = "table";
  bool bench_no_offload = false;
  auto* bench = app.add_subcommand("bench", "run a microbenchmark workload");
  bench->add_option("--workload", bo.workload)->check(CLI::IsMember(h::workload_names()));
  bench->add_option("--threads", bo.threads)->check(CLI::Range(1u, 256u));
  bench->add_option("--ops", bo.ops, "operations per thread");
  bench->add_option("--duration", bo.duration, "seconds; overrides --ops");
  bench->add_option("--io-size", bo.io_size);
  bench->add_option("--file-pages", bo.file_pages);
  bench->add_option("--pmem-size", bo.pmem_size);
  bench->add_option("--seed", bo.seed);
  bench->add_option("--batch-max", bo.batch_max);
  bench->add_option("--ring-slots", bo.ring_slots);
  bench->add_flag("--no-offload", bench_no_offload);
  bench->add_option("--report", report)->check(CLI::IsMember({"json", "table"}));

  h::CrashOptions co;
  std::string trace_path;
  std::string policy = "strict";
  auto* crash = app.add_subcommand("crashtest", "replay a trace with crash injection");
  crash->add_option("--trace", trace_path)->required();
  crash->add_option("--policy", policy)->check(CLI::IsMember({"strict", "prob"}));
  crash->add_option("--seed", co.seed);
  crash->add_option("--every", co.every, "crash at every n-th fence");
  crash->add_option("--pmem-size", co.pmem_size);

  h::OracleOptions oo;
  bool oracle_no_offload = false;
  auto* oracle = app.add_subcommand("oracle", "randomized differential test against the model");
  oracle->add_option("--ops", oo.ops);
  oracle->add_option("--threads", oo.threads)->check(CLI::Range(1u, 256u));
  oracle->add_option("--seed", oo.seed);
  oracle->add_option("--pmem-size", oo.pmem_size);
  oracle->add_flag("--no-offload", oracle_no_offload);

  std::size_t gen_ops = 1000;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  auto* gen = app.add_subcommand("gentrace", "write a random mixed trace");
  gen->add_option("--ops", gen_ops);
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out", gen_out, "file; stdout when omitted");

  CLI11_PARSE(app, argc, argv);

  if (*bench) {
    bo.offload = !bench_no_offload;
    bo.pmem_path = pmem_path();
    return cmd_bench(bo, report);
  }
  if (*crash) {
    co.policy = policy == "strict" ? kucofs::CrashPolicy::kStrict : kucofs::CrashPolicy::kProbabilistic;
    co.pmem_path = pmem_path();
    return cmd_crashtest(trace_path, co);
  }
  if (*oracle) {
    oo.offload = !oracle_no_offload;
    oo.pmem_path = pmem_path();
    return cmd_oracle(oo);
  }
  const std::string text = h::format_trace(h::generate_trace(gen_ops, gen_seed));
  if (gen_out.empty()) {
    std::cout << text;
  } else {
    std::ofstream(gen_out) << text;
  }
  return 0;
}
