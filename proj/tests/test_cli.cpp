#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "coverassert/canonical_json.hpp"
#include "coverassert/commands.hpp"
#include "coverassert/error.hpp"
#include "coverassert/report.hpp"
#include "fakes.hpp"

using namespace coverassert;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kToy = std::string(COVERASSERT_FIXTURES) + "/toy";

struct Run {
  int code = -1;
  std::string output;  // stdout and stderr
};

Run cli(const std::string& args) {
  std::string cmd = std::string(COVERASSERT_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string toy_args(const fakes::TempDir& out) {
  return "--config " + kToy + "/config.json --out " + out.path().string();
}

RunConfig toy_config() {
  std::ifstream in(kToy + "/config.json");
  return config_from_json(json::parse(in), kToy);
}

}  // namespace

TEST(Config, RoundTripResolvesRelativePaths) {
  auto cfg = toy_config();
  EXPECT_EQ(fs::path(cfg.paths.spec), fs::path(kToy) / "spec.json");
  EXPECT_EQ(cfg.seed, 24301u);
  auto again = config_from_json(config_to_json(cfg));
  EXPECT_EQ(canonical_dump(config_to_json(again)), canonical_dump(config_to_json(cfg)));
  EXPECT_EQ(config_hash(again), config_hash(cfg));
}

TEST(Config, HashIgnoresPathsAndTransportButNotThresholds) {
  auto cfg = toy_config();
  auto moved = cfg;
  moved.paths.out = "/elsewhere";
  moved.provider.max_in_flight = 16;
  moved.provider.backoff_ms = 5;
  EXPECT_EQ(config_hash(moved), config_hash(cfg));
  auto changed = cfg;
  changed.fusion.tau = 14;
  EXPECT_NE(config_hash(changed), config_hash(cfg));
  EXPECT_EQ(config_hash(cfg).size(), 64u);
}

TEST(Config, RejectsBadValues) {
  auto doc = json::parse(R"({"schema":"config/v1","loop":{"theta":1.5}})");
  EXPECT_THROW(validate(config_from_json(doc)), InvalidArgument);
  EXPECT_THROW(config_from_json(json::parse(R"({"schema":"config/v0"})")), SchemaViolation);
}

TEST(Cli, SeedCoverageExitsTwo) {
  fakes::TempDir out;
  auto r = cli("analyze " + toy_args(out));
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_NE(r.output.find("N=9 S=8"), std::string::npos) << r.output;
  for (const char* f : {"report.json", "report.md", "mapping.json", "clusters.json", "payload.json"})
    EXPECT_TRUE(fs::exists(out.path() / f)) << f;
  EXPECT_FALSE(fs::exists(out.path() / ".coverassert.lock"));
}

TEST(Cli, FullCoverageExitsZero) {
  fakes::TempDir out;
  auto r = cli("analyze " + toy_args(out) + " --assertions " + kToy + "/assertions_full.json");
  EXPECT_EQ(r.code, 0) << r.output;
  auto report = json::parse(slurp(out.path() / "report.json"));
  EXPECT_EQ(report["global"]["N"], 14);
  EXPECT_EQ(report["global"]["S"], 13);
  EXPECT_EQ(report["global"]["min_degree"], 1.0);
  auto md = slurp(out.path() / "report.md");
  EXPECT_EQ(md.find("## Uncovered points"), std::string::npos);
  EXPECT_NE(md.find("| cmd | Byte command controller | 100.0% | 4 | 4 |"), std::string::npos) << md;
}

TEST(Cli, SingleGapExitsTwoAndListsThePoint) {
  fakes::TempDir out;
  auto doc = json::parse(slurp(kToy + "/assertions_full.json"));
  auto& list = doc["assertions"];
  list.erase(std::remove_if(list.begin(), list.end(), [](const json& a) { return a["id"] == "g-q-3"; }),
             list.end());
  auto path = out.path() / "assertions.json";
  std::ofstream(path) << doc.dump();
  auto r = cli("analyze " + toy_args(out) + " --assertions " + path.string());
  EXPECT_EQ(r.code, 2) << r.output;
  auto report = json::parse(slurp(out.path() / "report.json"));
  std::vector<std::string> open;
  for (const auto& s : report["subspecs"])
    for (const auto& p : s["uncovered"]) open.push_back(p["id"]);
  EXPECT_EQ(open, std::vector<std::string>{"q-3"});
}

TEST(Cli, MissingSpecNamesThePath) {
  fakes::TempDir out;
  auto r = cli("analyze " + toy_args(out) + " --spec /no/such/spec.json");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("/no/such/spec.json"), std::string::npos) << r.output;
}

TEST(Cli, LoopReachesThreshold) {
  fakes::TempDir out;
  auto r = cli("loop " + toy_args(out));
  EXPECT_EQ(r.code, 0) << r.output;
  auto state = json::parse(slurp(out.path() / "loop_state.json"));
  EXPECT_EQ(state["terminated_reason"], "threshold_met");
  EXPECT_TRUE(fs::exists(out.path() / "iter_0" / "mapping.json"));
  EXPECT_TRUE(fs::exists(out.path() / "iter_0" / "payload.json"));
  EXPECT_TRUE(fs::exists(out.path() / "iter_1" / "clusters.json"));
  auto md = slurp(out.path() / "report.md");
  EXPECT_NE(md.find("| 0 | 9 | 9 | 8 | 0.500 |"), std::string::npos) << md;
  EXPECT_NE(md.find("| 1 | 5 | 14 | 13 | 1.000 |"), std::string::npos) << md;
}

TEST(Cli, EmptyAdapterIsExhausted) {
  fakes::TempDir out;
  auto stub = out.path() / "empty_stub.json";
  std::ofstream(stub) << R"({"schema": "stub-generator/v1", "points": {}})";
  auto r = cli("loop " + toy_args(out) + " --generator " + stub.string());
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_NE(r.output.find("generator_exhausted"), std::string::npos) << r.output;
}

TEST(Cli, ZeroIterationsSkipsTheAdapter) {
  fakes::TempDir out;
  auto r = cli("loop " + toy_args(out) + " --max-iter 0 --generator /no/such/adapter.json");
  EXPECT_EQ(r.code, 1);  // the adapter path is still resolved up front
  r = cli("loop " + toy_args(out) + " --max-iter 0");
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_NE(r.output.find("max_iterations"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(out.path() / "iter_1"));
}

TEST(Cli, ReportRerendersIdentically) {
  fakes::TempDir out;
  ASSERT_EQ(cli("analyze " + toy_args(out)).code, 2);
  auto before = slurp(out.path() / "report.md");
  auto r = cli("report --out " + out.path().string());
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(slurp(out.path() / "report.md"), before);
  EXPECT_NE(before.find("## Coverage by sub-spec"), std::string::npos);
  EXPECT_NE(before.find("## Uncovered points"), std::string::npos);
}

TEST(Cli, ReportWithoutArtifactsFails) {
  fakes::TempDir out;
  auto r = cli("report --out " + out.path().string());
  EXPECT_EQ(r.code, 1);
  EXPECT_THROW(run_report(out.path()), MissingArtifacts);
}

TEST(Cli, LockedOutputDirectoryIsRefused) {
  fakes::TempDir out;
  std::ofstream(out.path() / ".coverassert.lock") << "123\n";
  auto r = cli("analyze " + toy_args(out));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("locked"), std::string::npos) << r.output;
}

TEST(Cli, LockIsExclusiveInProcess) {
  fakes::TempDir out;
  OutDirLock first(out.path());
  EXPECT_THROW(OutDirLock second(out.path()), Error);
}

TEST(Cli, DumpAstAndFeatures) {
  auto ast = cli("dump-ast --rtl " + kToy + "/rtl");
  EXPECT_EQ(ast.code, 0);
  EXPECT_NE(ast.output.find("ast-dump/v1"), std::string::npos);
  fakes::TempDir out;
  auto f = cli("dump-features " + toy_args(out));
  EXPECT_EQ(f.code, 0) << f.output;
  auto sd = json::parse(slurp(out.path() / "sd.json"));
  auto q = json::parse(slurp(out.path() / "q.json"));
  EXPECT_EQ(sd["schema"], "features/v1");
  EXPECT_EQ(q["schema"], "features/v1");
}

TEST(Cli, BadFlagIsAnError) { EXPECT_NE(cli("analyze --no-such-flag").code, 0); }

TEST(Report, ExitCodeFollowsThreshold) {
  CoverageReport r;
  r.theta = 0.85;
  r.subspecs = {{"a", "A", 1.0, {}, {}}, {"b", "B", 0.9, {}, {}}};
  EXPECT_EQ(exit_code_for(r), 0);
  r.subspecs[1].match_degree = 0.85;
  EXPECT_EQ(exit_code_for(r), 2);
}

TEST(Report, JsonRoundTrip) {
  fakes::TempDir out;
  auto cfg = toy_config();
  cfg.paths.out = out.path().string();
  auto result = run_analyze(cfg);
  auto text = canonical_dump(report_to_json(result.report));
  EXPECT_EQ(canonical_dump(report_to_json(report_from_json(json::parse(text)))), text);
  EXPECT_EQ(result.report.provenance.tool_version, "0.1.0");
  EXPECT_EQ(result.report.provenance.inputs.count("spec"), 1u);
  EXPECT_EQ(result.report.provenance.inputs.count("rtl/i2c_regs.v"), 1u);
}
