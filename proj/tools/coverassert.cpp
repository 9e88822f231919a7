#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "coverassert/canonical_json.hpp"
#include "coverassert/commands.hpp"
#include "coverassert/error.hpp"
#include "coverassert/report.hpp"

namespace fs = std::filesystem;
using namespace coverassert;

namespace {

struct Overrides {
  std::string config;
  std::vector<std::string> rtl;
  std::string assertions, spec, cache, out, generator;
  bool offline = false;
  std::optional<double> theta, tau, alpha, sigma;
  std::optional<int> max_iter;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "config/v1 JSON file");
  cmd->add_option("--rtl", o.rtl, "RTL file or directory (repeatable)");
  cmd->add_option("--assertions", o.assertions, "assertions/v1 JSON file");
  cmd->add_option("--spec", o.spec, "spec/v1 JSON file (or text in live mode)");
  cmd->add_option("--cache", o.cache, "embedding cache directory");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_flag("--offline", o.offline, "force the offline provider");
  cmd->add_option("--theta", o.theta, "match-degree threshold");
  cmd->add_option("--tau", o.tau, "structural distance cannot-link threshold");
  cmd->add_option("--alpha", o.alpha, "semantic weight of the point score");
  cmd->add_option("--sigma", o.sigma, "minimum point score");
  cmd->add_option("--max-iter", o.max_iter, "feedback iteration cap");
  cmd->add_option("--seed", o.seed, "seed for hashed embeddings");
}

RunConfig resolve(const Overrides& o) {
  RunConfig cfg;
  if (!o.config.empty()) {
    std::error_code ec;
    if (!fs::is_regular_file(o.config, ec)) throw Error("config file not found: " + o.config);
    try {
      cfg = config_from_json(nlohmann::json::parse(read_file(o.config)), fs::path(o.config).parent_path());
    } catch (const nlohmann::json::exception& e) {
      throw Error(o.config + ": " + e.what());
    } catch (const SchemaViolation& e) {
      throw Error(o.config + ": " + e.what());
    }
  }
  if (!o.rtl.empty()) cfg.paths.rtl = o.rtl;
  if (!o.assertions.empty()) cfg.paths.assertions = o.assertions;
  if (!o.spec.empty()) cfg.paths.spec = o.spec;
  if (!o.cache.empty()) cfg.paths.cache = o.cache;
  if (!o.out.empty()) cfg.paths.out = o.out;
  if (!o.generator.empty()) cfg.paths.generator = o.generator;
  if (o.offline) cfg.provider.mode = ProviderMode::Offline;
  if (o.theta) cfg.loop.theta = *o.theta;
  if (o.tau) cfg.fusion.tau = *o.tau;
  if (o.alpha) cfg.mapping.alpha = *o.alpha;
  if (o.sigma) cfg.mapping.sigma = *o.sigma;
  if (o.max_iter) cfg.loop.max_iterations = *o.max_iter;
  if (o.seed) cfg.seed = *o.seed;
  cfg.provider.seed = cfg.seed;
  cfg.provider.cache_path = cfg.paths.cache;
  validate(cfg);
  return cfg;
}

void print_summary(const CoverageReport& r) {
  std::fprintf(stderr, "N=%zu S=%zu min_degree=%.3f mean_degree=%.3f\n", r.n, r.s, r.min_degree, r.mean_degree);
  if (r.terminated_reason) std::fprintf(stderr, "terminated: %s\n", r.terminated_reason->c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coverage-driven assertion analysis: clusters SVAs, maps them to spec points, reports gaps"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  Overrides o;
  auto* analyze = app.add_subcommand("analyze", "single pass: parse, ingest, features, cluster, map, report");
  add_common(analyze, o);
  auto* loop = app.add_subcommand("loop", "run the coverage feedback loop with a generator adapter");
  add_common(loop, o);
  loop->add_option("--generator", o.generator, "stub fixture (.json) or executable adapter");
  auto* report = app.add_subcommand("report", "re-render report.md from a previous run");
  std::string report_dir = "out";
  report->add_option("--out", report_dir, "output directory of the run");
  auto* dump_ast_cmd = app.add_subcommand("dump-ast", "print the parsed syntax trees as JSON");
  add_common(dump_ast_cmd, o);
  auto* dump_features_cmd = app.add_subcommand("dump-features", "write sd.json and q.json");
  add_common(dump_features_cmd, o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (analyze->parsed()) {
      auto result = run_analyze(resolve(o));
      print_summary(result.report);
      return exit_code_for(result.report);
    }
    if (loop->parsed()) {
      auto result = run_loop_command(resolve(o));
      print_summary(result.report);
      return exit_code_for(result.report);
    }
    if (report->parsed()) {
      std::string md = run_report(report_dir);
      write_file_atomic(fs::path(report_dir) / "report.md", md);
      std::cout << md;
      return 0;
    }
    if (dump_ast_cmd->parsed()) {
      std::cout << canonical_dump(run_dump_ast(resolve(o)));
      return 0;
    }
    if (dump_features_cmd->parsed()) {
      RunConfig cfg = resolve(o);
      auto doc = run_dump_features(cfg);
      if (!o.out.empty()) {
        write_file_atomic(fs::path(cfg.paths.out) / "sd.json", canonical_dump(doc["sd"]));
        write_file_atomic(fs::path(cfg.paths.out) / "q.json", canonical_dump(doc["q"]));
      } else {
        std::cout << canonical_dump(doc);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
