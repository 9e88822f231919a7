#include "coverassert/commands.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "coverassert/canonical_json.hpp"
#include "coverassert/error.hpp"
#include "coverassert/hashing.hpp"
#include "coverassert/pipeline.hpp"
#include "coverassert/semantic.hpp"

namespace coverassert {

namespace fs = std::filesystem;
using nlohmann::json;

OutDirLock::OutDirLock(const fs::path& out_dir) : path_(out_dir / ".coverassert.lock") {
  fs::create_directories(out_dir);
  int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) throw Error("output directory " + out_dir.string() + " is locked by another run (" +
                                     path_.string() + ")");
    throw Error("cannot create lock " + path_.string() + ": " + std::strerror(errno));
  }
  std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto w = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

OutDirLock::~OutDirLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

namespace {

bool is_rtl_file(const fs::path& p) {
  auto ext = p.extension().string();
  return ext == ".v" || ext == ".sv" || ext == ".vh" || ext == ".svh";
}

std::string require_file(const std::string& path, const char* what) {
  if (path.empty()) throw InvalidArgument(std::string("no ") + what + " path given");
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw Error(std::string(what) + " not found: " + path);
  return read_file(path);
}

struct Inputs {
  AstIndex rtl;
  std::vector<RawAssertion> assertions;
  Provenance provenance;
};

Inputs load_inputs(const RunConfig& cfg, bool need_assertions) {
  Inputs in;
  in.provenance.config_hash = config_hash(cfg);
  auto sources = load_rtl(cfg.paths.rtl);
  for (const auto& s : sources) in.provenance.inputs["rtl/" + s.file_id] = sha256_hex(s.text);
  in.rtl = parse_rtl(sources);
  if (need_assertions) {
    std::string text = require_file(cfg.paths.assertions, "assertions file");
    in.provenance.inputs["assertions"] = sha256_hex(text);
    try {
      in.assertions = parse_assertions_json(json::parse(text));
    } catch (const json::exception& e) {
      throw Error(cfg.paths.assertions + ": " + e.what());
    } catch (const SchemaViolation& e) {
      throw Error(cfg.paths.assertions + ": " + e.what());
    }
  }
  return in;
}

SpecSet load_spec(const RunConfig& cfg, SemanticEngine& engine, Provenance& prov) {
  std::string text = require_file(cfg.paths.spec, "spec file");
  prov.inputs["spec"] = sha256_hex(text);
  fs::path path(cfg.paths.spec);
  if (path.extension() == ".json") {
    SpecSet spec;
    try {
      spec = parse_spec_json(json::parse(text));
    } catch (const json::exception& e) {
      throw Error(cfg.paths.spec + ": " + e.what());
    } catch (const SchemaViolation& e) {
      throw Error(cfg.paths.spec + ": " + e.what());
    }
    embed_spec(spec, engine);
    return spec;
  }
  if (!engine.live())
    throw InvalidArgument(cfg.paths.spec + ": offline mode needs a structured spec/v1 JSON file");
  return build_spec_live(path.stem().string(), text, engine);
}

std::vector<std::string> ids_of(const std::vector<Assertion>& v) {
  std::vector<std::string> out;
  for (const auto& a : v) out.push_back(a.id);
  return out;
}

void write_pass(const fs::path& dir, const PassResult& pass) {
  write_file_atomic(dir / "mapping.json", canonical_dump(mapping_to_json(pass.mapping)));
  write_file_atomic(dir / "clusters.json", canonical_dump(clusters_to_json(pass.clusters, ids_of(pass.active))));
}

void write_report(const fs::path& dir, const CoverageReport& r) {
  write_file_atomic(dir / "report.json", canonical_dump(report_to_json(r)));
  write_file_atomic(dir / "report.md", render_markdown(r));
}

SemanticEngine make_engine(const RunConfig& cfg, std::shared_ptr<LlmProvider> provider) {
  ProviderConfig pc = cfg.provider;
  pc.seed = cfg.seed;
  pc.cache_path = cfg.paths.cache;
  return SemanticEngine(pc, std::move(provider));
}

}  // namespace

std::vector<SourceFile> load_rtl(const std::vector<std::string>& paths) {
  std::vector<SourceFile> out;
  for (const auto& p : paths) {
    std::error_code ec;
    if (fs::is_directory(p, ec)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::recursive_directory_iterator(p))
        if (e.is_regular_file() && is_rtl_file(e.path())) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files)
        out.push_back({fs::relative(f, p).generic_string(), read_file(f)});
    } else if (fs::is_regular_file(p, ec)) {
      out.push_back({fs::path(p).filename().generic_string(), read_file(p)});
    } else {
      throw Error("RTL path not found: " + p);
    }
  }
  return out;
}

int exit_code_for(const CoverageReport& r) { return r.below_threshold() ? 2 : 0; }

AnalyzeOutcome run_analyze(const RunConfig& cfg, std::shared_ptr<LlmProvider> provider) {
  validate(cfg);
  Inputs in = load_inputs(cfg, true);
  SemanticEngine engine = make_engine(cfg, std::move(provider));
  SpecSet spec = load_spec(cfg, engine, in.provenance);

  fs::path out(cfg.paths.out);
  OutDirLock lock(out);
  auto assertions = ingest_assertions(in.assertions, cfg.ingest);
  PassResult pass = run_pass(assertions, in.rtl, spec, engine, cfg.fusion, cfg.mapping);

  IterationSnapshot snap{0, assertions.size(), pass.s, pass.n, pass.mapping.match_degree};
  AnalyzeOutcome result;
  result.report = make_report(spec, cfg.loop.theta, pass.n, pass.s, {snap}, in.provenance);
  write_pass(out, pass);
  write_file_atomic(out / "payload.json",
                    canonical_dump(payload_to_json(build_payload(pass.mapping.match_degree, spec.subspecs,
                                                                 cfg.loop.theta, 1))));
  write_report(out, result.report);
  return result;
}

AnalyzeOutcome run_loop_command(const RunConfig& cfg, GeneratorAdapter* generator,
                                std::shared_ptr<LlmProvider> provider) {
  validate(cfg);
  Inputs in = load_inputs(cfg, true);
  SemanticEngine engine = make_engine(cfg, std::move(provider));
  SpecSet spec = load_spec(cfg, engine, in.provenance);

  fs::path out(cfg.paths.out);
  OutDirLock lock(out);

  std::unique_ptr<GeneratorAdapter> owned;
  if (!generator) {
    if (!cfg.paths.generator.empty()) {
      owned = make_generator(cfg.paths.generator, out);
      std::string gen_text = read_file(cfg.paths.generator);
      in.provenance.inputs["generator"] = sha256_hex(gen_text);
    } else if (engine.live()) {
      owned = std::make_unique<LiveLlmGenerator>(engine);
    } else {
      throw AdapterNotFound("offline loop needs a generator adapter path");
    }
    generator = owned.get();
  }

  LoopHooks hooks;
  hooks.on_pass = [&](int k, const PassResult& pass) { write_pass(out / ("iter_" + std::to_string(k)), pass); };
  hooks.on_payload = [&](const FeedbackPayload& p) {
    write_file_atomic(out / ("iter_" + std::to_string(p.iteration - 1)) / "payload.json",
                      canonical_dump(payload_to_json(p)));
  };
  LoopOutcome lo = run_loop(cfg.loop, spec, in.rtl, in.assertions, *generator, engine, cfg.fusion,
                            cfg.mapping, cfg.ingest, hooks);

  AnalyzeOutcome result;
  result.report = make_report(spec, cfg.loop.theta, lo.last_pass.n, lo.last_pass.s, lo.state.history,
                              in.provenance);
  result.report.terminated_reason = std::string(to_string(lo.state.terminated_reason));
  write_pass(out, lo.last_pass);
  write_file_atomic(out / "payload.json",
                    canonical_dump(payload_to_json(build_payload(lo.last_pass.mapping.match_degree, spec.subspecs,
                                                                 cfg.loop.theta, lo.state.iteration + 1))));
  write_file_atomic(out / "loop_state.json", canonical_dump(loop_state_to_json(lo.state)));
  write_report(out, result.report);
  result.loop = std::move(lo.state);
  return result;
}

std::string run_report(const fs::path& out_dir) {
  fs::path path = out_dir / "report.json";
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw MissingArtifacts("no report.json in " + out_dir.string());
  CoverageReport r;
  try {
    r = report_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw MissingArtifacts(path.string() + ": " + e.what());
  }
  return render_markdown(r);
}

json run_dump_ast(const RunConfig& cfg) {
  return dump_ast(parse_rtl(load_rtl(cfg.paths.rtl)));
}

json run_dump_features(const RunConfig& cfg) {
  Inputs in = load_inputs(cfg, true);
  auto assertions = ingest_assertions(in.assertions, cfg.ingest);
  std::vector<Assertion> active;
  for (auto& a : assertions)
    if (a.syntax_ok) active.push_back(a);
  auto f = compute_structural_features(active, in.rtl);
  return {{"sd", sd_to_json(f, active)}, {"q", q_to_json(f, active)}};
}

}  // namespace coverassert
