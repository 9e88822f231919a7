#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coverassert/feedback.hpp"
#include "coverassert/provider.hpp"
#include "coverassert/report.hpp"
#include "coverassert/rtl_ast.hpp"

namespace coverassert {

// Exclusive claim on an output directory for the lifetime of the object.
// Throws Error when another run holds it.
class OutDirLock {
 public:
  explicit OutDirLock(const std::filesystem::path& out_dir);
  ~OutDirLock();
  OutDirLock(const OutDirLock&) = delete;
  OutDirLock& operator=(const OutDirLock&) = delete;

 private:
  std::filesystem::path path_;
};

// Files are taken as given; directories contribute their *.v, *.sv, *.vh and
// *.svh files in sorted order.
std::vector<SourceFile> load_rtl(const std::vector<std::string>& paths);

struct AnalyzeOutcome {
  CoverageReport report;
  std::optional<LoopState> loop;
};

// Single pass. Writes report.json, report.md, mapping.json, clusters.json and
// payload.json under cfg.paths.out. `provider` overrides the live transport.
AnalyzeOutcome run_analyze(const RunConfig& cfg, std::shared_ptr<LlmProvider> provider = nullptr);

// Feedback loop. Per-iteration artifacts go to out/iter_<k>/, the final
// report and loop_state.json to out/. A null `generator` is built from
// cfg.paths.generator (or the live provider when that is empty in live mode).
AnalyzeOutcome run_loop_command(const RunConfig& cfg, GeneratorAdapter* generator = nullptr,
                                std::shared_ptr<LlmProvider> provider = nullptr);

// Re-renders report.md from out_dir/report.json. Throws MissingArtifacts.
std::string run_report(const std::filesystem::path& out_dir);

nlohmann::json run_dump_ast(const RunConfig& cfg);

// {"sd": features/v1 sd document, "q": features/v1 q document}.
nlohmann::json run_dump_features(const RunConfig& cfg);

// 0 when every sub-spec is above theta, 2 otherwise.
int exit_code_for(const CoverageReport& r);

}  // namespace coverassert
