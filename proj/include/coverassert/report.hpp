#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "coverassert/clustering.hpp"
#include "coverassert/feedback.hpp"
#include "coverassert/mapping.hpp"
#include "coverassert/provider.hpp"
#include "coverassert/spec_model.hpp"

namespace coverassert {

inline constexpr std::string_view kConfigSchema = "config/v1";
inline constexpr std::string_view kReportSchema = "report/v1";
inline constexpr std::string_view kToolVersion = "0.1.0";

struct RunPaths {
  std::vector<std::string> rtl;  // files or directories
  std::string assertions;
  std::string spec;
  std::string out = "out";
  std::string cache;
  std::string generator;
};

struct RunConfig {
  RunPaths paths;
  ProviderConfig provider;
  FusionConfig fusion;
  MappingConfig mapping;
  LoopConfig loop;
  IngestOptions ingest;
  std::uint64_t seed = 0x5eed;  // feeds every seeded default (offline embedding hash)
};

// Throws InvalidArgument for out-of-range thresholds.
void validate(const RunConfig& cfg);

nlohmann::json config_to_json(const RunConfig& cfg);

// Relative paths are resolved against `base_dir`. Missing fields keep their
// defaults. Throws SchemaViolation.
RunConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

// SHA-256 over the canonical config with paths and transport tuning removed.
std::string config_hash(const RunConfig& cfg);

struct PointCoverage {
  std::string id;
  std::string text;
  std::vector<std::string> covered_by;
};

struct SubSpecCoverage {
  std::string id;
  std::string title;
  double match_degree = 0.0;
  std::vector<PointCoverage> covered;
  std::vector<PointCoverage> uncovered;
};

struct Provenance {
  std::string config_hash;
  std::map<std::string, std::string> inputs;  // label -> sha256
  std::string tool_version{kToolVersion};
};

struct CoverageReport {
  std::string design;
  double theta = 0.85;
  std::optional<std::string> terminated_reason;  // loop runs only
  std::vector<SubSpecCoverage> subspecs;
  double min_degree = 0.0;
  double mean_degree = 0.0;
  std::size_t n = 0;
  std::size_t s = 0;
  std::vector<IterationSnapshot> history;
  Provenance provenance;

  bool below_threshold() const;
};

CoverageReport make_report(const SpecSet& spec, double theta, std::size_t n, std::size_t s,
                           std::vector<IterationSnapshot> history, Provenance provenance);

nlohmann::json report_to_json(const CoverageReport& r);
CoverageReport report_from_json(const nlohmann::json& doc);

// Coverage table, iteration timeline and, when anything is open, the
// uncovered points. Byte-deterministic.
std::string render_markdown(const CoverageReport& r);

}  // namespace coverassert
