#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "coverassert/pipeline.hpp"

namespace coverassert {

inline constexpr std::string_view kPayloadSchema = "payload/v1";
inline constexpr std::string_view kLoopStateSchema = "loop-state/v1";
inline constexpr std::string_view kStubSchema = "stub-generator/v1";

struct LoopConfig {
  double theta = 0.85;
  int max_iterations = 5;
};

void validate(const LoopConfig& cfg);

// A sub-spec is satisfied when its degree exceeds theta. Full coverage also
// counts, so theta = 1 remains reachable.
bool degree_satisfied(double degree, double theta) noexcept;

struct PayloadPoint {
  std::string point_id;
  std::string text;
  std::vector<std::string> signals;
};

struct PayloadItem {
  std::string subspec_id;
  std::string subspec_description;
  double match_degree = 0.0;
  std::vector<PayloadPoint> uncovered_points;
};

struct FeedbackPayload {
  int iteration = 0;
  std::vector<PayloadItem> items;
};

// Unsatisfied sub-specs with their uncovered points, lowest degree first
// (stable on ties, in sub-spec order).
FeedbackPayload build_payload(const std::map<std::string, double>& match_degree,
                              std::span<const SubSpec> subspecs, double theta, int iteration);

nlohmann::json payload_to_json(const FeedbackPayload& p);
FeedbackPayload payload_from_json(const nlohmann::json& doc);

// Wraps an external assertion generator. Returned ids need only be unique
// within one call; the loop namespaces them by iteration.
class GeneratorAdapter {
 public:
  virtual ~GeneratorAdapter() = default;
  virtual std::vector<RawAssertion> generate(const FeedbackPayload& payload) = 0;
};

// Replays a fixture {"schema": "stub-generator/v1", "points": {point_id: [sva, ...]}}:
// every uncovered point in the payload yields its scripted assertions.
class ScriptedStubGenerator final : public GeneratorAdapter {
 public:
  explicit ScriptedStubGenerator(std::map<std::string, std::vector<std::string>> script);
  static ScriptedStubGenerator from_file(const std::filesystem::path& path);
  std::vector<RawAssertion> generate(const FeedbackPayload& payload) override;

 private:
  std::map<std::string, std::vector<std::string>> script_;
};

// Runs `<command> <payload.json>` and reads an assertions/v1 document from
// its standard output. Non-zero exit raises GeneratorFailure.
class ExternalCommandGenerator final : public GeneratorAdapter {
 public:
  ExternalCommandGenerator(std::filesystem::path command, std::filesystem::path work_dir);
  std::vector<RawAssertion> generate(const FeedbackPayload& payload) override;

 private:
  std::filesystem::path command_;
  std::filesystem::path work_dir_;
};

// Prompts the live provider with the payload and parses {"assertions": [...]}.
class LiveLlmGenerator final : public GeneratorAdapter {
 public:
  explicit LiveLlmGenerator(SemanticEngine& engine);
  std::vector<RawAssertion> generate(const FeedbackPayload& payload) override;

 private:
  SemanticEngine& engine_;
};

// Picks an adapter for `path`: a JSON fixture becomes a scripted stub, an
// executable becomes an external command. Throws AdapterNotFound.
std::unique_ptr<GeneratorAdapter> make_generator(const std::filesystem::path& path,
                                                 const std::filesystem::path& work_dir);

enum class TerminationReason { ThresholdMet, MaxIterations, GeneratorExhausted };

std::string_view to_string(TerminationReason r) noexcept;

struct IterationSnapshot {
  int iteration = 0;
  std::size_t added_count = 0;
  std::size_t syntax_correct_count = 0;  // cumulative
  std::size_t total_count = 0;           // cumulative
  std::map<std::string, double> match_degrees;
};

struct LoopState {
  int iteration = 0;  // last executed pass
  std::vector<Assertion> assertions;
  std::vector<IterationSnapshot> history;
  TerminationReason terminated_reason = TerminationReason::ThresholdMet;
  std::string generator_error;  // set when the generator threw
};

nlohmann::json loop_state_to_json(const LoopState& s);

struct LoopOutcome {
  LoopState state;
  PassResult last_pass;
};

struct LoopHooks {
  std::function<void(int iteration, const PassResult&)> on_pass;
  std::function<void(const FeedbackPayload&)> on_payload;
};

// Iteration 0 analyses the seeds; each further iteration sends the payload to
// the generator, ingests new assertions (exact-text duplicates dropped) and
// recomputes everything. Coverage persists in spec across iterations.
LoopOutcome run_loop(const LoopConfig& cfg, SpecSet& spec, const AstIndex& rtl,
                     std::span<const RawAssertion> seeds, GeneratorAdapter& generator,
                     SemanticEngine& engine, const FusionConfig& fusion,
                     const MappingConfig& mapping, const IngestOptions& ingest = {},
                     const LoopHooks& hooks = {});

}  // namespace coverassert
