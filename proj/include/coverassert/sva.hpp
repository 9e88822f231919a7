#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace coverassert {

class AstIndex;

inline constexpr std::string_view kAssertionsSchema = "assertions/v1";

struct RawAssertion {
  std::string id;
  std::string text;
  int iteration = 0;
};

struct Assertion {
  std::string id;
  std::string text;
  std::vector<std::string> signals;  // sorted, unique
  int origin_iteration = 0;
  bool syntax_ok = false;
  std::string syntax_error;  // empty when syntax_ok

  // Signals with no occurrence in the RTL index (filled by flag_unresolved).
  std::vector<std::string> unresolved;
};

struct IngestOptions {
  // Ubiquitous clock/reset names dropped from signal sets.
  std::vector<std::string> excluded_signals{"clk", "clock", "rst", "rst_n", "reset"};
};

// One Assertion per input, in input order. Throws DuplicateId. Text that
// cannot be tokenized yields an assertion with no signals and syntax_ok=false.
std::vector<Assertion> ingest_assertions(std::span<const RawAssertion> raw,
                                         const IngestOptions& options = {});

Assertion ingest_one(const RawAssertion& raw, const IngestOptions& options = {});

std::size_t count_syntax_correct(std::span<const Assertion> assertions);

void flag_unresolved(std::span<Assertion> assertions, const AstIndex& index);

// Coarse shape of the property body, used for offline intent text.
struct PropertyShape {
  std::string implication;  // "|->", "|=>" or empty
  std::vector<std::string> antecedent;  // sorted signal names
  std::vector<std::string> consequent;  // all signals when there is no implication
  std::vector<std::string> operators;   // sorted: system functions, "delay", "repetition", ...
};

PropertyShape property_shape(const std::string& text, const IngestOptions& options = {});

// Accepts a bare array or {"schema": "assertions/v1", "assertions": [...]}.
// Throws SchemaViolation.
std::vector<RawAssertion> parse_assertions_json(const nlohmann::json& doc);
nlohmann::json assertions_to_json(std::span<const RawAssertion> raw);

}  // namespace coverassert
