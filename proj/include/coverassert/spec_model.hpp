#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace coverassert {

class SemanticEngine;

inline constexpr std::string_view kSpecSchema = "spec/v1";

struct FunctionalPoint {
  std::string id;
  std::string text;
  std::vector<std::string> signals;  // sorted, unique
  Eigen::VectorXd embedding;
  std::set<std::string> covered_by;  // assertion ids
};

struct SubSpec {
  std::string id;
  std::string title;
  std::vector<std::string> signals;  // sorted, unique
  std::string description;
  std::vector<FunctionalPoint> points;
  Eigen::VectorXd embedding;
};

struct SpecSet {
  std::string design;
  std::vector<SubSpec> subspecs;

  std::size_t point_count() const;
  const SubSpec* find_subspec(std::string_view id) const;
};

// Identifier-like tokens, case preserved.
std::vector<std::string> identifier_tokens(std::string_view text);

// Names from `subspec_signals` that occur as tokens of `text`.
std::vector<std::string> point_signals(std::string_view text,
                                       const std::vector<std::string>& subspec_signals);

// Validates and loads a spec/v1 document. Throws SchemaViolation with a JSON
// pointer to the offending field.
SpecSet parse_spec_json(const nlohmann::json& doc);
nlohmann::json spec_to_json(const SpecSet& spec);

std::string subspec_embedding_text(const SubSpec& s);

// Fills SubSpec and FunctionalPoint embeddings.
void embed_spec(SpecSet& spec, SemanticEngine& engine);

// Live path: provider splits free text into sub-specs, then decomposes each
// description into points. A malformed reply gets one repair prompt before
// MalformedProviderReply is raised.
std::vector<SubSpec> split_spec(const std::string& spec_text, SemanticEngine& engine);
std::vector<FunctionalPoint> extract_points(const SubSpec& subspec, SemanticEngine& engine);
SpecSet build_spec_live(const std::string& design, const std::string& spec_text,
                        SemanticEngine& engine);

}  // namespace coverassert
