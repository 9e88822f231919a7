#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "coverassert/semantic.hpp"
#include "coverassert/spec_model.hpp"
#include "coverassert/sva.hpp"

namespace coverassert {

inline constexpr std::string_view kMappingSchema = "mapping/v1";

struct MappingConfig {
  double alpha = 0.6;  // weight of the semantic term
  double sigma = 0.5;  // minimum score for a point assignment
};

void validate(const MappingConfig& cfg);

struct GroupIntent {
  int group_id = 0;
  std::string description;
  std::vector<std::string> members;  // assertion ids, sorted
  std::vector<std::string> signals;  // union of member signals, sorted
  Eigen::VectorXd embedding;
};

struct PointScore {
  std::string assertion_id;
  std::string point_id;
  double cosine = 0.0;   // clamped at 0
  double jaccard = 0.0;
  double score = 0.0;
};

struct PointAssignment {
  std::string assertion_id;
  std::string point_id;
  std::string subspec_id;
  double score = 0.0;
};

struct MappingResult {
  std::vector<GroupIntent> groups;
  std::map<int, std::string> group_to_subspec;
  std::vector<PointAssignment> assignments;  // this pass
  std::vector<PointScore> scores;            // every scored (assertion, point) pair
  std::map<std::string, double> match_degree;
  std::map<std::string, std::vector<std::string>> uncovered;
};

// |a ∩ b| / |a ∪ b| over sorted unique lists; 0 when both are empty.
double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);

// alpha * max(0, cosine) + (1 - alpha) * jaccard.
double point_score(double alpha, double cosine, double jaccard);

std::string group_embedding_text(const GroupIntent& g);

// One GroupIntent per distinct label (ascending). Offline descriptions join
// member intents ordered by assertion id; live ones come from the provider.
// `assertions`, `intents` and `labels` are parallel.
std::vector<GroupIntent> build_group_intents(std::span<const Assertion> assertions,
                                             std::span<const IntentRecord> intents,
                                             std::span<const int> labels, SemanticEngine& engine);

// Best sub-spec per group by cosine; ties go to the larger signal Jaccard,
// then the lexicographically smallest id.
std::map<int, std::string> match_groups(std::span<const GroupIntent> groups,
                                        std::span<const SubSpec> subspecs);

// Assigns each assertion to its best point of `subspec` when the score
// reaches sigma and records it in covered_by. Scores are appended to `scores`.
std::vector<PointAssignment> match_points(std::span<const Assertion> assertions,
                                          std::span<const IntentRecord> intents,
                                          SubSpec& subspec, const MappingConfig& cfg,
                                          std::vector<PointScore>* scores = nullptr);

struct MatchDegrees {
  std::map<std::string, double> degree;
  std::map<std::string, std::vector<std::string>> uncovered;
};

MatchDegrees compute_match_degree(std::span<const SubSpec> subspecs);

// Groups, group-to-sub-spec matching and point assignment for one pass.
MappingResult map_assertions(std::span<const Assertion> assertions,
                             std::span<const IntentRecord> intents, std::span<const int> labels,
                             SpecSet& spec, SemanticEngine& engine, const MappingConfig& cfg);

nlohmann::json mapping_to_json(const MappingResult& m);

}  // namespace coverassert
