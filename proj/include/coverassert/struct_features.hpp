#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "coverassert/rtl_ast.hpp"
#include "coverassert/sva.hpp"

namespace coverassert {

inline constexpr std::string_view kFeaturesSchema = "features/v1";

struct StructuralFeatures {
  Eigen::MatrixXd sd;  // N x N, symmetric
  Eigen::MatrixXi q;   // N x d_max, zero padded
  std::size_t d_max = 1;
  double penalty = 1.0;
  std::vector<std::size_t> path_lengths;  // unpadded row lengths of q
  std::vector<bool> structurally_unknown;  // assertions with an empty signal set
};

// Cross-tree penalty: 2 * max_depth + 1, above every same-tree distance.
double structural_penalty(const AstIndex& index) noexcept;

// Edges between s and t through their lowest common ancestor; `penalty` when
// the nodes live in different trees.
double lca_distance(const AstIndex& index, NodeRef s, NodeRef t, double penalty);

struct SdMatrix {
  Eigen::MatrixXd sd;
  std::vector<bool> structurally_unknown;
};

// Average over signal pairs of the minimal node-pair distance.
SdMatrix sd_matrix(std::span<const Assertion> assertions, const AstIndex& index, double penalty);

// Occurrence used for path features: minimal depth, then earliest span start.
std::optional<NodeRef> representative_node(const AstIndex& index, std::string_view signal);

struct PathMatrix {
  Eigen::MatrixXi q;
  std::size_t d_max = 1;
  std::vector<std::size_t> lengths;
};

// Concatenated root-to-signal kind paths (code = 1 + NodeKind), zero padded.
PathMatrix path_matrix(std::span<const Assertion> assertions, const AstIndex& index);

StructuralFeatures compute_structural_features(std::span<const Assertion> assertions,
                                               const AstIndex& index);

nlohmann::json sd_to_json(const StructuralFeatures& f, std::span<const Assertion> assertions);
nlohmann::json q_to_json(const StructuralFeatures& f, std::span<const Assertion> assertions);

}  // namespace coverassert
