#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace coverassert {

inline constexpr std::string_view kClustersSchema = "clusters/v1";
inline constexpr int kNoise = -1;

struct FusionConfig {
  double tau = 15.0;
  std::optional<double> dbscan_eps;  // unset: data-derived, see default_eps
  int dbscan_min_pts = 2;
  int pca_dims = 20;
  double evr_floor = 0.97;
  // Inclusive. Unset: [2, min(N-1, 2 * #subspecs)].
  std::optional<std::pair<int, int>> k_range;
};

void validate(const FusionConfig& cfg);

// 1 - cosine similarity for every row pair.
Eigen::MatrixXd cosine_distances(const Eigen::MatrixXd& points);

// Median over points of the 10th-percentile (nearest rank) cosine distance to
// the other points, floored at 1e-6.
double default_eps(const Eigen::MatrixXd& points);

// Density clustering on cosine distance. Neighborhoods include the point
// itself; clusters are numbered in the order their first core point appears.
std::vector<int> dbscan(const Eigen::MatrixXd& points, double eps, int min_pts);

// Per-column z-score with population standard deviation; constant columns -> 0.
Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& q);

struct PcaResult {
  Eigen::MatrixXd projected;   // N x dims
  Eigen::MatrixXd components;  // D x dims, unit columns
  int dims = 0;
  double evr = 1.0;
  bool degenerate = false;  // no variance at all; projected is zero
};

// Requires N >= 2 and 1 <= dims <= min(N-1, D).
PcaResult pca_project(const Eigen::MatrixXd& q, int dims);

// Starts at min(dims, N-1, D) and adds components one at a time until the
// explained variance ratio reaches `evr_floor` or no more are available.
PcaResult pca_project_auto(const Eigen::MatrixXd& q, int dims, double evr_floor);

// Width of the one-hot block: distinct non-noise labels plus one per noise point.
int one_hot_width(std::span<const int> labels);

// PCA block followed by the one-hot block; columns follow first appearance.
Eigen::MatrixXd fuse(std::span<const int> semantic_labels, const Eigen::MatrixXd& projected);

// Mean silhouette over points (Euclidean). Singleton clusters score 0, as do
// points with a = b = 0. Throws SingleCluster with fewer than two labels.
double silhouette(const Eigen::MatrixXd& points, std::span<const int> labels);

// Average-linkage agglomeration under cannot-link constraints. Merging stops
// when every remaining pair of groups conflicts.
struct ConstrainedDendrogram {
  std::vector<std::vector<int>> levels;  // levels[s]: labels after s merges (first-appearance order)
  int min_groups() const {
    if (levels.empty()) return 0;
    return static_cast<int>(levels.front().size() - levels.size()) + 1;
  }
  const std::vector<int>& labels_for(int k) const;
};

ConstrainedDendrogram constrained_average_linkage(const Eigen::MatrixXd& points,
                                                  const std::vector<std::vector<bool>>& cannot_link);

std::vector<std::vector<bool>> cannot_link_from_sd(const Eigen::MatrixXd& sd, double tau);

struct ClusterResult {
  std::vector<int> labels;
  int k = 0;
  Eigen::MatrixXd fused;
  std::optional<double> silhouette;  // absent when k < 2
  std::vector<int> semantic_labels;
  double eps = 0.0;
  int pca_dims = 0;
  double evr = 1.0;
  bool evr_warning = false;
  bool pca_degenerate = false;
  bool infeasible_k = false;
  std::pair<int, int> k_range{0, 0};
};

// Inclusive k search range for N points and `n_subspecs` sub-specifications.
std::pair<int, int> default_k_range(int n, int n_subspecs);

// Cut the constrained dendrogram at the k in k_range with the best silhouette
// (ties to the smaller k). When constraints leave more groups than k_range
// allows, the minimal feasible k is returned with infeasible_k set.
ClusterResult final_cluster(const Eigen::MatrixXd& fused, const Eigen::MatrixXd& sd,
                            const FusionConfig& cfg, std::pair<int, int> k_range);

// Full fusion: DBSCAN on semantic rows, PCA on path rows, fuse, final cut.
ClusterResult cluster_assertions(const Eigen::MatrixXd& semantic, const Eigen::MatrixXi& paths,
                                 const Eigen::MatrixXd& sd, const FusionConfig& cfg,
                                 int n_subspecs);

nlohmann::json clusters_to_json(const ClusterResult& r, std::span<const std::string> ids);

}  // namespace coverassert
