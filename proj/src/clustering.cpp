#include "coverassert/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "coverassert/error.hpp"

namespace coverassert {

void validate(const FusionConfig& cfg) {
  if (!(cfg.tau > 0)) throw InvalidArgument("tau must be positive");
  if (cfg.dbscan_eps && !(*cfg.dbscan_eps > 0)) throw InvalidArgument("dbscan_eps must be positive");
  if (cfg.dbscan_min_pts < 1) throw InvalidArgument("dbscan_min_pts must be >= 1");
  if (cfg.pca_dims < 1) throw InvalidArgument("pca_dims must be >= 1");
  if (!(cfg.evr_floor > 0 && cfg.evr_floor <= 1)) throw InvalidArgument("evr_floor must lie in (0, 1]");
  if (cfg.k_range && (cfg.k_range->first < 1 || cfg.k_range->second < cfg.k_range->first))
    throw InvalidArgument("k_range must satisfy 1 <= lo <= hi");
}

Eigen::MatrixXd cosine_distances(const Eigen::MatrixXd& points) {
  const Eigen::Index n = points.rows();
  Eigen::VectorXd norms = points.rowwise().norm();
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double c = 0.0;
      if (norms(i) > 0 && norms(j) > 0) c = points.row(i).dot(points.row(j)) / (norms(i) * norms(j));
      d(i, j) = d(j, i) = std::max(0.0, 1.0 - c);
    }
  }
  return d;
}

double default_eps(const Eigen::MatrixXd& points) {
  const Eigen::Index n = points.rows();
  constexpr double kFloor = 1e-6;
  if (n < 2) return kFloor;
  Eigen::MatrixXd d = cosine_distances(points);
  std::vector<double> per_point;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> others;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) others.push_back(d(i, j));
    std::sort(others.begin(), others.end());
    auto rank = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(others.size())));
    per_point.push_back(others[std::max<std::size_t>(rank, 1) - 1]);
  }
  std::sort(per_point.begin(), per_point.end());
  const std::size_t m = per_point.size();
  double median = m % 2 ? per_point[m / 2] : 0.5 * (per_point[m / 2 - 1] + per_point[m / 2]);
  return std::max(median, kFloor);
}

std::vector<int> dbscan(const Eigen::MatrixXd& points, double eps, int min_pts) {
  if (!(eps > 0)) throw InvalidArgument("eps must be positive");
  if (min_pts < 1) throw InvalidArgument("min_pts must be >= 1");
  const auto n = static_cast<std::size_t>(points.rows());
  Eigen::MatrixXd d = cosine_distances(points);

  std::vector<std::vector<std::size_t>> neighbors(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) <= eps) neighbors[i].push_back(j);
  auto is_core = [&](std::size_t i) { return neighbors[i].size() >= static_cast<std::size_t>(min_pts); };

  constexpr int kUnvisited = -2;
  std::vector<int> labels(n, kUnvisited);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != kUnvisited) continue;
    if (!is_core(i)) {
      labels[i] = kNoise;
      continue;
    }
    const int c = next++;
    labels[i] = c;
    std::deque<std::size_t> queue(neighbors[i].begin(), neighbors[i].end());
    while (!queue.empty()) {
      std::size_t j = queue.front();
      queue.pop_front();
      if (labels[j] == kNoise) labels[j] = c;  // border point
      if (labels[j] != kUnvisited) continue;
      labels[j] = c;
      if (is_core(j)) queue.insert(queue.end(), neighbors[j].begin(), neighbors[j].end());
    }
  }
  return labels;
}

Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& q) {
  const Eigen::Index n = q.rows();
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, q.cols());
  if (n == 0) return z;
  for (Eigen::Index c = 0; c < q.cols(); ++c) {
    const double mean = q.col(c).mean();
    Eigen::VectorXd centered = q.col(c).array() - mean;
    const double sd = std::sqrt(centered.squaredNorm() / static_cast<double>(n));
    if (sd > 1e-12) z.col(c) = centered / sd;
  }
  return z;
}

namespace {

struct Spectrum {
  Eigen::MatrixXd z;
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // matching columns
  double total = 0.0;
};

Spectrum spectrum_of(const Eigen::MatrixXd& q) {
  Spectrum s;
  s.z = standardize_columns(q);
  const double n = static_cast<double>(q.rows());
  Eigen::MatrixXd cov = (s.z.transpose() * s.z) / (n - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error("covariance eigendecomposition failed");
  // Eigen returns ascending order.
  s.values = solver.eigenvalues().reverse().cwiseMax(0.0);
  s.vectors = solver.eigenvectors().rowwise().reverse();
  s.total = s.values.sum();
  return s;
}

PcaResult project(const Spectrum& s, int dims) {
  PcaResult r;
  r.dims = dims;
  const Eigen::Index n = s.z.rows(), d = s.z.cols();
  if (!(s.total > 1e-12)) {
    r.degenerate = true;
    r.evr = 1.0;
    r.projected = Eigen::MatrixXd::Zero(n, dims);
    r.components = Eigen::MatrixXd::Zero(d, dims);
    return r;
  }
  r.components = s.vectors.leftCols(dims);
  // Sign: the largest-magnitude entry is positive. Near-ties (e.g. (1, -1)/sqrt(2))
  // go to the lowest index so rounding noise cannot flip a component.
  for (int c = 0; c < dims; ++c) {
    const double top = r.components.col(c).cwiseAbs().maxCoeff();
    Eigen::Index arg = 0;
    while (std::abs(r.components(arg, c)) < top - 1e-12) ++arg;
    if (r.components(arg, c) < 0) r.components.col(c) *= -1.0;
  }
  r.projected = s.z * r.components;
  r.evr = s.values.head(dims).sum() / s.total;
  return r;
}

int max_components(const Eigen::MatrixXd& q) {
  return static_cast<int>(std::min<Eigen::Index>(q.rows() - 1, q.cols()));
}

}  // namespace

PcaResult pca_project(const Eigen::MatrixXd& q, int dims) {
  if (q.rows() < 2) throw InvalidArgument("PCA needs at least two rows");
  if (dims < 1 || dims > max_components(q))
    throw InvalidArgument("PCA dims must lie in [1, min(N-1, D)]");
  return project(spectrum_of(q), dims);
}

PcaResult pca_project_auto(const Eigen::MatrixXd& q, int dims, double evr_floor) {
  if (q.rows() < 2) throw InvalidArgument("PCA needs at least two rows");
  const int cap = max_components(q);
  if (cap < 1) throw InvalidArgument("PCA needs at least one column");
  Spectrum s = spectrum_of(q);
  int k = std::clamp(dims, 1, cap);
  PcaResult r = project(s, k);
  while (!r.degenerate && r.evr < evr_floor && k < cap) r = project(s, ++k);
  return r;
}

int one_hot_width(std::span<const int> labels) {
  std::vector<int> seen;
  int width = 0;
  for (int l : labels) {
    if (l == kNoise) {
      ++width;
    } else if (std::find(seen.begin(), seen.end(), l) == seen.end()) {
      seen.push_back(l);
      ++width;
    }
  }
  return width;
}

Eigen::MatrixXd fuse(std::span<const int> semantic_labels, const Eigen::MatrixXd& projected) {
  const auto n = static_cast<Eigen::Index>(semantic_labels.size());
  if (projected.rows() != n) throw InvalidArgument("label count does not match projected rows");
  const int k = one_hot_width(semantic_labels);
  const Eigen::Index p = projected.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, p + k);
  out.leftCols(p) = projected;
  std::map<int, Eigen::Index> column;
  Eigen::Index next = p;
  for (Eigen::Index i = 0; i < n; ++i) {
    int l = semantic_labels[static_cast<std::size_t>(i)];
    Eigen::Index c;
    if (l == kNoise) {
      c = next++;
    } else if (auto it = column.find(l); it != column.end()) {
      c = it->second;
    } else {
      c = column[l] = next++;
    }
    out(i, c) = 1.0;
  }
  return out;
}

namespace {

Eigen::MatrixXd euclidean_distances(const Eigen::MatrixXd& points) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (points.row(i) - points.row(j)).norm();
  return d;
}

double silhouette_from_distances(const Eigen::MatrixXd& d, std::span<const int> labels) {
  std::map<int, std::size_t> sizes;
  for (int l : labels) ++sizes[l];
  if (sizes.size() < 2) throw SingleCluster();
  const std::size_t n = labels.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (sizes[labels[i]] == 1) continue;
    std::map<int, double> sums;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) sums[labels[j]] += d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    const double a = sums[labels[i]] / static_cast<double>(sizes[labels[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [l, s] : sums)
      if (l != labels[i]) b = std::min(b, s / static_cast<double>(sizes[l]));
    const double m = std::max(a, b);
    if (m > 0) total += (b - a) / m;
  }
  return total / static_cast<double>(n);
}

std::vector<int> relabel_first_appearance(const std::vector<int>& raw) {
  std::map<int, int> ids;
  std::vector<int> out;
  out.reserve(raw.size());
  for (int r : raw) {
    auto [it, inserted] = ids.emplace(r, static_cast<int>(ids.size()));
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

double silhouette(const Eigen::MatrixXd& points, std::span<const int> labels) {
  if (static_cast<std::size_t>(points.rows()) != labels.size())
    throw InvalidArgument("label count does not match point rows");
  return silhouette_from_distances(euclidean_distances(points), labels);
}

const std::vector<int>& ConstrainedDendrogram::labels_for(int k) const {
  const int n = levels.empty() ? 0 : static_cast<int>(levels.front().size());
  const int step = n - k;
  if (step < 0 || step >= static_cast<int>(levels.size()))
    throw InvalidArgument("no dendrogram level with " + std::to_string(k) + " groups");
  return levels[static_cast<std::size_t>(step)];
}

std::vector<std::vector<bool>> cannot_link_from_sd(const Eigen::MatrixXd& sd, double tau) {
  const auto n = static_cast<std::size_t>(sd.rows());
  std::vector<std::vector<bool>> out(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out[i][j] = sd(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > tau;
  return out;
}

ConstrainedDendrogram constrained_average_linkage(const Eigen::MatrixXd& points,
                                                  const std::vector<std::vector<bool>>& cannot_link) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (cannot_link.size() != n) throw InvalidArgument("constraint matrix does not match point count");
  ConstrainedDendrogram out;
  if (n == 0) return out;

  Eigen::MatrixXd dist = euclidean_distances(points);
  auto conflict = cannot_link;
  std::vector<std::size_t> size(n, 1);
  std::vector<bool> alive(n, true);
  std::vector<int> owner(n);  // slot owning each point
  std::iota(owner.begin(), owner.end(), 0);

  out.levels.push_back(relabel_first_appearance(owner));
  for (std::size_t step = 1; step < n; ++step) {
    std::size_t bi = n, bj = n;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!alive[j] || conflict[i][j]) continue;
        double v = dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (v < best) {
          best = v;
          bi = i;
          bj = j;
        }
      }
    }
    if (bi == n) break;
    // Lance-Williams update for average linkage; slot bi keeps the merged group.
    const double ni = static_cast<double>(size[bi]), nj = static_cast<double>(size[bj]);
    for (std::size_t k = 0; k < n; ++k) {
      if (!alive[k] || k == bi || k == bj) continue;
      auto ek = static_cast<Eigen::Index>(k), ei = static_cast<Eigen::Index>(bi),
           ej = static_cast<Eigen::Index>(bj);
      double v = (ni * dist(ek, ei) + nj * dist(ek, ej)) / (ni + nj);
      dist(ek, ei) = dist(ei, ek) = v;
      bool c = conflict[k][bi] || conflict[k][bj];
      conflict[k][bi] = conflict[bi][k] = c;
    }
    size[bi] += size[bj];
    alive[bj] = false;
    for (auto& o : owner)
      if (o == static_cast<int>(bj)) o = static_cast<int>(bi);
    out.levels.push_back(relabel_first_appearance(owner));
  }
  return out;
}

std::pair<int, int> default_k_range(int n, int n_subspecs) {
  return {2, std::min(n - 1, 2 * n_subspecs)};
}

ClusterResult final_cluster(const Eigen::MatrixXd& fused, const Eigen::MatrixXd& sd,
                            const FusionConfig& cfg, std::pair<int, int> k_range) {
  if (fused.rows() != sd.rows() || sd.rows() != sd.cols())
    throw InvalidArgument("fused rows and SD matrix disagree on N");
  ClusterResult r;
  r.fused = fused;
  r.k_range = k_range;
  const int n = static_cast<int>(fused.rows());
  if (n == 0) return r;

  auto tree = constrained_average_linkage(fused, cannot_link_from_sd(sd, cfg.tau));
  const int min_k = tree.min_groups();
  const Eigen::MatrixXd dist = euclidean_distances(fused);

  int lo = std::max(k_range.first, min_k);
  int hi = std::min(k_range.second, n);
  if (lo > hi) {
    // Range empty or unreachable: fall back to the fewest groups the
    // constraints allow.
    r.infeasible_k = min_k > k_range.second;
    r.k = min_k;
    r.labels = tree.labels_for(min_k);
    if (r.k >= 2) r.silhouette = silhouette_from_distances(dist, r.labels);
    return r;
  }
  for (int k = lo; k <= hi; ++k) {
    const auto& labels = tree.labels_for(k);
    if (k < 2) {
      if (!r.labels.empty()) continue;
      r.k = k;
      r.labels = labels;
      continue;
    }
    double s = silhouette_from_distances(dist, labels);
    if (!r.silhouette || s > *r.silhouette) {
      r.silhouette = s;
      r.k = k;
      r.labels = labels;
    }
  }
  return r;
}

ClusterResult cluster_assertions(const Eigen::MatrixXd& semantic, const Eigen::MatrixXi& paths,
                                 const Eigen::MatrixXd& sd, const FusionConfig& cfg,
                                 int n_subspecs) {
  validate(cfg);
  const Eigen::Index n = semantic.rows();
  if (paths.rows() != n || sd.rows() != n) throw InvalidArgument("feature matrices disagree on N");

  const double eps = cfg.dbscan_eps.value_or(default_eps(semantic));
  std::vector<int> sem = n > 0 ? dbscan(semantic, eps, cfg.dbscan_min_pts) : std::vector<int>{};

  PcaResult pca;
  if (n >= 2 && paths.cols() >= 1) {
    pca = pca_project_auto(paths.cast<double>(), cfg.pca_dims, cfg.evr_floor);
  } else {
    pca.projected = Eigen::MatrixXd::Zero(n, 0);
    pca.degenerate = true;
  }

  Eigen::MatrixXd fused = fuse(sem, pca.projected);
  auto range = cfg.k_range.value_or(default_k_range(static_cast<int>(n), n_subspecs));
  ClusterResult r = final_cluster(fused, sd, cfg, range);
  r.semantic_labels = std::move(sem);
  r.eps = eps;
  r.pca_dims = pca.dims;
  r.evr = pca.evr;
  r.pca_degenerate = pca.degenerate;
  r.evr_warning = pca.evr < cfg.evr_floor;
  return r;
}

nlohmann::json clusters_to_json(const ClusterResult& r, std::span<const std::string> ids) {
  nlohmann::json sil = r.silhouette ? nlohmann::json(*r.silhouette) : nlohmann::json(nullptr);
  return {{"schema", kClustersSchema},
          {"ids", std::vector<std::string>(ids.begin(), ids.end())},
          {"labels", r.labels},
          {"k", r.k},
          {"silhouette", sil},
          {"semantic_labels", r.semantic_labels},
          {"eps", r.eps},
          {"evr", r.evr},
          {"evr_warning", r.evr_warning},
          {"pca_dims", r.pca_dims},
          {"pca_degenerate", r.pca_degenerate},
          {"fused_width", r.fused.cols()},
          {"infeasible_k", r.infeasible_k},
          {"k_range", {r.k_range.first, r.k_range.second}}};
}

}  // namespace coverassert
