#include "coverassert/struct_features.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <tuple>
#include <utility>

#include "coverassert/error.hpp"

namespace coverassert {

double structural_penalty(const AstIndex& index) noexcept {
  return 2.0 * static_cast<double>(index.max_depth()) + 1.0;
}

double lca_distance(const AstIndex& index, NodeRef s, NodeRef t, double penalty) {
  if (s.tree != t.tree) return penalty;
  const auto& tree = index.tree(s.tree);
  std::uint32_t a = s.node, b = t.node;
  std::uint32_t steps = 0;
  while (tree.node(a).depth > tree.node(b).depth) {
    a = *tree.node(a).parent;
    ++steps;
  }
  while (tree.node(b).depth > tree.node(a).depth) {
    b = *tree.node(b).parent;
    ++steps;
  }
  while (a != b) {
    a = *tree.node(a).parent;
    b = *tree.node(b).parent;
    steps += 2;
  }
  return static_cast<double>(steps);
}

namespace {

// Min node-pair distance per unordered pair of signal names, computed once.
class SignalDistanceCache {
 public:
  SignalDistanceCache(const AstIndex& index, double penalty) : index_(index), penalty_(penalty) {}

  double get(const std::string& v, const std::string& u) {
    auto key = v < u ? std::make_pair(v, u) : std::make_pair(u, v);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    double best = penalty_;
    auto nv = index_.find(v);
    auto nu = index_.find(u);
    for (const auto& a : nv)
      for (const auto& b : nu) best = std::min(best, lca_distance(index_, a, b, penalty_));
    cache_.emplace(std::move(key), best);
    return best;
  }

 private:
  const AstIndex& index_;
  double penalty_;
  std::map<std::pair<std::string, std::string>, double> cache_;
};

}  // namespace

SdMatrix sd_matrix(std::span<const Assertion> assertions, const AstIndex& index, double penalty) {
  if (!(penalty > 0)) throw InvalidArgument("penalty must be positive");
  const auto n = static_cast<Eigen::Index>(assertions.size());
  SdMatrix out{Eigen::MatrixXd::Zero(n, n), std::vector<bool>(assertions.size(), false)};
  SignalDistanceCache cache(index, penalty);

  for (Eigen::Index i = 0; i < n; ++i)
    out.structurally_unknown[i] = assertions[i].signals.empty();

  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const auto& si = assertions[i].signals;
      const auto& sj = assertions[j].signals;
      double value = penalty;
      if (!si.empty() && !sj.empty()) {
        double sum = 0.0;
        for (const auto& v : si)
          for (const auto& u : sj) sum += cache.get(v, u);
        value = sum / (static_cast<double>(si.size()) * static_cast<double>(sj.size()));
      }
      out.sd(i, j) = value;
      out.sd(j, i) = value;
    }
  }
  return out;
}

std::optional<NodeRef> representative_node(const AstIndex& index, std::string_view signal) {
  auto nodes = index.find(signal);
  if (nodes.empty()) return std::nullopt;
  auto key = [&](NodeRef r) {
    const auto& n = index.node(r);
    return std::make_tuple(n.depth, n.span.begin, r.tree, r.node);
  };
  return *std::min_element(nodes.begin(), nodes.end(),
                           [&](NodeRef a, NodeRef b) { return key(a) < key(b); });
}

PathMatrix path_matrix(std::span<const Assertion> assertions, const AstIndex& index) {
  std::vector<std::vector<int>> rows;
  rows.reserve(assertions.size());
  std::size_t d_max = 0;
  for (const auto& a : assertions) {
    std::vector<std::string> names = a.signals;
    std::sort(names.begin(), names.end());
    std::vector<int> row;
    for (const auto& name : names) {
      auto rep = representative_node(index, name);
      if (!rep) continue;
      for (NodeRef r : node_path(index, *rep)) row.push_back(1 + kind_code(index.node(r).kind));
    }
    d_max = std::max(d_max, row.size());
    rows.push_back(std::move(row));
  }
  // A zero-width matrix is useless downstream; keep one all-zero column.
  d_max = std::max<std::size_t>(d_max, 1);

  PathMatrix out;
  out.d_max = d_max;
  out.q = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(rows.size()),
                                static_cast<Eigen::Index>(d_max));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.lengths.push_back(rows[i].size());
    for (std::size_t k = 0; k < rows[i].size(); ++k)
      out.q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return out;
}

StructuralFeatures compute_structural_features(std::span<const Assertion> assertions,
                                               const AstIndex& index) {
  StructuralFeatures f;
  f.penalty = structural_penalty(index);
  auto sd = sd_matrix(assertions, index, f.penalty);
  f.sd = std::move(sd.sd);
  f.structurally_unknown = std::move(sd.structurally_unknown);
  auto q = path_matrix(assertions, index);
  f.q = std::move(q.q);
  f.d_max = q.d_max;
  f.path_lengths = std::move(q.lengths);
  return f;
}

namespace {

nlohmann::json ids_of(std::span<const Assertion> assertions) {
  auto ids = nlohmann::json::array();
  for (const auto& a : assertions) ids.push_back(a.id);
  return ids;
}

}  // namespace

nlohmann::json sd_to_json(const StructuralFeatures& f, std::span<const Assertion> assertions) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < f.sd.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < f.sd.cols(); ++j) row.push_back(f.sd(i, j));
    rows.push_back(std::move(row));
  }
  auto unknown = nlohmann::json::array();
  for (std::size_t i = 0; i < f.structurally_unknown.size(); ++i)
    if (f.structurally_unknown[i]) unknown.push_back(assertions[i].id);
  return {{"schema", kFeaturesSchema},
          {"ids", ids_of(assertions)},
          {"penalty", f.penalty},
          {"sd", std::move(rows)},
          {"structurally_unknown", std::move(unknown)}};
}

nlohmann::json q_to_json(const StructuralFeatures& f, std::span<const Assertion> assertions) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < f.q.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < f.q.cols(); ++j) row.push_back(f.q(i, j));
    rows.push_back(std::move(row));
  }
  return {{"schema", kFeaturesSchema},
          {"ids", ids_of(assertions)},
          {"d_max", f.d_max},
          {"lengths", f.path_lengths},
          {"rows", std::move(rows)}};
}

}  // namespace coverassert
