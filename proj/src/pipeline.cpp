#include "coverassert/pipeline.hpp"

namespace coverassert {

PassResult run_pass(std::span<const Assertion> assertions, const AstIndex& rtl, SpecSet& spec,
                    SemanticEngine& engine, const FusionConfig& fusion, const MappingConfig& mapping) {
  PassResult r;
  r.n = assertions.size();
  for (const auto& a : assertions)
    if (a.syntax_ok) r.active.push_back(a);
  r.s = r.active.size();

  r.features = compute_structural_features(r.active, rtl);
  r.intents = engine.intents(r.active);

  const auto n = static_cast<Eigen::Index>(r.active.size());
  Eigen::MatrixXd semantic(n, engine.config().embed_dim);
  for (Eigen::Index i = 0; i < n; ++i)
    semantic.row(i) = r.intents[static_cast<std::size_t>(i)].embedding.transpose();

  r.clusters = cluster_assertions(semantic, r.features.q, r.features.sd, fusion,
                                  static_cast<int>(spec.subspecs.size()));
  r.mapping = map_assertions(r.active, r.intents, r.clusters.labels, spec, engine, mapping);
  return r;
}

}  // namespace coverassert
