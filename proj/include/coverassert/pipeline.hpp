#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "coverassert/clustering.hpp"
#include "coverassert/mapping.hpp"
#include "coverassert/rtl_ast.hpp"
#include "coverassert/semantic.hpp"
#include "coverassert/spec_model.hpp"
#include "coverassert/struct_features.hpp"
#include "coverassert/sva.hpp"

namespace coverassert {

// One analysis pass over the current assertion pool. Only syntax-correct
// assertions take part in features, clustering and mapping.
struct PassResult {
  std::vector<Assertion> active;
  std::vector<IntentRecord> intents;  // parallel to active
  StructuralFeatures features;
  ClusterResult clusters;
  MappingResult mapping;
  std::size_t n = 0;  // every ingested assertion
  std::size_t s = 0;  // syntax-correct ones
};

// Mutates spec only through FunctionalPoint::covered_by.
PassResult run_pass(std::span<const Assertion> assertions, const AstIndex& rtl, SpecSet& spec,
                    SemanticEngine& engine, const FusionConfig& fusion, const MappingConfig& mapping);

}  // namespace coverassert
