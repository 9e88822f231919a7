#include "coverassert/feedback.hpp"

#include <algorithm>
#include <set>

#include "coverassert/error.hpp"

namespace coverassert {

using nlohmann::json;

void validate(const LoopConfig& cfg) {
  if (!(cfg.theta > 0 && cfg.theta <= 1)) throw InvalidArgument("theta must lie in (0, 1]");
  if (cfg.max_iterations < 0) throw InvalidArgument("max_iterations must be >= 0");
}

bool degree_satisfied(double degree, double theta) noexcept {
  return degree > theta || degree >= 1.0;
}

FeedbackPayload build_payload(const std::map<std::string, double>& match_degree,
                              std::span<const SubSpec> subspecs, double theta, int iteration) {
  FeedbackPayload p;
  p.iteration = iteration;
  for (const auto& s : subspecs) {
    auto it = match_degree.find(s.id);
    const double degree = it == match_degree.end() ? 0.0 : it->second;
    if (degree_satisfied(degree, theta)) continue;
    PayloadItem item{s.id, s.description, degree, {}};
    for (const auto& pt : s.points)
      if (pt.covered_by.empty()) item.uncovered_points.push_back({pt.id, pt.text, pt.signals});
    p.items.push_back(std::move(item));
  }
  std::stable_sort(p.items.begin(), p.items.end(),
                   [](const PayloadItem& a, const PayloadItem& b) { return a.match_degree < b.match_degree; });
  return p;
}

json payload_to_json(const FeedbackPayload& p) {
  auto items = json::array();
  for (const auto& item : p.items) {
    auto points = json::array();
    for (const auto& pt : item.uncovered_points)
      points.push_back({{"point_id", pt.point_id}, {"text", pt.text}, {"signals", pt.signals}});
    items.push_back({{"subspec_id", item.subspec_id},
                     {"subspec_description", item.subspec_description},
                     {"match_degree", item.match_degree},
                     {"uncovered_points", std::move(points)}});
  }
  return {{"schema", kPayloadSchema}, {"iteration", p.iteration}, {"items", std::move(items)}};
}

FeedbackPayload payload_from_json(const json& doc) {
  try {
    if (doc.at("schema") != kPayloadSchema) throw SchemaViolation("/schema", "expected payload/v1");
    FeedbackPayload p;
    p.iteration = doc.at("iteration").get<int>();
    for (const auto& item : doc.at("items")) {
      PayloadItem it{item.at("subspec_id").get<std::string>(),
                     item.at("subspec_description").get<std::string>(),
                     item.at("match_degree").get<double>(),
                     {}};
      for (const auto& pt : item.at("uncovered_points"))
        it.uncovered_points.push_back({pt.at("point_id").get<std::string>(), pt.at("text").get<std::string>(),
                                       pt.at("signals").get<std::vector<std::string>>()});
      p.items.push_back(std::move(it));
    }
    return p;
  } catch (const json::exception& e) {
    throw SchemaViolation("", std::string("malformed payload: ") + e.what());
  }
}

std::string_view to_string(TerminationReason r) noexcept {
  switch (r) {
    case TerminationReason::ThresholdMet: return "threshold_met";
    case TerminationReason::MaxIterations: return "max_iterations";
    case TerminationReason::GeneratorExhausted: return "generator_exhausted";
  }
  return "unknown";
}

json loop_state_to_json(const LoopState& s) {
  auto history = json::array();
  for (const auto& h : s.history)
    history.push_back({{"iteration", h.iteration},
                       {"added_count", h.added_count},
                       {"syntax_correct_count", h.syntax_correct_count},
                       {"total_count", h.total_count},
                       {"match_degrees", h.match_degrees}});
  auto assertions = json::array();
  for (const auto& a : s.assertions)
    assertions.push_back({{"id", a.id},
                          {"text", a.text},
                          {"iteration", a.origin_iteration},
                          {"syntax_ok", a.syntax_ok}});
  json out{{"schema", kLoopStateSchema},
           {"iteration", s.iteration},
           {"terminated_reason", to_string(s.terminated_reason)},
           {"history", std::move(history)},
           {"assertions", std::move(assertions)}};
  if (!s.generator_error.empty()) out["generator_error"] = s.generator_error;
  return out;
}

namespace {

IterationSnapshot snapshot(int iteration, std::size_t added, const PassResult& pass) {
  return {iteration, added, pass.s, pass.n, pass.mapping.match_degree};
}

bool all_satisfied(const std::map<std::string, double>& degrees, double theta) {
  return std::all_of(degrees.begin(), degrees.end(),
                     [&](const auto& kv) { return degree_satisfied(kv.second, theta); });
}

}  // namespace

LoopOutcome run_loop(const LoopConfig& cfg, SpecSet& spec, const AstIndex& rtl,
                     std::span<const RawAssertion> seeds, GeneratorAdapter& generator,
                     SemanticEngine& engine, const FusionConfig& fusion,
                     const MappingConfig& mapping, const IngestOptions& ingest,
                     const LoopHooks& hooks) {
  validate(cfg);
  LoopOutcome out;
  LoopState& st = out.state;

  std::vector<RawAssertion> seed_copy(seeds.begin(), seeds.end());
  for (auto& r : seed_copy) r.iteration = 0;
  st.assertions = ingest_assertions(seed_copy, ingest);

  out.last_pass = run_pass(st.assertions, rtl, spec, engine, fusion, mapping);
  st.history.push_back(snapshot(0, st.assertions.size(), out.last_pass));
  if (hooks.on_pass) hooks.on_pass(0, out.last_pass);

  std::set<std::string> texts, ids;
  for (const auto& a : st.assertions) {
    texts.insert(a.text);
    ids.insert(a.id);
  }

  for (;;) {
    if (all_satisfied(out.last_pass.mapping.match_degree, cfg.theta)) {
      st.terminated_reason = TerminationReason::ThresholdMet;
      break;
    }
    if (st.iteration >= cfg.max_iterations) {
      st.terminated_reason = TerminationReason::MaxIterations;
      break;
    }
    const int next = st.iteration + 1;
    FeedbackPayload payload = build_payload(out.last_pass.mapping.match_degree, spec.subspecs, cfg.theta, next);
    if (hooks.on_payload) hooks.on_payload(payload);

    std::vector<RawAssertion> produced;
    try {
      produced = generator.generate(payload);
    } catch (const std::exception& e) {
      st.terminated_reason = TerminationReason::GeneratorExhausted;
      st.generator_error = GeneratorFailure(next, e.what()).what();
      break;
    }

    std::vector<RawAssertion> fresh;
    for (auto& r : produced) {
      if (r.text.empty() || !texts.insert(r.text).second) continue;
      std::string base = "it" + std::to_string(next) + "/" + (r.id.empty() ? "a" : r.id);
      std::string id = base;
      for (int k = 2; ids.count(id); ++k) id = base + "#" + std::to_string(k);
      ids.insert(id);
      fresh.push_back({id, r.text, next});
    }
    if (fresh.empty()) {
      st.terminated_reason = TerminationReason::GeneratorExhausted;
      break;
    }

    auto added = ingest_assertions(fresh, ingest);
    st.assertions.insert(st.assertions.end(), added.begin(), added.end());
    st.iteration = next;
    try {
      out.last_pass = run_pass(st.assertions, rtl, spec, engine, fusion, mapping);
    } catch (const Error& e) {
      throw Error("iteration " + std::to_string(next) + ": " + e.what());
    }
    st.history.push_back(snapshot(next, added.size(), out.last_pass));
    if (hooks.on_pass) hooks.on_pass(next, out.last_pass);
  }
  return out;
}

}  // namespace coverassert
