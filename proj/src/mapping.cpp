#include "coverassert/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "coverassert/error.hpp"
#include "coverassert/prompts.hpp"

namespace coverassert {

void validate(const MappingConfig& cfg) {
  if (!(cfg.alpha >= 0 && cfg.alpha <= 1)) throw InvalidArgument("alpha must lie in [0, 1]");
  if (!(cfg.sigma >= 0 && cfg.sigma <= 1)) throw InvalidArgument("sigma must lie in [0, 1]");
}

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::string> inter, uni;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(uni));
  if (uni.empty()) return 0.0;
  return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

double point_score(double alpha, double cosine, double jaccard) {
  return alpha * std::max(0.0, cosine) + (1.0 - alpha) * jaccard;
}

std::string group_embedding_text(const GroupIntent& g) {
  std::string out = g.description + "\nsignals:";
  for (const auto& s : g.signals) out += " " + s;
  return out;
}

std::vector<GroupIntent> build_group_intents(std::span<const Assertion> assertions,
                                             std::span<const IntentRecord> intents,
                                             std::span<const int> labels, SemanticEngine& engine) {
  if (assertions.size() != intents.size() || assertions.size() != labels.size())
    throw InvalidArgument("assertions, intents and labels must be parallel");
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);

  std::vector<GroupIntent> groups;
  for (auto& [label, idx] : members) {
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return assertions[a].id < assertions[b].id; });
    GroupIntent g;
    g.group_id = label;
    std::set<std::string> sigs;
    for (std::size_t i : idx) {
      g.members.push_back(assertions[i].id);
      sigs.insert(assertions[i].signals.begin(), assertions[i].signals.end());
    }
    g.signals.assign(sigs.begin(), sigs.end());

    if (engine.live()) {
      std::string listing;
      for (std::size_t i : idx) listing += assertions[i].text + "\n";
      try {
        g.description = engine.chat(render_prompt("group_v1", {{"assertions", listing}}));
      } catch (const ProviderUnavailable&) {
      } catch (const MalformedProviderReply&) {
      }
    }
    if (g.description.empty()) {
      for (std::size_t k = 0; k < idx.size(); ++k) {
        if (k) g.description += "\n";
        g.description += intents[idx[k]].intent_text;
      }
    }
    groups.push_back(std::move(g));
  }

  if (!groups.empty()) {
    std::vector<std::string> texts;
    for (const auto& g : groups) texts.push_back(group_embedding_text(g));
    Eigen::MatrixXd rows = engine.embed_batch(texts);
    for (std::size_t k = 0; k < groups.size(); ++k)
      groups[k].embedding = rows.row(static_cast<Eigen::Index>(k)).transpose();
  }
  return groups;
}

std::map<int, std::string> match_groups(std::span<const GroupIntent> groups,
                                        std::span<const SubSpec> subspecs) {
  if (subspecs.empty()) throw InvalidArgument("no sub-specs to match against");
  constexpr double kTie = 1e-12;
  std::map<int, std::string> out;
  for (const auto& g : groups) {
    const SubSpec* best = nullptr;
    double best_cos = 0.0, best_jac = 0.0;
    for (const auto& s : subspecs) {
      const double c = cosine(g.embedding, s.embedding);
      const double j = jaccard(g.signals, s.signals);
      bool better = false;
      if (!best || c > best_cos + kTie) {
        better = true;
      } else if (std::abs(c - best_cos) <= kTie) {
        if (j > best_jac + kTie) better = true;
        else if (std::abs(j - best_jac) <= kTie && s.id < best->id) better = true;
      }
      if (better) {
        best = &s;
        best_cos = c;
        best_jac = j;
      }
    }
    out[g.group_id] = best->id;
  }
  return out;
}

std::vector<PointAssignment> match_points(std::span<const Assertion> assertions,
                                          std::span<const IntentRecord> intents,
                                          SubSpec& subspec, const MappingConfig& cfg,
                                          std::vector<PointScore>* scores) {
  validate(cfg);
  if (assertions.size() != intents.size()) throw InvalidArgument("assertions and intents must be parallel");
  std::vector<PointAssignment> out;
  for (std::size_t i = 0; i < assertions.size(); ++i) {
    const auto& a = assertions[i];
    std::size_t best = subspec.points.size();
    double best_score = -1.0;
    for (std::size_t k = 0; k < subspec.points.size(); ++k) {
      const auto& p = subspec.points[k];
      PointScore ps{a.id, p.id, std::max(0.0, cosine(intents[i].embedding, p.embedding)),
                    jaccard(a.signals, p.signals), 0.0};
      ps.score = std::clamp(point_score(cfg.alpha, ps.cosine, ps.jaccard), 0.0, 1.0);
      if (ps.score > best_score) {
        best_score = ps.score;
        best = k;
      }
      if (scores) scores->push_back(std::move(ps));
    }
    if (best < subspec.points.size() && best_score >= cfg.sigma)
      out.push_back({a.id, subspec.points[best].id, subspec.id, best_score});
  }
  // Commit after scoring so covered_by never influences the scores above.
  for (const auto& asg : out)
    for (auto& p : subspec.points)
      if (p.id == asg.point_id) p.covered_by.insert(asg.assertion_id);
  return out;
}

MatchDegrees compute_match_degree(std::span<const SubSpec> subspecs) {
  MatchDegrees out;
  for (const auto& s : subspecs) {
    std::size_t covered = 0;
    auto& open = out.uncovered[s.id];
    for (const auto& p : s.points) {
      if (p.covered_by.empty()) open.push_back(p.id);
      else ++covered;
    }
    out.degree[s.id] = s.points.empty() ? 0.0 : static_cast<double>(covered) / static_cast<double>(s.points.size());
  }
  return out;
}

MappingResult map_assertions(std::span<const Assertion> assertions,
                             std::span<const IntentRecord> intents, std::span<const int> labels,
                             SpecSet& spec, SemanticEngine& engine, const MappingConfig& cfg) {
  validate(cfg);
  MappingResult m;
  m.groups = build_group_intents(assertions, intents, labels, engine);
  if (!m.groups.empty()) m.group_to_subspec = match_groups(m.groups, spec.subspecs);

  for (auto& s : spec.subspecs) {
    std::vector<Assertion> members;
    std::vector<IntentRecord> member_intents;
    for (std::size_t i = 0; i < assertions.size(); ++i) {
      if (m.group_to_subspec.at(labels[i]) != s.id) continue;
      members.push_back(assertions[i]);
      member_intents.push_back(intents[i]);
    }
    auto got = match_points(members, member_intents, s, cfg, &m.scores);
    m.assignments.insert(m.assignments.end(), got.begin(), got.end());
  }
  auto degrees = compute_match_degree(spec.subspecs);
  m.match_degree = std::move(degrees.degree);
  m.uncovered = std::move(degrees.uncovered);
  return m;
}

nlohmann::json mapping_to_json(const MappingResult& m) {
  using nlohmann::json;
  auto groups = json::array();
  for (const auto& g : m.groups)
    groups.push_back({{"group_id", g.group_id},
                      {"description", g.description},
                      {"members", g.members},
                      {"signals", g.signals},
                      {"subspec_id", m.group_to_subspec.count(g.group_id) ? m.group_to_subspec.at(g.group_id) : ""}});
  auto assignments = json::array();
  for (const auto& a : m.assignments)
    assignments.push_back({{"assertion_id", a.assertion_id},
                           {"point_id", a.point_id},
                           {"subspec_id", a.subspec_id},
                           {"score", a.score}});
  auto scores = json::array();
  for (const auto& s : m.scores)
    scores.push_back({{"assertion_id", s.assertion_id},
                      {"point_id", s.point_id},
                      {"cosine", s.cosine},
                      {"jaccard", s.jaccard},
                      {"score", s.score}});
  json g2s = json::object();
  for (const auto& [g, s] : m.group_to_subspec) g2s[std::to_string(g)] = s;
  return {{"schema", kMappingSchema},
          {"groups", std::move(groups)},
          {"group_to_subspec", std::move(g2s)},
          {"point_assignments", std::move(assignments)},
          {"scores", std::move(scores)},
          {"match_degree", m.match_degree},
          {"uncovered", m.uncovered}};
}

}  // namespace coverassert
