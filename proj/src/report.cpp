#include "coverassert/report.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "coverassert/canonical_json.hpp"
#include "coverassert/error.hpp"
#include "coverassert/hashing.hpp"

namespace coverassert {

using nlohmann::json;

void validate(const RunConfig& cfg) {
  validate(cfg.provider);
  validate(cfg.fusion);
  validate(cfg.mapping);
  validate(cfg.loop);
}

json config_to_json(const RunConfig& cfg) {
  const auto& p = cfg.provider;
  const auto& f = cfg.fusion;
  json k_range = f.k_range ? json{f.k_range->first, f.k_range->second} : json(nullptr);
  json eps = f.dbscan_eps ? json(*f.dbscan_eps) : json(nullptr);
  return {
      {"schema", kConfigSchema},
      {"paths",
       {{"rtl", cfg.paths.rtl},
        {"assertions", cfg.paths.assertions},
        {"spec", cfg.paths.spec},
        {"out", cfg.paths.out},
        {"cache", cfg.paths.cache},
        {"generator", cfg.paths.generator}}},
      {"provider",
       {{"mode", p.mode == ProviderMode::Live ? "live" : "offline"},
        {"endpoint", p.endpoint},
        {"model", p.model_name},
        {"embed_model", p.embed_model},
        {"embed_dim", p.embed_dim},
        {"max_in_flight", p.max_in_flight},
        {"embed_batch", p.embed_batch},
        {"max_attempts", p.max_attempts},
        {"backoff_ms", p.backoff_ms},
        {"backoff_cap_ms", p.backoff_cap_ms},
        {"timeout_s", p.timeout_s}}},
      {"fusion",
       {{"tau", f.tau},
        {"dbscan_eps", eps},
        {"dbscan_min_pts", f.dbscan_min_pts},
        {"pca_dims", f.pca_dims},
        {"evr_floor", f.evr_floor},
        {"k_range", k_range}}},
      {"mapping", {{"alpha", cfg.mapping.alpha}, {"sigma", cfg.mapping.sigma}}},
      {"loop", {{"theta", cfg.loop.theta}, {"max_iterations", cfg.loop.max_iterations}}},
      {"ingest", {{"excluded_signals", cfg.ingest.excluded_signals}}},
      {"seed", cfg.seed},
  };
}

namespace {

class Reader {
 public:
  Reader(const json& obj, std::string ptr) : obj_(obj), ptr_(std::move(ptr)) {
    if (!obj_.is_object()) throw SchemaViolation(ptr_, "expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) const {
    if (!obj_.contains(key) || obj_[key].is_null()) return;
    try {
      out = obj_[key].get<T>();
    } catch (const json::exception&) {
      throw SchemaViolation(ptr_ + "/" + key, "wrong type");
    }
  }

  template <typename T>
  void get_optional(const char* key, std::optional<T>& out) const {
    if (!obj_.contains(key)) return;
    if (obj_[key].is_null()) {
      out.reset();
      return;
    }
    T v{};
    get(key, v);
    out = v;
  }

  std::optional<Reader> child(const char* key) const {
    if (!obj_.contains(key)) return std::nullopt;
    return Reader(obj_[key], ptr_ + "/" + key);
  }

 private:
  const json& obj_;
  std::string ptr_;
};

std::string resolve(const std::string& p, const std::filesystem::path& base) {
  if (p.empty() || base.empty()) return p;
  std::filesystem::path path(p);
  if (path.is_absolute()) return p;
  return (base / path).lexically_normal().string();
}

}  // namespace

RunConfig config_from_json(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw SchemaViolation("", "expected an object");
  if (doc.contains("schema") && doc["schema"] != kConfigSchema)
    throw SchemaViolation("/schema", "expected \"" + std::string(kConfigSchema) + "\"");
  Reader root(doc, "");
  RunConfig cfg;
  if (auto r = root.child("paths")) {
    if (doc["paths"].contains("rtl") && doc["paths"]["rtl"].is_string())
      cfg.paths.rtl = {doc["paths"]["rtl"].get<std::string>()};
    else
      r->get("rtl", cfg.paths.rtl);
    r->get("assertions", cfg.paths.assertions);
    r->get("spec", cfg.paths.spec);
    r->get("out", cfg.paths.out);
    r->get("cache", cfg.paths.cache);
    r->get("generator", cfg.paths.generator);
    for (auto& p : cfg.paths.rtl) p = resolve(p, base_dir);
    for (auto* p : {&cfg.paths.assertions, &cfg.paths.spec, &cfg.paths.out, &cfg.paths.cache,
                    &cfg.paths.generator})
      *p = resolve(*p, base_dir);
  }
  if (auto r = root.child("provider")) {
    std::string mode = "offline";
    r->get("mode", mode);
    if (mode == "live") cfg.provider.mode = ProviderMode::Live;
    else if (mode == "offline") cfg.provider.mode = ProviderMode::Offline;
    else throw SchemaViolation("/provider/mode", "expected \"live\" or \"offline\"");
    r->get("endpoint", cfg.provider.endpoint);
    r->get("model", cfg.provider.model_name);
    r->get("embed_model", cfg.provider.embed_model);
    r->get("embed_dim", cfg.provider.embed_dim);
    r->get("max_in_flight", cfg.provider.max_in_flight);
    r->get("embed_batch", cfg.provider.embed_batch);
    r->get("max_attempts", cfg.provider.max_attempts);
    r->get("backoff_ms", cfg.provider.backoff_ms);
    r->get("backoff_cap_ms", cfg.provider.backoff_cap_ms);
    r->get("timeout_s", cfg.provider.timeout_s);
  }
  if (auto r = root.child("fusion")) {
    r->get("tau", cfg.fusion.tau);
    r->get_optional("dbscan_eps", cfg.fusion.dbscan_eps);
    r->get("dbscan_min_pts", cfg.fusion.dbscan_min_pts);
    r->get("pca_dims", cfg.fusion.pca_dims);
    r->get("evr_floor", cfg.fusion.evr_floor);
    std::optional<std::vector<int>> kr;
    r->get_optional("k_range", kr);
    if (kr) {
      if (kr->size() != 2) throw SchemaViolation("/fusion/k_range", "expected [lo, hi]");
      cfg.fusion.k_range = std::make_pair((*kr)[0], (*kr)[1]);
    }
  }
  if (auto r = root.child("mapping")) {
    r->get("alpha", cfg.mapping.alpha);
    r->get("sigma", cfg.mapping.sigma);
  }
  if (auto r = root.child("loop")) {
    r->get("theta", cfg.loop.theta);
    r->get("max_iterations", cfg.loop.max_iterations);
  }
  if (auto r = root.child("ingest")) r->get("excluded_signals", cfg.ingest.excluded_signals);
  root.get("seed", cfg.seed);
  cfg.provider.seed = cfg.seed;
  cfg.provider.cache_path = cfg.paths.cache;
  return cfg;
}

std::string config_hash(const RunConfig& cfg) {
  json doc = config_to_json(cfg);
  doc.erase("paths");
  for (const char* k : {"max_in_flight", "embed_batch", "max_attempts", "backoff_ms", "backoff_cap_ms", "timeout_s"})
    doc["provider"].erase(k);
  return sha256_hex(canonical_dump(doc));
}

bool CoverageReport::below_threshold() const {
  return std::any_of(subspecs.begin(), subspecs.end(),
                     [&](const SubSpecCoverage& s) { return !degree_satisfied(s.match_degree, theta); });
}

CoverageReport make_report(const SpecSet& spec, double theta, std::size_t n, std::size_t s,
                           std::vector<IterationSnapshot> history, Provenance provenance) {
  CoverageReport r;
  r.design = spec.design;
  r.theta = theta;
  r.n = n;
  r.s = s;
  r.history = std::move(history);
  r.provenance = std::move(provenance);
  auto degrees = compute_match_degree(spec.subspecs);
  for (const auto& sub : spec.subspecs) {
    SubSpecCoverage c{sub.id, sub.title, degrees.degree.at(sub.id), {}, {}};
    for (const auto& p : sub.points) {
      PointCoverage pc{p.id, p.text, {p.covered_by.begin(), p.covered_by.end()}};
      (p.covered_by.empty() ? c.uncovered : c.covered).push_back(std::move(pc));
    }
    r.subspecs.push_back(std::move(c));
  }
  if (!r.subspecs.empty()) {
    double sum = 0.0;
    r.min_degree = 1.0;
    for (const auto& c : r.subspecs) {
      sum += c.match_degree;
      r.min_degree = std::min(r.min_degree, c.match_degree);
    }
    r.mean_degree = sum / static_cast<double>(r.subspecs.size());
  }
  return r;
}

namespace {

json points_json(const std::vector<PointCoverage>& pts) {
  auto out = json::array();
  for (const auto& p : pts) out.push_back({{"id", p.id}, {"text", p.text}, {"covered_by", p.covered_by}});
  return out;
}

std::vector<PointCoverage> points_from(const json& arr) {
  std::vector<PointCoverage> out;
  for (const auto& p : arr)
    out.push_back({p.at("id").get<std::string>(), p.at("text").get<std::string>(),
                   p.at("covered_by").get<std::vector<std::string>>()});
  return out;
}

}  // namespace

json report_to_json(const CoverageReport& r) {
  auto subs = json::array();
  for (const auto& c : r.subspecs)
    subs.push_back({{"id", c.id},
                    {"title", c.title},
                    {"match_degree", c.match_degree},
                    {"covered", points_json(c.covered)},
                    {"uncovered", points_json(c.uncovered)}});
  auto history = json::array();
  for (const auto& h : r.history)
    history.push_back({{"iteration", h.iteration},
                       {"added_count", h.added_count},
                       {"syntax_correct_count", h.syntax_correct_count},
                       {"total_count", h.total_count},
                       {"match_degrees", h.match_degrees}});
  return {{"schema", kReportSchema},
          {"design", r.design},
          {"theta", r.theta},
          {"terminated_reason", r.terminated_reason ? json(*r.terminated_reason) : json(nullptr)},
          {"global", {{"N", r.n}, {"S", r.s}, {"min_degree", r.min_degree}, {"mean_degree", r.mean_degree}}},
          {"subspecs", std::move(subs)},
          {"history", std::move(history)},
          {"provenance",
           {{"config_hash", r.provenance.config_hash},
            {"inputs", r.provenance.inputs},
            {"tool_version", r.provenance.tool_version}}}};
}

CoverageReport report_from_json(const json& doc) {
  try {
    if (doc.at("schema") != kReportSchema) throw SchemaViolation("/schema", "expected report/v1");
    CoverageReport r;
    r.design = doc.at("design").get<std::string>();
    r.theta = doc.at("theta").get<double>();
    if (!doc.at("terminated_reason").is_null()) r.terminated_reason = doc["terminated_reason"].get<std::string>();
    const auto& g = doc.at("global");
    r.n = g.at("N").get<std::size_t>();
    r.s = g.at("S").get<std::size_t>();
    r.min_degree = g.at("min_degree").get<double>();
    r.mean_degree = g.at("mean_degree").get<double>();
    for (const auto& c : doc.at("subspecs"))
      r.subspecs.push_back({c.at("id").get<std::string>(), c.at("title").get<std::string>(),
                            c.at("match_degree").get<double>(), points_from(c.at("covered")),
                            points_from(c.at("uncovered"))});
    for (const auto& h : doc.at("history"))
      r.history.push_back({h.at("iteration").get<int>(), h.at("added_count").get<std::size_t>(),
                           h.at("syntax_correct_count").get<std::size_t>(),
                           h.at("total_count").get<std::size_t>(),
                           h.at("match_degrees").get<std::map<std::string, double>>()});
    const auto& p = doc.at("provenance");
    r.provenance.config_hash = p.at("config_hash").get<std::string>();
    r.provenance.inputs = p.at("inputs").get<std::map<std::string, std::string>>();
    r.provenance.tool_version = p.at("tool_version").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw SchemaViolation("", std::string("malformed report: ") + e.what());
  }
}

namespace {

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * v);
  return buf;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

// Table cells must not break the row.
std::string cell(std::string s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\|";
    else if (c == '\n') out += ' ';
    else out += c;
  }
  return out;
}

}  // namespace

std::string render_markdown(const CoverageReport& r) {
  std::string md;
  md += "# Coverage report: " + cell(r.design) + "\n\n";
  md += "- Assertions (N): " + std::to_string(r.n) + "\n";
  md += "- Syntax-correct (S): " + std::to_string(r.s) + "\n";
  md += "- Minimum match degree: " + percent(r.min_degree) + "\n";
  md += "- Mean match degree: " + percent(r.mean_degree) + "\n";
  md += "- Threshold: " + percent(r.theta) + "\n";
  if (r.terminated_reason) md += "- Loop ended: " + *r.terminated_reason + "\n";
  md += "\n## Coverage by sub-spec\n\n";
  md += "| Sub-spec | Title | Match degree | Covered | Points |\n";
  md += "|---|---|---:|---:|---:|\n";
  for (const auto& c : r.subspecs) {
    md += "| " + cell(c.id) + " | " + cell(c.title) + " | " + percent(c.match_degree) + " | " +
          std::to_string(c.covered.size()) + " | " +
          std::to_string(c.covered.size() + c.uncovered.size()) + " |\n";
  }
  if (!r.history.empty()) {
    md += "\n## Iterations\n\n";
    md += "| Iteration | Added | Total | Syntax-correct | Min degree |\n";
    md += "|---:|---:|---:|---:|---:|\n";
    for (const auto& h : r.history) {
      double lo = 1.0;
      for (const auto& [id, d] : h.match_degrees) lo = std::min(lo, d);
      if (h.match_degrees.empty()) lo = 0.0;
      md += "| " + std::to_string(h.iteration) + " | " + std::to_string(h.added_count) + " | " +
            std::to_string(h.total_count) + " | " + std::to_string(h.syntax_correct_count) + " | " +
            fixed(lo) + " |\n";
    }
  }
  bool open = std::any_of(r.subspecs.begin(), r.subspecs.end(),
                          [](const SubSpecCoverage& c) { return !c.uncovered.empty(); });
  if (open) {
    md += "\n## Uncovered points\n";
    for (const auto& c : r.subspecs) {
      if (c.uncovered.empty()) continue;
      md += "\n### " + cell(c.id) + "\n\n";
      for (const auto& p : c.uncovered) md += "- `" + p.id + "`: " + cell(p.text) + "\n";
    }
  }
  md += "\n---\n\nconfig " + r.provenance.config_hash.substr(0, 12) + ", tool " +
        r.provenance.tool_version + "\n";
  return md;
}

}  // namespace coverassert
