#include "coverassert/spec_model.hpp"

#include <algorithm>
#include <cctype>
#include <functional>

#include "coverassert/error.hpp"
#include "coverassert/prompts.hpp"
#include "coverassert/provider.hpp"
#include "coverassert/semantic.hpp"

namespace coverassert {

using nlohmann::json;

std::size_t SpecSet::point_count() const {
  std::size_t n = 0;
  for (const auto& s : subspecs) n += s.points.size();
  return n;
}

const SubSpec* SpecSet::find_subspec(std::string_view id) const {
  for (const auto& s : subspecs)
    if (s.id == id) return &s;
  return nullptr;
}

std::vector<std::string> identifier_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto ident_start = [](unsigned char c) { return std::isalpha(c) || c == '_'; };
  auto ident_char = [](unsigned char c) { return std::isalnum(c) || c == '_' || c == '$'; };
  while (i < text.size()) {
    auto c = static_cast<unsigned char>(text[i]);
    if (ident_start(c)) {
      std::size_t j = i + 1;
      while (j < text.size() && ident_char(static_cast<unsigned char>(text[j]))) ++j;
      out.emplace_back(text.substr(i, j - i));
      i = j;
    } else if (std::isdigit(c)) {
      while (i < text.size() && ident_char(static_cast<unsigned char>(text[i]))) ++i;
    } else {
      ++i;
    }
  }
  return out;
}

std::vector<std::string> point_signals(std::string_view text,
                                       const std::vector<std::string>& subspec_signals) {
  auto tokens = identifier_tokens(text);
  std::sort(tokens.begin(), tokens.end());
  std::vector<std::string> out;
  for (const auto& s : subspec_signals)
    if (std::binary_search(tokens.begin(), tokens.end(), s)) out.push_back(s);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

const json& require(const json& obj, const std::string& key, const std::string& ptr) {
  if (!obj.contains(key)) throw SchemaViolation(ptr + "/" + key, "missing field");
  return obj[key];
}

std::string require_string(const json& obj, const std::string& key, const std::string& ptr,
                           bool non_empty) {
  const json& v = require(obj, key, ptr);
  if (!v.is_string()) throw SchemaViolation(ptr + "/" + key, "expected a string");
  auto s = v.get<std::string>();
  if (non_empty && s.empty()) throw SchemaViolation(ptr + "/" + key, "must not be empty");
  return s;
}

std::vector<std::string> string_list(const json& v, const std::string& ptr) {
  if (!v.is_array()) throw SchemaViolation(ptr, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_string() || v[i].get<std::string>().empty())
      throw SchemaViolation(ptr + "/" + std::to_string(i), "expected a non-empty string");
    out.push_back(v[i].get<std::string>());
  }
  return out;
}

std::vector<std::string> sorted_unique(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

SpecSet parse_spec_json(const json& doc) {
  if (!doc.is_object()) throw SchemaViolation("", "expected an object");
  if (doc.contains("schema") && doc["schema"] != kSpecSchema)
    throw SchemaViolation("/schema", "expected \"" + std::string(kSpecSchema) + "\"");
  SpecSet spec;
  spec.design = require_string(doc, "design", "", false);
  const json& subs = require(doc, "subspecs", "");
  if (!subs.is_array() || subs.empty())
    throw SchemaViolation("/subspecs", "expected a non-empty array");

  std::set<std::string> subspec_ids, point_ids;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    const std::string ptr = "/subspecs/" + std::to_string(i);
    const json& e = subs[i];
    if (!e.is_object()) throw SchemaViolation(ptr, "expected an object");
    SubSpec s;
    s.id = require_string(e, "id", ptr, true);
    if (!subspec_ids.insert(s.id).second) throw SchemaViolation(ptr + "/id", "duplicate id " + s.id);
    s.title = require_string(e, "title", ptr, false);
    s.description = require_string(e, "description", ptr, true);
    s.signals = sorted_unique(string_list(require(e, "signals", ptr), ptr + "/signals"));

    const json& pts = require(e, "points", ptr);
    if (!pts.is_array() || pts.empty())
      throw SchemaViolation(ptr + "/points", "expected a non-empty array");

    // Names a point may mention: description tokens plus the declared signals.
    auto allowed = identifier_tokens(s.description);
    allowed.insert(allowed.end(), s.signals.begin(), s.signals.end());
    allowed = sorted_unique(std::move(allowed));

    for (std::size_t k = 0; k < pts.size(); ++k) {
      const std::string pptr = ptr + "/points/" + std::to_string(k);
      const json& pe = pts[k];
      if (!pe.is_object()) throw SchemaViolation(pptr, "expected an object");
      FunctionalPoint p;
      p.id = require_string(pe, "id", pptr, true);
      if (!point_ids.insert(p.id).second) throw SchemaViolation(pptr + "/id", "duplicate id " + p.id);
      p.text = require_string(pe, "text", pptr, true);
      if (p.text.find('\n') != std::string::npos)
        throw SchemaViolation(pptr + "/text", "a point must be a single statement");
      if (pe.contains("signals")) {
        p.signals = sorted_unique(string_list(pe["signals"], pptr + "/signals"));
        auto text_tokens = sorted_unique(identifier_tokens(p.text));
        for (const auto& name : p.signals) {
          if (!std::binary_search(allowed.begin(), allowed.end(), name) &&
              !std::binary_search(text_tokens.begin(), text_tokens.end(), name))
            throw SchemaViolation(pptr + "/signals", "signal " + name +
                                                         " appears in neither the point text nor the sub-spec");
        }
      } else {
        p.signals = point_signals(p.text, s.signals);
      }
      s.points.push_back(std::move(p));
    }
    spec.subspecs.push_back(std::move(s));
  }
  return spec;
}

json spec_to_json(const SpecSet& spec) {
  auto subs = json::array();
  for (const auto& s : spec.subspecs) {
    auto pts = json::array();
    for (const auto& p : s.points) pts.push_back({{"id", p.id}, {"text", p.text}, {"signals", p.signals}});
    subs.push_back({{"id", s.id},
                    {"title", s.title},
                    {"signals", s.signals},
                    {"description", s.description},
                    {"points", std::move(pts)}});
  }
  return {{"schema", kSpecSchema}, {"design", spec.design}, {"subspecs", std::move(subs)}};
}

std::string subspec_embedding_text(const SubSpec& s) {
  std::string out = s.title + "\n" + s.description + "\nsignals:";
  for (const auto& sig : s.signals) out += " " + sig;
  return out;
}

void embed_spec(SpecSet& spec, SemanticEngine& engine) {
  std::vector<std::string> texts;
  for (const auto& s : spec.subspecs) {
    texts.push_back(subspec_embedding_text(s));
    for (const auto& p : s.points) texts.push_back(p.text);
  }
  if (texts.empty()) return;
  Eigen::MatrixXd rows = engine.embed_batch(texts);
  Eigen::Index r = 0;
  for (auto& s : spec.subspecs) {
    s.embedding = rows.row(r++).transpose();
    for (auto& p : s.points) p.embedding = rows.row(r++).transpose();
  }
}

namespace {

// Sends `prompt`, parses the JSON reply with `parse`; on failure sends one
// repair prompt carrying the error message.
template <typename T>
T ask_json(SemanticEngine& engine, const std::string& prompt,
           const std::function<std::string(const std::string&)>& repair_prompt,
           const std::function<T(const json&)>& parse) {
  std::string error;
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string reply = engine.chat(attempt == 0 ? prompt : repair_prompt(error));
    try {
      return parse(json::parse(extract_json_block(reply)));
    } catch (const json::exception& e) {
      error = e.what();
    } catch (const MalformedProviderReply& e) {
      error = e.what();
    }
  }
  throw MalformedProviderReply("provider reply still malformed after repair: " + error);
}

std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

}  // namespace

std::vector<SubSpec> split_spec(const std::string& spec_text, SemanticEngine& engine) {
  if (spec_text.empty()) throw InvalidArgument("specification text is empty");
  auto parse = [](const json& doc) {
    std::vector<SubSpec> out;
    std::set<std::string> ids;
    const json& subs = doc.at("subspecs");
    if (!subs.is_array() || subs.empty()) throw MalformedProviderReply("no subspecs in reply");
    for (const auto& e : subs) {
      SubSpec s;
      s.id = e.at("id").get<std::string>();
      s.title = e.at("title").get<std::string>();
      s.description = e.at("description").get<std::string>();
      s.signals = sorted_unique(e.at("signals").get<std::vector<std::string>>());
      if (s.id.empty() || s.description.empty()) throw MalformedProviderReply("subspec without id or description");
      if (!ids.insert(s.id).second) throw MalformedProviderReply("duplicate subspec id " + s.id);
      out.push_back(std::move(s));
    }
    return out;
  };
  return ask_json<std::vector<SubSpec>>(
      engine, render_prompt("split_v1", {{"spec", spec_text}}),
      [&](const std::string& err) { return render_prompt("split_repair_v1", {{"error", err}, {"spec", spec_text}}); },
      parse);
}

std::vector<FunctionalPoint> extract_points(const SubSpec& subspec, SemanticEngine& engine) {
  if (subspec.description.empty()) throw InvalidArgument("sub-spec " + subspec.id + " has no description");
  std::map<std::string, std::string> vars{{"title", subspec.title},
                                          {"signals", join(subspec.signals, ", ")},
                                          {"description", subspec.description}};
  auto parse = [&](const json& doc) {
    const json& pts = doc.at("points");
    if (!pts.is_array() || pts.empty()) throw MalformedProviderReply("no points in reply");
    std::vector<FunctionalPoint> out;
    for (const auto& item : pts) {
      FunctionalPoint p;
      p.text = item.get<std::string>();
      if (p.text.empty()) throw MalformedProviderReply("empty point text");
      p.id = subspec.id + "-" + std::to_string(out.size() + 1);
      p.signals = point_signals(p.text, subspec.signals);
      out.push_back(std::move(p));
    }
    return out;
  };
  return ask_json<std::vector<FunctionalPoint>>(
      engine, render_prompt("points_v1", vars),
      [&](const std::string& err) {
        auto v = vars;
        v["error"] = err;
        return render_prompt("points_repair_v1", v);
      },
      parse);
}

SpecSet build_spec_live(const std::string& design, const std::string& spec_text,
                        SemanticEngine& engine) {
  SpecSet spec;
  spec.design = design;
  spec.subspecs = split_spec(spec_text, engine);
  for (auto& s : spec.subspecs) s.points = extract_points(s, engine);
  embed_spec(spec, engine);
  return spec;
}

}  // namespace coverassert
