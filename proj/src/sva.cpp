#include "coverassert/sva.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <set>
#include <unordered_set>

#include "coverassert/error.hpp"
#include "coverassert/lexer.hpp"
#include "coverassert/rtl_ast.hpp"

namespace coverassert {
namespace {

bool is_open(const Token& t) {
  return t.kind == TokenKind::Op && (t.text == "(" || t.text == "[" || t.text == "{" ||
                                     t.text == "'{" || t.text == "[*" || t.text == "[=" ||
                                     t.text == "[->");
}

bool is_close(const Token& t) {
  return t.kind == TokenKind::Op && (t.text == ")" || t.text == "]" || t.text == "}");
}

char expected_close(const Token& open) {
  if (open.text == "(") return ')';
  if (open.text == "{" || open.text == "'{") return '}';
  return ']';
}

// Binary operators and sequence keywords that can neither start nor end an expression.
bool is_binary_only(const Token& t) {
  static constexpr std::array<std::string_view, 23> kOps = {
      "|->", "|=>", "&&", "||", "==", "!=", "===", "!==", "<=", ">=", "<",  ">",
      "=",   "*",   "/",  "%",  "**", "<<", ">>",  "?",   ":",  ",",  "<->"};
  static constexpr std::array<std::string_view, 11> kKeywords = {
      "and", "or", "intersect", "throughout", "within", "implies",
      "iff", "until", "s_until", "until_with", "s_until_with"};
  if (t.kind == TokenKind::Op) return std::find(kOps.begin(), kOps.end(), t.text) != kOps.end();
  if (t.kind == TokenKind::Keyword)
    return std::find(kKeywords.begin(), kKeywords.end(), t.text) != kKeywords.end();
  return false;
}

bool is_operator_like(const Token& t) {
  if (t.kind == TokenKind::Op) return !is_close(t) && t.text != "$";
  return is_binary_only(t);
}

class Checker {
 public:
  explicit Checker(const std::vector<Token>& toks) : toks_(toks), match_(toks.size(), 0) {}

  // Empty string on success, otherwise the reason.
  std::string run() {
    if (toks_.empty()) return "empty assertion text";
    if (auto err = balance()) return *err;

    std::size_t lo = 0, hi = toks_.size();
    // label:
    if (hi - lo >= 2 && toks_[0].kind == TokenKind::Identifier && toks_[1].is_op(":")) lo = 2;
    if (lo >= hi) return "label without assertion";

    const Token& head = toks_[lo];
    if (head.kind == TokenKind::Keyword &&
        (head.text == "assert" || head.text == "assume" || head.text == "cover" ||
         head.text == "restrict" || head.text == "expect"))
      return assertion_statement(lo + 1, hi);
    if (head.is_keyword("property") || head.is_keyword("sequence")) return declaration(lo, hi);

    if (toks_[hi - 1].is_op(";")) --hi;
    return property_expr(lo, hi);
  }

  const std::vector<std::size_t>& matches() const { return match_; }

 private:
  std::optional<std::string> balance() {
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < toks_.size(); ++i) {
      if (is_open(toks_[i])) {
        stack.push_back(i);
      } else if (is_close(toks_[i])) {
        if (stack.empty()) return "unbalanced '" + toks_[i].text + "'";
        if (expected_close(toks_[stack.back()]) != toks_[i].text[0])
          return "mismatched '" + toks_[i].text + "'";
        match_[stack.back()] = i;
        stack.pop_back();
      }
    }
    if (!stack.empty()) return "unclosed '" + toks_[stack.back()].text + "'";
    return std::nullopt;
  }

  std::string assertion_statement(std::size_t pos, std::size_t hi) {
    if (pos < hi && (toks_[pos].is_keyword("property") || toks_[pos].is_keyword("sequence") ||
                     toks_[pos].is_keyword("final")))
      ++pos;
    else if (pos + 1 < hi && toks_[pos].is_op("#"))
      pos += 2;  // assert #0 (...)
    if (pos >= hi || !toks_[pos].is_op("(")) return "expected '(' after assertion keyword";
    std::size_t close = match_[pos];
    if (auto err = property_expr(pos + 1, close); !err.empty()) return err;
    std::size_t rest = close + 1;
    if (rest == hi) return {};
    if (toks_[rest].is_op(";")) return rest + 1 == hi ? std::string{} : "tokens after ';'";
    // action block: `else $error(...);` or a pass statement
    const Token& t = toks_[rest];
    if (!(t.is_keyword("else") || t.kind == TokenKind::SystemName || t.is_keyword("begin")))
      return "unexpected '" + t.text + "' after property";
    if (!toks_[hi - 1].is_op(";") && !toks_[hi - 1].is_keyword("end"))
      return "action block is not terminated";
    return {};
  }

  std::string declaration(std::size_t lo, std::size_t hi) {
    std::string close_kw = toks_[lo].text == "property" ? "endproperty" : "endsequence";
    std::size_t end = hi;
    for (std::size_t i = lo; i < hi; ++i)
      if (toks_[i].is_keyword(close_kw)) end = i;
    if (end == hi) return "missing '" + close_kw + "'";
    std::size_t semi = lo;
    while (semi < end && !toks_[semi].is_op(";")) semi = is_open(toks_[semi]) ? match_[semi] + 1 : semi + 1;
    if (semi >= end) return "declaration header is not terminated by ';'";
    std::size_t body_hi = end;
    if (body_hi > semi + 1 && toks_[body_hi - 1].is_op(";")) --body_hi;
    return property_expr(semi + 1, body_hi);
  }

  std::string property_expr(std::size_t lo, std::size_t hi) {
    // leading clocking event and disable clause
    if (lo < hi && toks_[lo].is_op("@")) {
      ++lo;
      if (lo < hi && toks_[lo].is_op("(")) {
        lo = match_[lo] + 1;
      } else if (lo < hi && toks_[lo].kind == TokenKind::Identifier) {
        ++lo;
      } else {
        return "malformed clocking event";
      }
    }
    if (lo + 1 < hi && toks_[lo].is_keyword("disable") && toks_[lo + 1].is_keyword("iff")) {
      lo += 2;
      if (lo >= hi || !toks_[lo].is_op("(")) return "expected '(' after 'disable iff'";
      lo = match_[lo] + 1;
    }
    if (lo >= hi) return "empty property expression";
    if (is_binary_only(toks_[lo])) return "property starts with '" + toks_[lo].text + "'";
    if (is_operator_like(toks_[hi - 1]) && !toks_[hi - 1].is_op("$"))
      return "property ends with '" + toks_[hi - 1].text + "'";
    for (std::size_t i = lo; i < hi; ++i) {
      const Token& t = toks_[i];
      if (t.is_op(";")) return "';' inside property expression";
      if (t.kind == TokenKind::Keyword &&
          (t.text == "assert" || t.text == "assume" || t.text == "cover"))
        return "nested '" + t.text + "'";
      if (i + 1 < hi && is_operator_like(t) && !is_open(t) && is_binary_only(toks_[i + 1]) &&
          !toks_[i + 1].is_op(":"))
        return "operator '" + toks_[i + 1].text + "' follows '" + t.text + "'";
      if (is_open(t) && match_[i] == i + 1 && !t.is_op("(") )
        return "empty '" + t.text + "' group";
    }
    return {};
  }

  const std::vector<Token>& toks_;
  std::vector<std::size_t> match_;
};

// Identifier token indices that name declarations/labels rather than signals.
std::unordered_set<std::size_t> non_signal_identifiers(const std::vector<Token>& toks) {
  std::unordered_set<std::size_t> skip;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const Token& t = toks[i];
    if (t.kind != TokenKind::Identifier) continue;
    bool label = i + 1 < toks.size() && toks[i + 1].is_op(":") &&
                 (i == 0 || toks[i - 1].is_op(";")) && i + 2 < toks.size() &&
                 toks[i + 2].kind == TokenKind::Keyword;
    bool declared = i > 0 && (toks[i - 1].is_keyword("property") ||
                              toks[i - 1].is_keyword("sequence"));
    bool end_label = i > 1 && toks[i - 1].is_op(":") &&
                     (toks[i - 2].is_keyword("endproperty") ||
                      toks[i - 2].is_keyword("endsequence"));
    if (label || declared || end_label) skip.insert(i);
  }
  return skip;
}

bool excluded(const std::string& name, const IngestOptions& options) {
  return std::find(options.excluded_signals.begin(), options.excluded_signals.end(), name) !=
         options.excluded_signals.end();
}

std::vector<std::string> signals_in(const std::vector<Token>& toks, std::size_t lo,
                                    std::size_t hi, const std::unordered_set<std::size_t>& skip,
                                    const IngestOptions& options) {
  std::set<std::string> names;
  for (std::size_t i = lo; i < hi; ++i) {
    const Token& t = toks[i];
    if (t.kind == TokenKind::Identifier && !skip.contains(i) && !excluded(t.text, options))
      names.insert(t.text);
  }
  return {names.begin(), names.end()};
}

}  // namespace

Assertion ingest_one(const RawAssertion& raw, const IngestOptions& options) {
  Assertion a;
  a.id = raw.id;
  a.text = raw.text;
  a.origin_iteration = raw.iteration;

  LexResult lexed = lex(raw.text);
  if (lexed.failure) {
    a.syntax_ok = false;
    a.syntax_error = "tokenize failure at offset " + std::to_string(lexed.failure->offset) +
                     ": " + lexed.failure->message;
    return a;
  }
  const auto& toks = lexed.tokens;
  a.signals = signals_in(toks, 0, toks.size(), non_signal_identifiers(toks), options);
  a.syntax_error = Checker(toks).run();
  a.syntax_ok = a.syntax_error.empty();
  return a;
}

std::vector<Assertion> ingest_assertions(std::span<const RawAssertion> raw,
                                         const IngestOptions& options) {
  std::set<std::string> seen;
  std::vector<Assertion> out;
  out.reserve(raw.size());
  for (const auto& r : raw) {
    if (!seen.insert(r.id).second) throw DuplicateId(r.id);
    out.push_back(ingest_one(r, options));
  }
  return out;
}

std::size_t count_syntax_correct(std::span<const Assertion> assertions) {
  return static_cast<std::size_t>(
      std::count_if(assertions.begin(), assertions.end(), [](const auto& a) { return a.syntax_ok; }));
}

void flag_unresolved(std::span<Assertion> assertions, const AstIndex& index) {
  for (auto& a : assertions) {
    a.unresolved.clear();
    for (const auto& s : a.signals)
      if (index.find(s).empty()) a.unresolved.push_back(s);
  }
}

PropertyShape property_shape(const std::string& text, const IngestOptions& options) {
  PropertyShape shape;
  LexResult lexed = lex(text);
  if (lexed.failure) return shape;
  const auto& toks = lexed.tokens;
  auto skip = non_signal_identifiers(toks);

  // Top-level implication: the shallowest |-> / |=> wins.
  std::optional<std::size_t> split;
  int best_depth = 1 << 30;
  int depth = 0;
  std::set<std::string> ops;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const Token& t = toks[i];
    if (is_open(t)) ++depth;
    if (is_close(t)) --depth;
    if ((t.is_op("|->") || t.is_op("|=>")) && depth < best_depth) {
      best_depth = depth;
      split = i;
    }
    if (t.kind == TokenKind::SystemName) ops.insert(t.text);
    if (t.is_op("##")) ops.insert("delay");
    if (t.is_op("[*") || t.is_op("[=") || t.is_op("[->")) ops.insert("repetition");
    if (t.kind == TokenKind::Keyword &&
        (t.text == "throughout" || t.text == "within" || t.text == "intersect" ||
         t.text == "until" || t.text == "s_until" || t.text == "first_match" ||
         t.text == "s_eventually" || t.text == "nexttime"))
      ops.insert(t.text);
  }
  shape.operators.assign(ops.begin(), ops.end());
  if (split) {
    shape.implication = toks[*split].text;
    shape.antecedent = signals_in(toks, 0, *split, skip, options);
    shape.consequent = signals_in(toks, *split + 1, toks.size(), skip, options);
  } else {
    shape.consequent = signals_in(toks, 0, toks.size(), skip, options);
  }
  return shape;
}

std::vector<RawAssertion> parse_assertions_json(const nlohmann::json& doc) {
  const nlohmann::json* items = &doc;
  std::string base;
  if (doc.is_object()) {
    if (doc.contains("schema") && doc["schema"] != kAssertionsSchema)
      throw SchemaViolation("/schema", "expected \"" + std::string(kAssertionsSchema) + "\"");
    if (!doc.contains("assertions")) throw SchemaViolation("", "missing \"assertions\"");
    items = &doc["assertions"];
    base = "/assertions";
  }
  if (!items->is_array()) throw SchemaViolation(base, "expected an array of assertions");
  std::vector<RawAssertion> out;
  for (std::size_t i = 0; i < items->size(); ++i) {
    const auto& item = (*items)[i];
    std::string ptr = base + "/" + std::to_string(i);
    if (!item.is_object()) throw SchemaViolation(ptr, "expected an object");
    if (!item.contains("id") || !item["id"].is_string())
      throw SchemaViolation(ptr + "/id", "expected a string");
    if (!item.contains("text") || !item["text"].is_string())
      throw SchemaViolation(ptr + "/text", "expected a string");
    RawAssertion r{item["id"].get<std::string>(), item["text"].get<std::string>(), 0};
    if (item.contains("iteration")) {
      if (!item["iteration"].is_number_integer() || item["iteration"].get<int>() < 0)
        throw SchemaViolation(ptr + "/iteration", "expected a non-negative integer");
      r.iteration = item["iteration"].get<int>();
    }
    out.push_back(std::move(r));
  }
  return out;
}

nlohmann::json assertions_to_json(std::span<const RawAssertion> raw) {
  auto items = nlohmann::json::array();
  for (const auto& r : raw)
    items.push_back({{"id", r.id}, {"text", r.text}, {"iteration", r.iteration}});
  return {{"schema", kAssertionsSchema}, {"assertions", std::move(items)}};
}

}  // namespace coverassert
