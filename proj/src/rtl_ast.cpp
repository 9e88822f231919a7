#include "coverassert/rtl_ast.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

#include "coverassert/error.hpp"
#include "coverassert/lexer.hpp"

namespace coverassert {

std::string_view kind_name(NodeKind kind) noexcept {
  static constexpr std::array<std::string_view, kNodeKindCount> kNames = {
      "Module", "PortList", "Always", "Initial", "Assign",   "If",
      "Case",   "Block",    "Statement", "Expr", "Identifier",
  };
  return kNames[static_cast<std::size_t>(kind)];
}

SyntaxTree::SyntaxTree(std::string file_id, NodeKind root_kind, Span root_span,
                       std::string root_text)
    : file_id_(std::move(file_id)) {
  nodes_.push_back(SyntaxNode{root_kind, 0, std::nullopt, {}, root_span, std::move(root_text)});
}

std::uint32_t SyntaxTree::add_child(std::uint32_t parent, NodeKind kind, Span span,
                                    std::string text) {
  if (parent >= nodes_.size()) throw InvalidArgument("add_child: parent out of range");
  auto id = static_cast<std::uint32_t>(nodes_.size());
  std::uint32_t depth = nodes_[parent].depth + 1;
  nodes_.push_back(SyntaxNode{kind, depth, parent, {}, span, std::move(text)});
  nodes_[parent].children.push_back(id);
  max_depth_ = std::max(max_depth_, depth);
  return id;
}

AstIndex AstIndex::from_trees(std::vector<SyntaxTree> trees) {
  AstIndex index;
  index.trees_ = std::move(trees);
  for (std::uint32_t t = 0; t < index.trees_.size(); ++t) {
    const auto& tree = index.trees_[t];
    index.max_depth_ = std::max(index.max_depth_, tree.max_depth());
    for (std::uint32_t n = 0; n < tree.size(); ++n) {
      const auto& node = tree.node(n);
      if (node.kind != NodeKind::Identifier || node.text.empty()) continue;
      index.signal_map_[node.text].push_back({t, n});
      auto leaf = leaf_name(node.text);
      if (leaf.size() != node.text.size() && !leaf.empty())
        index.signal_map_[std::string(leaf)].push_back({t, n});
    }
  }
  return index;
}

std::span<const NodeRef> AstIndex::find(std::string_view name) const {
  auto it = signal_map_.find(name);
  if (it == signal_map_.end()) return {};
  return it->second;
}

std::vector<NodeRef> node_path(const AstIndex& index, NodeRef ref) {
  std::vector<NodeRef> path;
  const auto& tree = index.tree(ref.tree);
  std::optional<std::uint32_t> cur = ref.node;
  while (cur) {
    path.push_back({ref.tree, *cur});
    cur = tree.node(*cur).parent;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

namespace {

struct PNode {
  NodeKind kind;
  Span span;
  std::string text;
  std::vector<PNode> children;
};

// Thrown inside the expression parser; callers fall back to a generic node.
struct ExprMismatch {};

constexpr std::array<std::string_view, 13> kStatementStops = {
    "end",   "endmodule", "endcase",       "endfunction", "endtask",
    "endgenerate", "module", "begin",      "always",      "always_ff",
    "always_comb", "always_latch", "initial",
};

constexpr std::array<std::string_view, 13> kAssignOps = {
    "=", "<=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", "<<<=",
};

int binary_precedence(const Token& t) {
  if (t.kind == TokenKind::Keyword) {
    if (t.text == "iff") return 1;
    if (t.text == "inside" || t.text == "dist") return 8;
    return -1;
  }
  if (t.kind != TokenKind::Op) return -1;
  const auto& op = t.text;
  if (op == "->" || op == "<->") return 2;
  if (op == "||") return 3;
  if (op == "&&") return 4;
  if (op == "|") return 5;
  if (op == "^" || op == "^~" || op == "~^") return 6;
  if (op == "&") return 7;
  if (op == "==" || op == "!=" || op == "===" || op == "!==" || op == "==?" || op == "!=?")
    return 8;
  if (op == "<" || op == "<=" || op == ">" || op == ">=") return 9;
  if (op == "<<" || op == ">>" || op == "<<<" || op == ">>>") return 10;
  if (op == "+" || op == "-") return 11;
  if (op == "*" || op == "/" || op == "%") return 12;
  if (op == "**") return 13;
  return -1;
}

bool is_unary_op(const Token& t) {
  if (t.kind == TokenKind::Keyword)
    return t.text == "posedge" || t.text == "negedge" || t.text == "edge";
  if (t.kind != TokenKind::Op) return false;
  static constexpr std::array<std::string_view, 13> kUnary = {
      "+", "-", "!", "~", "&", "~&", "|", "~|", "^", "~^", "^~", "++", "--"};
  return std::find(kUnary.begin(), kUnary.end(), t.text) != kUnary.end();
}

bool is_opener(const Token& t) {
  return t.kind == TokenKind::Op &&
         (t.text == "(" || t.text == "[" || t.text == "{" || t.text == "'{" || t.text == "[*" ||
          t.text == "[=" || t.text == "[->");
}

bool is_closer(const Token& t) {
  return t.kind == TokenKind::Op && (t.text == ")" || t.text == "]" || t.text == "}");
}

char closer_for(const Token& t) {
  if (t.text == "(") return ')';
  if (t.text == "{" || t.text == "'{") return '}';
  return ']';
}

class Parser {
 public:
  Parser(std::string file_id, std::vector<Token> tokens, std::size_t source_size)
      : file_id_(std::move(file_id)), toks_(std::move(tokens)), source_size_(source_size) {
    match_brackets();
  }

  std::vector<PNode> parse_file() {
    std::vector<PNode> modules;
    while (pos_ < toks_.size()) {
      const auto& t = toks_[pos_];
      if (t.is_keyword("module") || t.is_keyword("macromodule")) {
        modules.push_back(parse_module());
      } else if (t.kind == TokenKind::Keyword && skip_design_unit(t.text)) {
        continue;
      } else {
        // import/typedef/etc. at compilation-unit scope
        pos_ = find_statement_end(pos_) + 1;
      }
    }
    return modules;
  }

 private:
  [[noreturn]] void fail(std::size_t tok_index, const std::string& what) const {
    std::size_t offset = tok_index < toks_.size() ? toks_[tok_index].begin : source_size_;
    throw UnparsableSource(file_id_, offset, what);
  }

  void match_brackets() {
    match_.assign(toks_.size(), 0);
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < toks_.size(); ++i) {
      if (is_opener(toks_[i])) {
        stack.push_back(i);
      } else if (is_closer(toks_[i])) {
        if (stack.empty()) fail(i, "unbalanced '" + toks_[i].text + "'");
        std::size_t open = stack.back();
        if (closer_for(toks_[open]) != toks_[i].text[0])
          fail(i, "mismatched '" + toks_[i].text + "' for '" + toks_[open].text + "'");
        stack.pop_back();
        match_[open] = i;
      }
    }
    if (!stack.empty()) fail(stack.back(), "unclosed '" + toks_[stack.back()].text + "'");
  }

  bool at_op(std::string_view op) const { return pos_ < toks_.size() && toks_[pos_].is_op(op); }
  bool at_keyword(std::string_view kw) const {
    return pos_ < toks_.size() && toks_[pos_].is_keyword(kw);
  }

  void expect_op(std::string_view op) {
    if (!at_op(op)) fail(pos_, "expected '" + std::string(op) + "'");
    ++pos_;
  }

  Span span_of(std::size_t lo, std::size_t hi_inclusive) const {
    return {toks_[lo].begin, toks_[hi_inclusive].end};
  }

  // Index of the terminating ';' of a simple statement starting at `from`.
  std::size_t find_statement_end(std::size_t from) const {
    std::size_t i = from;
    while (i < toks_.size()) {
      const auto& t = toks_[i];
      if (is_opener(t)) {
        i = match_[i] + 1;
        continue;
      }
      if (t.is_op(";")) return i;
      if (i != from && t.kind == TokenKind::Keyword &&
          std::find(kStatementStops.begin(), kStatementStops.end(), t.text) !=
              kStatementStops.end())
        fail(i, "missing ';' before '" + t.text + "'");
      ++i;
    }
    fail(from, "statement is not terminated by ';'");
  }

  // Skips a non-module design unit (package, interface, ...) if `kw` opens one.
  bool skip_design_unit(const std::string& kw) {
    static constexpr std::array<std::pair<std::string_view, std::string_view>, 7> kUnits = {{
        {"package", "endpackage"},
        {"interface", "endinterface"},
        {"program", "endprogram"},
        {"class", "endclass"},
        {"primitive", "endprimitive"},
        {"config", "endconfig"},
        {"checker", "endchecker"},
    }};
    for (auto [open, close] : kUnits) {
      if (kw != open) continue;
      std::size_t start = pos_;
      while (pos_ < toks_.size() && !toks_[pos_].is_keyword(close)) ++pos_;
      if (pos_ >= toks_.size()) fail(start, "missing '" + std::string(close) + "'");
      ++pos_;
      skip_end_label();
      return true;
    }
    return false;
  }

  void skip_end_label() {
    if (at_op(":") && pos_ + 1 < toks_.size() && toks_[pos_ + 1].kind == TokenKind::Identifier)
      pos_ += 2;
  }

  // ---- generic fallback: identifiers and bracket groups only ------------

  std::vector<PNode> generic(std::size_t lo, std::size_t hi) const {
    std::vector<PNode> out;
    for (std::size_t i = lo; i < hi;) {
      const auto& t = toks_[i];
      if (t.kind == TokenKind::Identifier) {
        out.push_back(PNode{NodeKind::Identifier, {t.begin, t.end}, t.text, {}});
        ++i;
      } else if (is_opener(t)) {
        std::size_t close = match_[i];
        out.push_back(PNode{NodeKind::Expr, span_of(i, close), {}, generic(i + 1, close)});
        i = close + 1;
      } else {
        ++i;
      }
    }
    return out;
  }

  PNode generic_node(NodeKind kind, std::size_t lo, std::size_t hi) const {
    Span span = hi > lo ? span_of(lo, hi - 1) : Span{toks_[lo].begin, toks_[lo].begin};
    return PNode{kind, span, {}, generic(lo, hi)};
  }

  // ---- expressions -------------------------------------------------------

  // Parses toks_[lo, hi) as one expression, falling back to a generic node.
  PNode expression(std::size_t lo, std::size_t hi) {
    if (lo >= hi) fail(lo, "empty expression");
    std::size_t save_pos = pos_, save_hi = hi_;
    pos_ = lo;
    hi_ = hi;
    try {
      PNode e = expr();
      if (pos_ != hi) throw ExprMismatch{};
      pos_ = save_pos;
      hi_ = save_hi;
      return e;
    } catch (const ExprMismatch&) {
      pos_ = save_pos;
      hi_ = save_hi;
      if (hi - lo == 1 && toks_[lo].kind == TokenKind::Identifier)
        return PNode{NodeKind::Identifier, span_of(lo, lo), toks_[lo].text, {}};
      return generic_node(NodeKind::Expr, lo, hi);
    }
  }

  const Token* cur() const { return pos_ < hi_ ? &toks_[pos_] : nullptr; }

  PNode expr() {
    std::size_t lo = pos_;
    PNode cond = binary(0);
    if (auto* t = cur(); t && t->is_op("?")) {
      ++pos_;
      PNode a = expr();
      auto* colon = cur();
      if (!colon || !colon->is_op(":")) throw ExprMismatch{};
      ++pos_;
      PNode b = expr();
      return PNode{NodeKind::Expr, span_of(lo, pos_ - 1), {}, {cond, a, b}};
    }
    return cond;
  }

  PNode binary(int min_prec) {
    std::size_t lo = pos_;
    PNode lhs = unary();
    while (auto* t = cur()) {
      int prec = binary_precedence(*t);
      if (prec < 0 || prec < min_prec) break;
      ++pos_;
      PNode rhs = binary(prec + 1);
      lhs = PNode{NodeKind::Expr, span_of(lo, pos_ - 1), {}, {std::move(lhs), std::move(rhs)}};
    }
    return lhs;
  }

  PNode unary() {
    auto* t = cur();
    if (!t) throw ExprMismatch{};
    if (is_unary_op(*t)) {
      std::size_t lo = pos_++;
      PNode operand = unary();
      return PNode{NodeKind::Expr, span_of(lo, pos_ - 1), {}, {std::move(operand)}};
    }
    return postfix(primary());
  }

  // Parses a bracketed group's contents with `fn`, requiring full consumption.
  template <typename Fn>
  auto within(std::size_t open, Fn&& fn) {
    std::size_t close = match_[open];
    std::size_t save_hi = hi_;
    pos_ = open + 1;
    hi_ = close;
    auto result = fn();
    if (pos_ != close) throw ExprMismatch{};
    hi_ = save_hi;
    pos_ = close + 1;
    return result;
  }

  std::vector<PNode> comma_list() {
    std::vector<PNode> items;
    while (cur()) {
      items.push_back(expr());
      if (auto* t = cur(); t && t->is_op(",")) {
        ++pos_;
        if (!cur()) throw ExprMismatch{};
      } else {
        break;
      }
    }
    return items;
  }

  PNode primary() {
    std::size_t lo = pos_;
    const Token& t = *cur();
    switch (t.kind) {
      case TokenKind::Identifier: {
        ++pos_;
        PNode id{NodeKind::Identifier, {t.begin, t.end}, t.text, {}};
        if (auto* n = cur(); n && n->is_op("(")) {
          auto args = within(pos_, [&] { return comma_list(); });
          std::vector<PNode> kids{std::move(id)};
          for (auto& a : args) kids.push_back(std::move(a));
          return PNode{NodeKind::Expr, span_of(lo, pos_ - 1), {}, std::move(kids)};
        }
        return id;
      }
      case TokenKind::SystemName:
      case TokenKind::Macro: {
        ++pos_;
        std::vector<PNode> kids;
        if (auto* n = cur(); n && n->is_op("(")) kids = within(pos_, [&] { return comma_list(); });
        return PNode{NodeKind::Expr, span_of(lo, pos_ - 1), {}, std::move(kids)};
      }
      case TokenKind::Number:
      case TokenKind::String:
        ++pos_;
        return PNode{NodeKind::Expr, {t.begin, t.end}, {}, {}};
      case TokenKind::Keyword:
        if (t.text == "begin" || t.text == "end" || t.text == "or") throw ExprMismatch{};
        ++pos_;
        return PNode{NodeKind::Expr, {t.begin, t.end}, {}, {}};
      case TokenKind::Op:
        break;
    }
    if (t.is_op("(")) return within(pos_, [&] { return expr(); });
    if (t.is_op("{")) {
      auto items = within(pos_, [&] { return concat_items(); });
      return PNode{NodeKind::Expr, span_of(lo, pos_ - 1), {}, std::move(items)};
    }
    if (t.is_op("'{")) {
      std::size_t close = match_[pos_];
      pos_ = close + 1;
      return PNode{NodeKind::Expr, span_of(lo, close), {}, generic(lo + 1, close)};
    }
    throw ExprMismatch{};
  }

  // {a, b}, {4{x}}, {<<{y}}
  std::vector<PNode> concat_items() {
    std::vector<PNode> items;
    if (auto* t = cur(); t && (t->is_op("<<") || t->is_op(">>"))) {
      ++pos_;
      if (auto* n = cur(); n && !n->is_op("{")) items.push_back(expr());
    }
    while (cur()) {
      std::size_t lo = pos_;
      PNode item = expr();
      if (auto* t = cur(); t && t->is_op("{")) {
        auto inner = within(pos_, [&] { return concat_items(); });
        std::vector<PNode> kids{std::move(item)};
        for (auto& i : inner) kids.push_back(std::move(i));
        item = PNode{NodeKind::Expr, span_of(lo, pos_ - 1), {}, std::move(kids)};
      }
      items.push_back(std::move(item));
      if (auto* t = cur(); t && t->is_op(",")) {
        ++pos_;
      } else {
        break;
      }
    }
    return items;
  }

  PNode postfix(PNode base) {
    while (auto* t = cur()) {
      std::size_t lo_begin = base.span.begin;
      if (t->is_op("[")) {
        auto idx = within(pos_, [&] {
          std::vector<PNode> parts{expr()};
          if (auto* s = cur(); s && (s->is_op(":") || s->is_op("+:") || s->is_op("-:"))) {
            ++pos_;
            parts.push_back(expr());
          }
          return parts;
        });
        std::vector<PNode> kids{std::move(base)};
        for (auto& p : idx) kids.push_back(std::move(p));
        base = PNode{NodeKind::Expr, {lo_begin, toks_[pos_ - 1].end}, {}, std::move(kids)};
      } else if (t->is_op("'") && pos_ + 1 < hi_ && toks_[pos_ + 1].is_op("(")) {
        ++pos_;
        PNode inner = within(pos_, [&] { return expr(); });
        base = PNode{NodeKind::Expr, {lo_begin, toks_[pos_ - 1].end}, {}, {std::move(base),
                                                                          std::move(inner)}};
      } else if (t->is_op("++") || t->is_op("--")) {
        ++pos_;
      } else {
        break;
      }
    }
    return base;
  }

  // Contents of @( ... ): items separated by `or` or ','.
  PNode event_list(std::size_t open) {
    std::size_t close = match_[open];
    std::size_t save_pos = pos_, save_hi = hi_;
    std::vector<PNode> items;
    pos_ = open + 1;
    hi_ = close;
    try {
      while (cur()) {
        if (cur()->is_op("*")) {
          ++pos_;
          continue;
        }
        items.push_back(expr());
        if (auto* t = cur(); t && (t->is_keyword("or") || t->is_op(","))) {
          ++pos_;
        } else if (cur()) {
          throw ExprMismatch{};
        }
      }
    } catch (const ExprMismatch&) {
      items = generic(open + 1, close);
    }
    pos_ = save_pos;
    hi_ = save_hi;
    return PNode{NodeKind::Expr, span_of(open, close), {}, std::move(items)};
  }

  // ---- statements and module items ---------------------------------------

  PNode parse_module() {
    std::size_t start = pos_++;
    if (at_keyword("static") || at_keyword("automatic")) ++pos_;
    if (pos_ >= toks_.size() || toks_[pos_].kind != TokenKind::Identifier)
      fail(pos_, "expected module name");
    PNode mod{NodeKind::Module, {}, toks_[pos_].text, {}};
    mod.children.push_back(
        PNode{NodeKind::Identifier, {toks_[pos_].begin, toks_[pos_].end}, toks_[pos_].text, {}});
    ++pos_;
    while (at_keyword("import")) {
      std::size_t end = find_statement_end(pos_);
      mod.children.push_back(generic_node(NodeKind::Statement, pos_, end + 1));
      pos_ = end + 1;
    }
    if (at_op("#")) {
      ++pos_;
      if (!at_op("(")) fail(pos_, "expected '(' after '#'");
      std::size_t close = match_[pos_];
      mod.children.push_back(generic_node(NodeKind::Statement, pos_, close + 1));
      pos_ = close + 1;
    }
    if (at_op("(")) {
      std::size_t close = match_[pos_];
      mod.children.push_back(
          PNode{NodeKind::PortList, span_of(pos_, close), {}, generic(pos_ + 1, close)});
      pos_ = close + 1;
    }
    expect_op(";");
    while (!at_keyword("endmodule")) {
      if (pos_ >= toks_.size()) fail(start, "missing 'endmodule'");
      if (auto item = statement()) mod.children.push_back(std::move(*item));
    }
    std::size_t last = pos_++;
    if (at_op(":") && pos_ + 1 < toks_.size()) {
      pos_ += 1;
      last = pos_++;
    }
    mod.span = span_of(start, last);
    return mod;
  }

  PNode required_statement(std::size_t owner) {
    if (pos_ >= toks_.size()) fail(owner, "missing statement");
    if (auto s = statement()) return std::move(*s);
    // null statement ';' becomes an empty Statement so the owner keeps its shape
    return PNode{NodeKind::Statement, {toks_[pos_ - 1].begin, toks_[pos_ - 1].end}, {}, {}};
  }

  std::optional<PNode> statement() {
    if (pos_ >= toks_.size()) fail(pos_, "unexpected end of input");
    const Token& t = toks_[pos_];
    if (t.is_op(";")) {
      ++pos_;
      return std::nullopt;
    }
    // statement label `name: stmt`
    if (t.kind == TokenKind::Identifier && pos_ + 1 < toks_.size() && toks_[pos_ + 1].is_op(":")) {
      pos_ += 2;
      return statement();
    }
    if (t.is_op("#")) {
      skip_delay();
      if (at_op(";")) {
        ++pos_;
        return std::nullopt;
      }
      return statement();
    }
    if (t.is_op("@")) {
      std::size_t lo = pos_++;
      PNode ev = event_control(lo);
      PNode body = required_statement(lo);
      return PNode{NodeKind::Statement, {toks_[lo].begin, body.span.end}, {}, {ev, body}};
    }
    if (t.kind == TokenKind::Keyword) {
      const std::string& kw = t.text;
      if (kw == "begin") return block("end");
      if (kw == "fork") return block("join");
      if (kw == "unique" || kw == "unique0" || kw == "priority") {
        ++pos_;
        return statement();
      }
      if (kw == "if") return if_statement();
      if (kw == "case" || kw == "casez" || kw == "casex" || kw == "randcase")
        return case_statement();
      if (kw == "for" || kw == "while" || kw == "repeat" || kw == "foreach")
        return loop_statement();
      if (kw == "forever") {
        std::size_t lo = pos_++;
        PNode body = required_statement(lo);
        return PNode{NodeKind::Statement, {t.begin, body.span.end}, {}, {std::move(body)}};
      }
      if (kw == "do") return do_while();
      if (kw == "assign") return assign_statement();
      if (kw == "always" || kw == "always_ff" || kw == "always_comb" || kw == "always_latch")
        return always_block();
      if (kw == "initial" || kw == "final") {
        std::size_t lo = pos_++;
        PNode body = required_statement(lo);
        return PNode{NodeKind::Initial, {t.begin, body.span.end}, {}, {std::move(body)}};
      }
      if (kw == "function") return routine("endfunction");
      if (kw == "task") return routine("endtask");
      if (kw == "generate") return container("endgenerate");
      if (auto close = block_terminator(kw)) return opaque_block(*close);
      if (kw == "else") fail(pos_, "'else' without 'if'");
    }
    return simple_statement();
  }

  static std::optional<std::string_view> block_terminator(std::string_view kw) {
    static constexpr std::array<std::pair<std::string_view, std::string_view>, 9> kBlocks = {{
        {"property", "endproperty"},
        {"sequence", "endsequence"},
        {"covergroup", "endgroup"},
        {"clocking", "endclocking"},
        {"specify", "endspecify"},
        {"class", "endclass"},
        {"interface", "endinterface"},
        {"checker", "endchecker"},
        {"table", "endtable"},
    }};
    for (auto [open, close] : kBlocks)
      if (kw == open) return close;
    return std::nullopt;
  }

  void skip_delay() {
    ++pos_;  // '#'
    if (at_op("(")) {
      pos_ = match_[pos_] + 1;
    } else if (pos_ < toks_.size()) {
      ++pos_;
    }
  }

  PNode event_control(std::size_t at_tok) {
    // pos_ is just past '@'
    if (at_op("*")) {
      ++pos_;
      return PNode{NodeKind::Expr, span_of(at_tok, pos_ - 1), {}, {}};
    }
    if (at_op("(")) {
      std::size_t open = pos_;
      pos_ = match_[open] + 1;
      PNode ev = event_list(open);
      ev.span.begin = toks_[at_tok].begin;
      return ev;
    }
    if (pos_ < toks_.size() && toks_[pos_].kind == TokenKind::Identifier) {
      const auto& id = toks_[pos_++];
      return PNode{NodeKind::Expr, span_of(at_tok, pos_ - 1), {},
                   {PNode{NodeKind::Identifier, {id.begin, id.end}, id.text, {}}}};
    }
    fail(pos_, "malformed event control");
  }

  PNode block(std::string_view end_kw) {
    std::size_t start = pos_++;
    skip_end_label();
    std::vector<PNode> items;
    auto at_end = [&] {
      if (end_kw == "join")
        return at_keyword("join") || at_keyword("join_any") || at_keyword("join_none");
      return at_keyword(end_kw);
    };
    while (!at_end()) {
      if (pos_ >= toks_.size()) fail(start, "missing '" + std::string(end_kw) + "'");
      if (auto s = statement()) items.push_back(std::move(*s));
    }
    std::size_t last = pos_++;
    if (at_op(":") && pos_ + 1 < toks_.size()) {
      ++pos_;
      last = pos_++;
    }
    return PNode{NodeKind::Block, span_of(start, last), {}, std::move(items)};
  }

  PNode container(std::string_view end_kw) {
    std::size_t start = pos_++;
    std::vector<PNode> items;
    while (!at_keyword(end_kw)) {
      if (pos_ >= toks_.size()) fail(start, "missing '" + std::string(end_kw) + "'");
      if (auto s = statement()) items.push_back(std::move(*s));
    }
    std::size_t last = pos_++;
    return PNode{NodeKind::Statement, span_of(start, last), {}, std::move(items)};
  }

  PNode opaque_block(std::string_view end_kw) {
    std::size_t start = pos_;
    std::size_t i = pos_ + 1;
    while (i < toks_.size() && !toks_[i].is_keyword(end_kw)) ++i;
    if (i >= toks_.size()) fail(start, "missing '" + std::string(end_kw) + "'");
    pos_ = i + 1;
    skip_end_label();
    return PNode{NodeKind::Statement, span_of(start, pos_ - 1), {}, generic(start + 1, i)};
  }

  PNode routine(std::string_view end_kw) {
    std::size_t start = pos_;
    std::size_t header_end = find_statement_end(pos_);
    PNode node{NodeKind::Statement, {}, {}, generic(start + 1, header_end)};
    pos_ = header_end + 1;
    while (!at_keyword(end_kw)) {
      if (pos_ >= toks_.size()) fail(start, "missing '" + std::string(end_kw) + "'");
      if (auto s = statement()) node.children.push_back(std::move(*s));
    }
    ++pos_;
    skip_end_label();
    node.span = span_of(start, pos_ - 1);
    return node;
  }

  std::size_t paren_after_keyword(std::size_t kw_index) {
    pos_ = kw_index + 1;
    if (!at_op("(")) fail(pos_, "expected '(' after '" + toks_[kw_index].text + "'");
    return pos_;
  }

  PNode if_statement() {
    std::size_t start = pos_;
    std::size_t open = paren_after_keyword(start);
    std::size_t close = match_[open];
    PNode cond = expression(open + 1, close);
    pos_ = close + 1;
    PNode node{NodeKind::If, {}, {}, {std::move(cond), required_statement(start)}};
    if (at_keyword("else")) {
      std::size_t else_tok = pos_++;
      node.children.push_back(required_statement(else_tok));
    }
    node.span = {toks_[start].begin, node.children.back().span.end};
    return node;
  }

  PNode case_statement() {
    std::size_t start = pos_;
    std::size_t open = paren_after_keyword(start);
    std::size_t close = match_[open];
    PNode node{NodeKind::Case, {}, {}, {expression(open + 1, close)}};
    pos_ = close + 1;
    if (at_keyword("inside") || at_keyword("matches")) ++pos_;
    while (!at_keyword("endcase")) {
      if (pos_ >= toks_.size()) fail(start, "missing 'endcase'");
      node.children.push_back(case_item(start));
    }
    node.span = span_of(start, pos_);
    ++pos_;
    return node;
  }

  PNode case_item(std::size_t case_tok) {
    std::size_t lo = pos_;
    PNode item{NodeKind::Statement, {}, {}, {}};
    if (at_keyword("default")) {
      ++pos_;
      if (at_op(":")) ++pos_;
    } else {
      std::size_t i = pos_;
      while (i < toks_.size() && !toks_[i].is_op(":")) {
        if (toks_[i].is_keyword("endcase") || toks_[i].is_op(";")) fail(i, "case item without ':'");
        i = is_opener(toks_[i]) ? match_[i] + 1 : i + 1;
      }
      if (i >= toks_.size()) fail(case_tok, "missing 'endcase'");
      // labels split on top-level ','
      std::size_t label_lo = pos_;
      for (std::size_t j = pos_; j <= i; ++j) {
        if (j == i || toks_[j].is_op(",")) {
          if (j > label_lo) item.children.push_back(expression(label_lo, j));
          label_lo = j + 1;
        } else if (is_opener(toks_[j])) {
          j = match_[j];
        }
      }
      pos_ = i + 1;
    }
    item.children.push_back(required_statement(lo));
    item.span = {toks_[lo].begin, item.children.back().span.end};
    return item;
  }

  PNode loop_statement() {
    std::size_t start = pos_;
    std::size_t open = paren_after_keyword(start);
    std::size_t close = match_[open];
    PNode head = toks_[start].is_keyword("for") || toks_[start].is_keyword("foreach")
                     ? PNode{NodeKind::Expr, span_of(open, close), {}, generic(open + 1, close)}
                     : expression(open + 1, close);
    pos_ = close + 1;
    PNode body = required_statement(start);
    return PNode{NodeKind::Statement, {toks_[start].begin, body.span.end}, {},
                 {std::move(head), std::move(body)}};
  }

  PNode do_while() {
    std::size_t start = pos_++;
    PNode body = required_statement(start);
    if (!at_keyword("while")) fail(pos_, "expected 'while' after do-body");
    std::size_t open = paren_after_keyword(pos_);
    std::size_t close = match_[open];
    PNode cond = expression(open + 1, close);
    pos_ = close + 1;
    expect_op(";");
    return PNode{NodeKind::Statement, span_of(start, pos_ - 1), {},
                 {std::move(body), std::move(cond)}};
  }

  // First top-level assignment operator in [lo, hi), or hi.
  std::size_t find_assign_op(std::size_t lo, std::size_t hi) const {
    for (std::size_t i = lo; i < hi;) {
      const auto& t = toks_[i];
      if (is_opener(t)) {
        i = match_[i] + 1;
        continue;
      }
      if (t.kind == TokenKind::Op &&
          std::find(kAssignOps.begin(), kAssignOps.end(), t.text) != kAssignOps.end())
        return i;
      ++i;
    }
    return hi;
  }

  PNode assign_statement() {
    std::size_t start = pos_++;
    std::size_t end = find_statement_end(pos_);
    if (at_op("(")) pos_ = match_[pos_] + 1;  // drive strength
    if (at_op("#")) skip_delay();
    PNode node{NodeKind::Assign, span_of(start, end), {}, {}};
    std::size_t lo = pos_;
    for (std::size_t j = pos_; j <= end; ++j) {
      if (j == end || toks_[j].is_op(",")) {
        std::size_t op = find_assign_op(lo, j);
        if (op == j) fail(lo, "continuous assignment without '='");
        node.children.push_back(expression(lo, op));
        node.children.push_back(expression(op + 1, j));
        lo = j + 1;
      } else if (is_opener(toks_[j])) {
        j = match_[j];
      }
    }
    pos_ = end + 1;
    return node;
  }

  PNode always_block() {
    std::size_t start = pos_++;
    PNode node{NodeKind::Always, {}, {}, {}};
    if (at_op("@")) {
      std::size_t at_tok = pos_++;
      node.children.push_back(event_control(at_tok));
    }
    node.children.push_back(required_statement(start));
    node.span = {toks_[start].begin, node.children.back().span.end};
    return node;
  }

  PNode simple_statement() {
    std::size_t start = pos_;
    std::size_t end = find_statement_end(pos_);
    pos_ = end + 1;
    std::size_t op = find_assign_op(start, end);
    if (op != end && op > start && op + 1 < end) {
      PNode lhs = expression(start, op);
      PNode rhs = expression(op + 1, end);
      return PNode{NodeKind::Statement, span_of(start, end), {}, {std::move(lhs), std::move(rhs)}};
    }
    return PNode{NodeKind::Statement, span_of(start, end), {}, generic(start, end)};
  }

  std::string file_id_;
  std::vector<Token> toks_;
  std::size_t source_size_;
  std::vector<std::size_t> match_;
  std::size_t pos_ = 0;
  std::size_t hi_ = 0;
};

void flatten(SyntaxTree& tree, std::uint32_t parent, const PNode& node) {
  std::uint32_t id = tree.add_child(parent, node.kind, node.span, node.text);
  for (const auto& child : node.children) flatten(tree, id, child);
}

SyntaxTree to_tree(const std::string& file_id, const PNode& module) {
  SyntaxTree tree(file_id, NodeKind::Module, module.span);
  tree.set_name(module.text);
  for (const auto& child : module.children) flatten(tree, 0, child);
  return tree;
}

nlohmann::json dump_node(const SyntaxTree& tree, std::uint32_t id) {
  const auto& n = tree.node(id);
  nlohmann::json j{{"kind", kind_name(n.kind)},
                   {"depth", n.depth},
                   {"span", {n.span.begin, n.span.end}}};
  if (!n.text.empty()) j["text"] = n.text;
  auto kids = nlohmann::json::array();
  for (auto c : n.children) kids.push_back(dump_node(tree, c));
  j["children"] = std::move(kids);
  return j;
}

}  // namespace

AstIndex parse_rtl(std::span<const SourceFile> sources) {
  if (sources.empty()) throw EmptyInput();
  std::vector<SyntaxTree> trees;
  for (const auto& src : sources) {
    LexResult lexed = lex(src.text);
    if (lexed.failure) throw UnparsableSource(src.file_id, lexed.failure->offset, lexed.failure->message);
    Parser parser(src.file_id, std::move(lexed.tokens), src.text.size());
    for (const auto& module : parser.parse_file()) trees.push_back(to_tree(src.file_id, module));
  }
  return AstIndex::from_trees(std::move(trees));
}

nlohmann::json dump_ast(const AstIndex& index) {
  auto trees = nlohmann::json::array();
  for (const auto& tree : index.trees()) {
    trees.push_back({{"file_id", tree.file_id()},
                     {"module", tree.name()},
                     {"max_depth", tree.max_depth()},
                     {"root", dump_node(tree, 0)}});
  }
  return {{"schema", kAstDumpSchema}, {"max_depth", index.max_depth()}, {"trees", trees}};
}

}  // namespace coverassert
