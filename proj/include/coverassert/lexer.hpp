#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace coverassert {

enum class TokenKind {
  Identifier,  // simple, escaped, hierarchical (a.b.c) or scoped (p::x)
  Keyword,
  SystemName,  // $rose, $past, ...
  Number,
  String,
  Macro,  // `NAME usage (directive lines are dropped)
  Op,
};

struct Token {
  TokenKind kind;
  std::string text;
  std::size_t begin;  // byte offsets into the source
  std::size_t end;

  bool is_op(std::string_view op) const { return kind == TokenKind::Op && text == op; }
  bool is_keyword(std::string_view kw) const { return kind == TokenKind::Keyword && text == kw; }
};

struct LexFailure {
  std::size_t offset;
  std::string message;
};

struct LexResult {
  std::vector<Token> tokens;
  std::optional<LexFailure> failure;
};

// Tokenizes Verilog/SystemVerilog text. Comments, attributes and compiler
// directive lines (`define, `include, `timescale, ...) are skipped.
LexResult lex(std::string_view source);

// Last segment of a hierarchical or scoped name ("a.b.c" -> "c").
std::string_view leaf_name(std::string_view name) noexcept;

}  // namespace coverassert
