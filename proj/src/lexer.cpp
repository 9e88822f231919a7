#include "coverassert/lexer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstring>

#include "coverassert/keywords.hpp"

namespace coverassert {
namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

// Longest match first.
constexpr std::array<std::string_view, 53> kOperators = {
    "<<<=", ">>>=", "|->", "|=>", "<->", "===", "!==", "==?", "!=?", "<<<", ">>>", "<<=",
    ">>=",  "[->",  "##",  "[*",  "[=",  "->",  "<=",  ">=",  "==",  "!=",  "&&",  "||",
    "<<",   ">>",   "**",  "~&",  "~|",  "~^",  "^~",  "+=",  "-=",  "*=",  "/=",  "&=",
    "|=",   "^=",   "%=",  "++",  "--",  "+:",  "-:",  "::",  "'{",  "(",   ")",   "[",
    "]",    "{",    "}",   ";",   ",",
};

constexpr std::string_view kSingleOps = ".:?=+-*/%&|^~!<>@#'";

// Directives whose whole logical line is dropped.
constexpr std::array<std::string_view, 17> kLineDirectives = {
    "define",      "undef",  "include",   "timescale",       "ifdef",      "ifndef",
    "elsif",       "else",   "endif",     "default_nettype", "resetall",   "celldefine",
    "endcelldefine", "line", "pragma",    "begin_keywords",  "end_keywords",
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  LexResult run() {
    LexResult out;
    while (true) {
      skip_trivia();
      if (failure_) break;
      if (pos_ >= src_.size()) break;
      if (auto tok = next()) {
        out.tokens.push_back(std::move(*tok));
      } else if (failure_) {
        break;
      }
    }
    out.failure = failure_;
    return out;
  }

 private:
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  void fail(std::size_t at, std::string msg) {
    if (!failure_) failure_ = LexFailure{at, std::move(msg)};
  }

  void skip_trivia() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '/' && peek(1) == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      } else if (c == '/' && peek(1) == '*') {
        auto close = src_.find("*/", pos_ + 2);
        if (close == std::string_view::npos) {
          fail(pos_, "unterminated block comment");
          pos_ = src_.size();
          return;
        }
        pos_ = close + 2;
      } else if (c == '(' && peek(1) == '*' && peek(2) != ')' && !after_at()) {
        auto close = src_.find("*)", pos_ + 2);
        if (close == std::string_view::npos) {
          fail(pos_, "unterminated attribute");
          pos_ = src_.size();
          return;
        }
        pos_ = close + 2;
      } else {
        return;
      }
    }
  }

  // `@(*)` must not be read as an attribute opener.
  bool after_at() const {
    std::size_t i = pos_;
    while (i > 0) {
      char c = src_[i - 1];
      if (std::isspace(static_cast<unsigned char>(c))) {
        --i;
        continue;
      }
      return c == '@';
    }
    return false;
  }

  std::optional<Token> next() {
    std::size_t start = pos_;
    char c = src_[pos_];

    if (c == '`') return directive_or_macro();
    if (c == '"') return string_literal();
    if (c == '\\') return escaped_identifier();
    if (c == '$' && ident_start(peek(1))) {
      ++pos_;
      while (pos_ < src_.size() && ident_char(src_[pos_])) ++pos_;
      return Token{TokenKind::SystemName, std::string(src_.substr(start, pos_ - start)), start,
                   pos_};
    }
    if (ident_start(c)) return identifier();
    if (std::isdigit(static_cast<unsigned char>(c))) return number();
    if (c == '\'' && based_literal_follows(pos_ + 1)) return number();

    for (auto op : kOperators) {
      if (src_.substr(pos_, op.size()) == op) {
        pos_ += op.size();
        return Token{TokenKind::Op, std::string(op), start, pos_};
      }
    }
    if (kSingleOps.find(c) != std::string_view::npos || c == '$') {
      ++pos_;
      return Token{TokenKind::Op, std::string(1, c), start, pos_};
    }
    fail(start, std::string("unexpected character '") + c + "'");
    return std::nullopt;
  }

  bool based_literal_follows(std::size_t i) const {
    if (i >= src_.size()) return false;
    char c = src_[i];
    if (c == 's' || c == 'S') {
      ++i;
      if (i >= src_.size()) return false;
      c = src_[i];
    }
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (c == 'b' || c == 'o' || c == 'd' || c == 'h') return true;
    // unbased unsized: '0 '1 'x 'z
    return c == '0' || c == '1' || c == 'x' || c == 'z';
  }

  Token number() {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    // real part / exponent
    if (peek() == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
      ++pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    if (peek() == '\'' && based_literal_follows(pos_ + 1)) {
      ++pos_;
      if (peek() == 's' || peek() == 'S') ++pos_;
      ++pos_;  // base char or unsized digit
      while (pos_ < src_.size() && (std::isxdigit(static_cast<unsigned char>(src_[pos_])) ||
                                    src_[pos_] == '_' || src_[pos_] == '?' ||
                                    std::strchr("xXzZ", src_[pos_]) != nullptr))
        ++pos_;
    } else {
      // exponent, time unit suffix (10ns), etc.
      while (pos_ < src_.size() && std::isalnum(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    return Token{TokenKind::Number, std::string(src_.substr(start, pos_ - start)), start, pos_};
  }

  std::optional<Token> string_literal() {
    std::size_t start = pos_++;
    while (pos_ < src_.size() && src_[pos_] != '"') {
      if (src_[pos_] == '\\') ++pos_;
      if (src_[pos_] == '\n') break;
      ++pos_;
    }
    if (pos_ >= src_.size() || src_[pos_] != '"') {
      fail(start, "unterminated string literal");
      pos_ = src_.size();
      return std::nullopt;
    }
    ++pos_;
    return Token{TokenKind::String, std::string(src_.substr(start, pos_ - start)), start, pos_};
  }

  std::optional<Token> escaped_identifier() {
    std::size_t start = pos_++;
    while (pos_ < src_.size() && !std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    if (pos_ == start + 1) {
      fail(start, "empty escaped identifier");
      return std::nullopt;
    }
    // Name is stored without the leading backslash.
    return Token{TokenKind::Identifier, std::string(src_.substr(start + 1, pos_ - start - 1)),
                 start, pos_};
  }

  Token identifier() {
    std::size_t start = pos_;
    scan_word();
    std::string word(src_.substr(start, pos_ - start));
    if (is_sv_keyword(word)) return Token{TokenKind::Keyword, std::move(word), start, pos_};
    // Join hierarchical (a.b.c) and scoped (pkg::x) references into one token.
    while (true) {
      if (peek() == '.' && ident_start(peek(1))) {
        std::size_t save = pos_;
        ++pos_;
        std::size_t seg = pos_;
        scan_word();
        if (is_sv_keyword(src_.substr(seg, pos_ - seg))) {
          pos_ = save;
          break;
        }
      } else if (peek() == ':' && peek(1) == ':' && ident_start(peek(2))) {
        pos_ += 2;
        scan_word();
      } else {
        break;
      }
    }
    return Token{TokenKind::Identifier, std::string(src_.substr(start, pos_ - start)), start,
                 pos_};
  }

  void scan_word() {
    while (pos_ < src_.size() && ident_char(src_[pos_])) ++pos_;
  }

  std::optional<Token> directive_or_macro() {
    std::size_t start = pos_++;
    std::size_t name_begin = pos_;
    scan_word();
    std::string_view name = src_.substr(name_begin, pos_ - name_begin);
    if (name.empty()) {
      fail(start, "stray backtick");
      return std::nullopt;
    }
    if (std::find(kLineDirectives.begin(), kLineDirectives.end(), name) != kLineDirectives.end()) {
      // Drop the logical line, honouring backslash continuations.
      while (pos_ < src_.size()) {
        if (src_[pos_] == '\n') {
          std::size_t back = pos_;
          while (back > start && (src_[back - 1] == ' ' || src_[back - 1] == '\t' ||
                                  src_[back - 1] == '\r'))
            --back;
          if (back > start && src_[back - 1] == '\\') {
            ++pos_;
            continue;
          }
          break;
        }
        ++pos_;
      }
      return std::nullopt;
    }
    return Token{TokenKind::Macro, std::string(src_.substr(start, pos_ - start)), start, pos_};
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::optional<LexFailure> failure_;
};

}  // namespace

LexResult lex(std::string_view source) { return Lexer(source).run(); }

std::string_view leaf_name(std::string_view name) noexcept {
  auto dot = name.find_last_of(".:");
  return dot == std::string_view::npos ? name : name.substr(dot + 1);
}

}  // namespace coverassert
