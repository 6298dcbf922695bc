#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "adl/value.hpp"

namespace adl {

enum class Tok {
  Ident,      // identifiers, may contain inner dots: unix_4.3, implement.to_change
  Number,
  DateLit,    // 88_08_23
  String,     // "..." or '...'
  Binding,    // !name
  Percent,    // %name
  Flag,       // -d
  Ellipsis,   // ... (three or more dots)
  Arrow,      // ->
  Assign,     // :=
  EqEq,       // ==
  Eq,
  Ne,
  Lt,
  Gt,
  Le,
  Ge,
  LParen,
  RParen,
  LBrace,
  RBrace,
  LBracket,
  RBracket,
  Semi,
  Comma,
  Colon,
  Dot,
  Pipe,
  Backslash,
  Slash,
  At,
  Tilde,
  Star,
  StarStar,
  End,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;  // identifier/literal payload (without sigils or quotes)
  int line = 1;
  int column = 1;
  std::size_t offset = 0;
  std::size_t end_offset = 0;
  bool line_start = false;  // first token on its physical line
};

struct LexOptions {
  /// Drop integer labels at the start of a line (`1     STATE : ...`), as
  /// printed in the margins of published listings.
  bool margin_labels = false;
};

/// Error carrying a 1-based source position.
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, int line, int column)
      : Error(what + " at line " + std::to_string(line) + ", column " +
                  std::to_string(column),
              ErrorKind::Domain),
        line_(line),
        column_(column) {}
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

std::vector<Token> tokenize(std::string_view source, LexOptions options = {});

const char* tok_name(Tok t);

/// True when `text` would lex back as a single identifier token.
bool is_plain_word(std::string_view text);

/// Token cursor shared by the language parsers.
class TokenStream {
 public:
  explicit TokenStream(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  const Token& peek(std::size_t ahead = 0) const {
    std::size_t i = pos_ + ahead;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  bool at(Tok k) const { return peek().kind == k; }
  bool at_keyword(std::string_view kw, std::size_t ahead = 0) const {
    const auto& t = peek(ahead);
    return t.kind == Tok::Ident && iequals(t.text, kw);
  }
  bool at_end() const { return at(Tok::End); }
  const Token& next() {
    const Token& t = peek();
    if (pos_ < toks_.size() - 1) ++pos_;
    return t;
  }
  bool accept(Tok k) {
    if (!at(k)) return false;
    next();
    return true;
  }
  bool accept_keyword(std::string_view kw) {
    if (!at_keyword(kw)) return false;
    next();
    return true;
  }
  const Token& expect(Tok k, std::string_view what) {
    if (!at(k)) fail("expected " + std::string(what));
    return next();
  }
  void expect_keyword(std::string_view kw) {
    if (!accept_keyword(kw)) fail("expected '" + std::string(kw) + "'");
  }
  [[noreturn]] void fail(const std::string& message) const {
    const auto& t = peek();
    std::string found = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
    if (t.kind != Tok::End && t.text.empty()) found = tok_name(t.kind);
    throw SyntaxError(message + ", found " + found, t.line, t.column);
  }

  /// Last consumed token (the first token when nothing was consumed).
  const Token& prev() const { return toks_[pos_ ? pos_ - 1 : 0]; }
  /// True when the next token touches the previous one with no whitespace.
  bool adjacent() const { return pos_ > 0 && peek().offset == prev().end_offset; }

  std::size_t position() const { return pos_; }
  void reset(std::size_t p) { pos_ = p; }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace adl
