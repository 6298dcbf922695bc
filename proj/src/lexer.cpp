#include "adl/lexer.hpp"

#include <cctype>

namespace adl {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool digit(char c) { return std::isdigit(static_cast<unsigned char>(c)); }

class Lexer {
 public:
  Lexer(std::string_view src, LexOptions opt) : src_(src), opt_(opt) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    bool line_start = true;
    while (true) {
      // whitespace and comments
      while (i_ < src_.size()) {
        char c = src_[i_];
        if (c == '\n') {
          advance();
          line_start = true;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
          advance();
        } else if (c == '-' && peek(1) == '-') {
          while (i_ < src_.size() && src_[i_] != '\n') advance();
        } else {
          break;
        }
      }
      if (i_ >= src_.size()) break;

      if (line_start && opt_.margin_labels && digit(src_[i_]) && margin_label()) {
        continue;  // label consumed, still at line start
      }

      Token t = lex_one();
      t.line_start = line_start;
      line_start = false;
      out.push_back(std::move(t));
    }
    Token end;
    end.kind = Tok::End;
    end.line = line_;
    end.column = col_;
    end.offset = end.end_offset = src_.size();
    out.push_back(end);
    return out;
  }

 private:
  char peek(std::size_t ahead = 0) const {
    return i_ + ahead < src_.size() ? src_[i_ + ahead] : '\0';
  }
  void advance() {
    if (src_[i_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++i_;
  }

  // `12   IF ...`: digits, whitespace, then something that starts a
  // statement or declaration.
  bool margin_label() {
    std::size_t j = i_;
    while (j < src_.size() && digit(src_[j])) ++j;
    if (j >= src_.size() || (src_[j] != ' ' && src_[j] != '\t')) return false;
    std::size_t k = j;
    while (k < src_.size() && (src_[k] == ' ' || src_[k] == '\t')) ++k;
    if (k >= src_.size()) return false;
    char c = src_[k];
    if (!(ident_start(c) || c == '{' || c == '!' || c == '~' || c == '[' || c == '"' ||
          c == '%'))
      return false;
    while (i_ < j) advance();
    return true;
  }

  std::string ident_from(std::size_t start) {
    while (i_ < src_.size()) {
      if (ident_char(src_[i_])) {
        advance();
      } else if (src_[i_] == '.' && ident_char(peek(1))) {
        advance();
      } else {
        break;
      }
    }
    return std::string(src_.substr(start, i_ - start));
  }

  Token lex_one() {
    Token t;
    t.line = line_;
    t.column = col_;
    t.offset = i_;
    char c = src_[i_];
    auto simple = [&](Tok k, int n) {
      t.kind = k;
      t.text = std::string(src_.substr(i_, n));
      for (int x = 0; x < n; ++x) advance();
    };

    if (ident_start(c)) {
      t.kind = Tok::Ident;
      t.text = ident_from(i_);
    } else if (digit(c)) {
      std::size_t start = i_;
      while (digit(peek())) advance();
      // date literal: d+_d+_d+
      if (peek() == '_' && digit(peek(1))) {
        std::size_t save_i = i_;
        int save_l = line_, save_c = col_;
        advance();
        while (digit(peek())) advance();
        if (peek() == '_' && digit(peek(1))) {
          advance();
          while (digit(peek())) advance();
          t.kind = Tok::DateLit;
          t.text = std::string(src_.substr(start, i_ - start));
        } else {
          i_ = save_i;
          line_ = save_l;
          col_ = save_c;
        }
      }
      if (t.kind != Tok::DateLit) {
        t.kind = Tok::Number;
        t.text = std::string(src_.substr(start, i_ - start));
      }
    } else if (c == '"' || c == '\'') {
      char quote = c;
      advance();
      std::string body;
      while (true) {
        if (i_ >= src_.size()) throw SyntaxError("unterminated string", t.line, t.column);
        char d = src_[i_];
        if (d == quote) {
          advance();
          break;
        }
        if (d == '\\' && i_ + 1 < src_.size()) {
          advance();
          char e = src_[i_];
          body += e == 'n' ? '\n' : e == 't' ? '\t' : e;
          advance();
          continue;
        }
        body += d;
        advance();
      }
      t.kind = Tok::String;
      t.text = std::move(body);
    } else if (c == '!' && ident_start(peek(1))) {
      advance();
      t.kind = Tok::Binding;
      std::size_t start = i_;
      while (ident_char(peek())) advance();
      t.text = std::string(src_.substr(start, i_ - start));
    } else if (c == '%' && ident_start(peek(1))) {
      advance();
      t.kind = Tok::Percent;
      t.text = ident_from(i_);
    } else if (c == '-' && peek(1) == '>') {
      simple(Tok::Arrow, 2);
    } else if (c == '-' && ident_start(peek(1))) {
      advance();
      t.kind = Tok::Flag;
      std::size_t start = i_;
      while (ident_char(peek())) advance();
      t.text = std::string(src_.substr(start, i_ - start));
    } else if (c == '-' && digit(peek(1))) {
      std::size_t start = i_;
      advance();
      while (digit(peek())) advance();
      t.kind = Tok::Number;
      t.text = std::string(src_.substr(start, i_ - start));
    } else if (c == '.' && peek(1) == '.' && peek(2) == '.') {
      std::size_t start = i_;
      while (peek() == '.') advance();
      t.kind = Tok::Ellipsis;
      t.text = std::string(src_.substr(start, i_ - start));
    } else if (c == ':' && peek(1) == '=') {
      simple(Tok::Assign, 2);
    } else if (c == '=' && peek(1) == '=') {
      simple(Tok::EqEq, 2);
    } else if (c == '!' && peek(1) == '=') {
      simple(Tok::Ne, 2);
    } else if (c == '<' && peek(1) == '=') {
      simple(Tok::Le, 2);
    } else if (c == '>' && peek(1) == '=') {
      simple(Tok::Ge, 2);
    } else if (c == '<' && peek(1) == '>') {
      simple(Tok::Ne, 2);
    } else if (c == '*' && peek(1) == '*') {
      simple(Tok::StarStar, 2);
    } else {
      switch (c) {
        case '=': simple(Tok::Eq, 1); break;
        case '<': simple(Tok::Lt, 1); break;
        case '>': simple(Tok::Gt, 1); break;
        case '(': simple(Tok::LParen, 1); break;
        case ')': simple(Tok::RParen, 1); break;
        case '{': simple(Tok::LBrace, 1); break;
        case '}': simple(Tok::RBrace, 1); break;
        case '[': simple(Tok::LBracket, 1); break;
        case ']': simple(Tok::RBracket, 1); break;
        case ';': simple(Tok::Semi, 1); break;
        case ',': simple(Tok::Comma, 1); break;
        case ':': simple(Tok::Colon, 1); break;
        case '.': simple(Tok::Dot, 1); break;
        case '|': simple(Tok::Pipe, 1); break;
        case '\\': simple(Tok::Backslash, 1); break;
        case '/': simple(Tok::Slash, 1); break;
        case '@': simple(Tok::At, 1); break;
        case '~': simple(Tok::Tilde, 1); break;
        case '*': simple(Tok::Star, 1); break;
        default:
          throw SyntaxError(std::string("unexpected character '") + c + "'", line_, col_);
      }
    }
    t.end_offset = i_;
    return t;
  }

  std::string_view src_;
  LexOptions opt_;
  std::size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;
};

}  // namespace

std::vector<Token> tokenize(std::string_view source, LexOptions options) {
  return Lexer(source, options).run();
}

bool is_plain_word(std::string_view text) {
  if (text.empty() || !ident_start(text[0])) return false;
  auto toks = tokenize(text);
  return toks.size() == 2 && toks[0].kind == Tok::Ident && toks[0].text == text;
}

const char* tok_name(Tok t) {
  switch (t) {
    case Tok::Ident: return "identifier";
    case Tok::Number: return "number";
    case Tok::DateLit: return "date";
    case Tok::String: return "string";
    case Tok::Binding: return "binding";
    case Tok::Percent: return "%name";
    case Tok::Flag: return "flag";
    case Tok::Ellipsis: return "...";
    case Tok::Arrow: return "->";
    case Tok::Assign: return ":=";
    case Tok::EqEq: return "==";
    case Tok::Eq: return "=";
    case Tok::Ne: return "!=";
    case Tok::Lt: return "<";
    case Tok::Gt: return ">";
    case Tok::Le: return "<=";
    case Tok::Ge: return ">=";
    case Tok::LParen: return "(";
    case Tok::RParen: return ")";
    case Tok::LBrace: return "{";
    case Tok::RBrace: return "}";
    case Tok::LBracket: return "[";
    case Tok::RBracket: return "]";
    case Tok::Semi: return ";";
    case Tok::Comma: return ",";
    case Tok::Colon: return ":";
    case Tok::Dot: return ".";
    case Tok::Pipe: return "|";
    case Tok::Backslash: return "\\";
    case Tok::Slash: return "/";
    case Tok::At: return "@";
    case Tok::Tilde: return "~";
    case Tok::Star: return "*";
    case Tok::StarStar: return "**";
    case Tok::End: return "end of input";
  }
  return "?";
}

}  // namespace adl
