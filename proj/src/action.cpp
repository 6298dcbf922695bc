#include "adl/action.hpp"

#include <array>
#include <charconv>

namespace adl {

namespace {

constexpr std::array kReserved = {
    "END",        "ELSE",         "THEN",      "ON",        "PRE",       "POST",
    "AFTER",      "ERROR",        "GLOBAL",    "LOCAL",     "ORIGIN",    "DEST",
    "METHOD",     "EVENT",        "ROLE",      "ATTRIBUTE", "DEFATTRIBUTE",
    "DEFEVENT",   "OBJECT",       "TYPEOBJET", "TYPEOBJECT", "RELTYPE",  "RELATION",
    "TYPERELATION", "PROCESS",    "TYPEPROCESS", "CONNECTION", "TYPECONNECTION",
    "CONNECT",    "DOMAIN",       "CARD",      "PRIORITY",  "PARTITION", "DO",
};

std::optional<CmpOp> cmp_of(Tok t) {
  switch (t) {
    case Tok::Eq: return CmpOp::Eq;
    case Tok::Ne: return CmpOp::Ne;
    case Tok::Lt: return CmpOp::Lt;
    case Tok::Gt: return CmpOp::Gt;
    case Tok::Le: return CmpOp::Le;
    case Tok::Ge: return CmpOp::Ge;
    case Tok::EqEq: return CmpOp::SetEq;
    default: return std::nullopt;
  }
}

std::shared_ptr<Expr> make_expr(Expr::Kind k, std::string name = {}) {
  auto e = std::make_shared<Expr>();
  e->kind = k;
  e->name = std::move(name);
  return e;
}

std::shared_ptr<Cond> make_cond(Cond::Kind k) {
  auto c = std::make_shared<Cond>();
  c->kind = k;
  return c;
}

}  // namespace

bool LangParser::is_reserved(std::string_view word) {
  for (auto* kw : kReserved)
    if (iequals(word, kw)) return true;
  return false;
}

// ---- conditions ---------------------------------------------------------

CondPtr LangParser::condition() { return disjunction(); }

CondPtr LangParser::disjunction() {
  std::vector<CondPtr> parts{conjunction()};
  while (ts_.accept_keyword("or")) parts.push_back(conjunction());
  if (parts.size() == 1) return parts[0];
  auto c = make_cond(Cond::Kind::Or);
  c->children = std::move(parts);
  return c;
}

CondPtr LangParser::conjunction() {
  std::vector<CondPtr> parts{unary()};
  while (ts_.accept_keyword("and")) parts.push_back(unary());
  if (parts.size() == 1) return parts[0];
  auto c = make_cond(Cond::Kind::And);
  c->children = std::move(parts);
  return c;
}

void LangParser::expect_close(Tok kind, const char* what) {
  if (ts_.accept(kind)) return;
  const Token& t = ts_.peek();
  bool closing_context = t.kind == Tok::End || t.kind == Tok::Semi ||
                         ts_.at_keyword("then") || ts_.at_keyword("do") ||
                         ts_.at_keyword("priority");
  if (!closing_context) ts_.fail(std::string("expected '") + what + "'");
  warnings_.push_back("line " + std::to_string(t.line) + ": missing '" + what +
                      "' inserted");
}

CondPtr LangParser::unary() {
  if (ts_.accept_keyword("not")) {
    auto c = make_cond(Cond::Kind::Not);
    c->children.push_back(unary());
    return c;
  }
  if (ts_.accept(Tok::LBracket)) {
    std::vector<CondPtr> parts{disjunction()};
    while (ts_.accept(Tok::Comma)) parts.push_back(disjunction());
    expect_close(Tok::RBracket, "]");
    if (parts.size() == 1) return parts[0];
    auto c = make_cond(Cond::Kind::And);
    c->children = std::move(parts);
    return c;
  }
  if (ts_.at(Tok::LParen) && !paren_starts_pattern()) {
    ts_.next();
    auto inner = disjunction();
    expect_close(Tok::RParen, ")");
    return inner;
  }
  return atom();
}

bool LangParser::paren_starts_pattern() const {
  int depth = 0;
  for (std::size_t i = 0;; ++i) {
    const Token& t = ts_.peek(i);
    if (t.kind == Tok::End || t.kind == Tok::Semi) return false;
    if (t.kind == Tok::LParen) ++depth;
    if (t.kind == Tok::RParen && --depth == 0) return false;
    if (t.kind == Tok::Pipe && depth == 1) return true;
  }
}

CondPtr LangParser::atom() {
  auto lhs = expression();
  if (ts_.accept(Tok::At)) {
    ts_.expect(Tok::LParen, "'('");
    auto c = make_cond(Cond::Kind::History);
    c->lhs = lhs;
    c->name = ts_.expect(Tok::Ident, "attribute name").text;
    auto op = cmp_of(ts_.peek().kind);
    if (!op) ts_.fail("expected comparison operator");
    ts_.next();
    c->op = *op;
    c->rhs = expression();
    expect_close(Tok::RParen, ")");
    return c;
  }
  if (auto op = cmp_of(ts_.peek().kind)) {
    ts_.next();
    auto c = make_cond(Cond::Kind::Compare);
    c->lhs = lhs;
    c->op = *op;
    c->rhs = expression();
    return c;
  }
  if (ts_.at(Tok::Assign)) {
    if (lhs->kind != Expr::Kind::Word || !lhs->steps.empty())
      ts_.fail("transition needs an attribute name");
    ts_.next();
    auto c = make_cond(Cond::Kind::Transition);
    c->name = lhs->name;
    c->rhs = expression();
    return c;
  }
  if (lhs->kind == Expr::Kind::Word && lhs->steps.empty()) {
    auto c = make_cond(Cond::Kind::Ref);
    c->name = lhs->name;
    return c;
  }
  auto c = make_cond(Cond::Kind::Truthy);
  c->lhs = lhs;
  return c;
}

// ---- expressions --------------------------------------------------------

ExprPtr LangParser::expression() {
  if (ts_.accept(Tok::Tilde)) {
    auto e = make_expr(Expr::Kind::Collect);
    e->a = expression();
    return e;
  }
  return postfix(primary());
}

ExprPtr LangParser::primary() {
  const Token& t = ts_.peek();
  switch (t.kind) {
    case Tok::Binding: {
      ts_.next();
      return make_expr(Expr::Kind::Binding, t.text);
    }
    case Tok::Percent: {
      ts_.next();
      return make_expr(Expr::Kind::Param, t.text);
    }
    case Tok::StarStar: ts_.next(); return make_expr(Expr::Kind::Wildcard);
    case Tok::Number: {
      auto e = make_expr(Expr::Kind::Literal);
      std::int64_t v = 0;
      std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
      e->literal = Literal::integer(v);
      ts_.next();
      return e;
    }
    case Tok::DateLit: {
      auto d = Date::parse(t.text);
      if (!d) ts_.fail("invalid date literal");
      auto e = make_expr(Expr::Kind::Literal);
      e->literal = Literal::of_date(*d);
      ts_.next();
      return e;
    }
    case Tok::String: {
      auto e = make_expr(Expr::Kind::Literal);
      e->literal = Literal::string(t.text);
      ts_.next();
      return e;
    }
    case Tok::Ident: {
      if (iequals(t.text, "self")) {
        ts_.next();
        return make_expr(Expr::Kind::Self);
      }
      std::string text = t.text;
      ts_.next();
      // role path: implement.to_change.%name.state
      while (ts_.at(Tok::Dot) && ts_.adjacent() && ts_.peek(1).kind == Tok::Percent) {
        ts_.next();
        text += ".%" + ts_.next().text;
        if (ts_.at(Tok::Dot) && ts_.adjacent() && ts_.peek(1).kind == Tok::Ident) {
          ts_.next();
          text += "." + ts_.next().text;
        }
      }
      return make_expr(Expr::Kind::Word, std::move(text));
    }
    case Tok::LParen: {
      ts_.next();
      if (!ts_.at(Tok::RParen)) {
        auto first = ts_.at(Tok::StarStar) ? (ts_.next(), make_expr(Expr::Kind::Wildcard))
                                          : postfix(primary());
        if (ts_.accept(Tok::Pipe)) {
          auto e = make_expr(Expr::Kind::RelPattern);
          e->a = first;
          e->name = ts_.expect(Tok::Ident, "relation type").text;
          ts_.expect(Tok::Pipe, "'|'");
          e->b = postfix(primary());
          expect_close(Tok::RParen, ")");
          return e;
        }
        expect_close(Tok::RParen, ")");
        return first;
      }
      ts_.fail("empty parentheses");
    }
    default: ts_.fail("expected expression");
  }
}

ExprPtr LangParser::postfix(ExprPtr base) {
  std::shared_ptr<Expr> e;
  auto own = [&] {
    if (!e) e = std::make_shared<Expr>(*base);
    return e;
  };
  while (true) {
    if (ts_.at(Tok::Backslash) && ts_.peek(1).kind == Tok::Ident) {
      ts_.next();
      own()->steps.push_back({Step::Kind::Back, ts_.next().text});
    } else if (ts_.at(Tok::Slash) && ts_.peek(1).kind == Tok::Ident) {
      ts_.next();
      own()->steps.push_back({Step::Kind::Attr, ts_.next().text});
    } else if (ts_.at(Tok::Percent) && ts_.adjacent()) {
      own()->steps.push_back({Step::Kind::Attr, ts_.next().text});
    } else {
      break;
    }
  }
  return e ? ExprPtr(e) : base;
}

// ---- statements ---------------------------------------------------------

bool LangParser::at_statement_end() const {
  const Token& t = ts_.peek();
  if (t.kind == Tok::Semi || t.kind == Tok::RBrace || t.kind == Tok::End) return true;
  return t.kind == Tok::Ident && is_reserved(t.text);
}

bool LangParser::at_arg_start() const {
  const Token& t = ts_.peek();
  switch (t.kind) {
    case Tok::Ident: return !is_reserved(t.text);
    case Tok::String:
    case Tok::Number:
    case Tok::DateLit:
    case Tok::Binding:
    case Tok::Percent:
    case Tok::Tilde:
    case Tok::StarStar:
    case Tok::LParen: return true;
    default: return false;
  }
}

StmtPtr LangParser::block() {
  ts_.expect(Tok::LBrace, "'{'");
  auto b = std::make_shared<Stmt>();
  b->kind = Stmt::Kind::Block;
  while (true) {
    while (ts_.accept(Tok::Semi)) {
    }
    if (ts_.accept(Tok::RBrace)) break;
    if (ts_.at_end()) ts_.fail("expected '}'");
    b->body.push_back(statement());
    if (!ts_.at(Tok::RBrace) && !ts_.at(Tok::Semi)) ts_.fail("expected ';' or '}'");
  }
  return b;
}

StmtPtr LangParser::statement() {
  if (ts_.at(Tok::LBrace)) return block();
  if (ts_.accept(Tok::Ellipsis)) {
    auto s = std::make_shared<Stmt>();
    s->kind = Stmt::Kind::Block;
    return s;
  }
  if (ts_.accept_keyword("if")) {
    auto s = std::make_shared<Stmt>();
    s->kind = Stmt::Kind::If;
    s->cond = condition();
    ts_.expect_keyword("then");
    s->then_branch = statement();
    if (ts_.accept_keyword("else")) s->else_branch = statement();
    return s;
  }
  if (ts_.accept_keyword("abort")) {
    auto s = std::make_shared<Stmt>();
    s->kind = Stmt::Kind::Abort;
    if (ts_.at(Tok::String)) s->value = expression();
    return s;
  }
  if (ts_.at_keyword("new") && ts_.peek(1).kind == Tok::Ident) {
    ts_.next();
    auto s = std::make_shared<Stmt>();
    s->kind = Stmt::Kind::New;
    s->name = ts_.next().text;
    return s;
  }
  return call_or_assign();
}

StmtPtr LangParser::call_or_assign() {
  std::size_t save = ts_.position();
  const Token& first = ts_.peek();
  if (first.kind == Tok::Ident || first.kind == Tok::Binding || first.kind == Tok::Percent ||
      first.kind == Tok::Tilde || first.kind == Tok::LParen) {
    bool try_assign = true;
    if (first.kind == Tok::LParen) try_assign = paren_starts_pattern();
    if (try_assign) {
      auto target = expression();
      if (ts_.at(Tok::Eq) || ts_.at(Tok::Assign)) {
        auto s = std::make_shared<Stmt>();
        s->kind = Stmt::Kind::Assign;
        s->fan_out = ts_.next().kind == Tok::Assign;
        s->target = target;
        s->value = expression();
        return s;
      }
      ts_.reset(save);
    }
  }
  if (!ts_.at(Tok::Ident) || is_reserved(ts_.peek().text)) ts_.fail("expected statement");
  auto s = std::make_shared<Stmt>();
  s->kind = Stmt::Kind::Call;
  s->name = ts_.next().text;
  if (ts_.at(Tok::LParen) && !paren_starts_pattern()) {
    ts_.next();
    s->parenthesized = true;
    if (!ts_.at(Tok::RParen)) {
      do {
        Arg a;
        if (ts_.at(Tok::Flag)) {
          a.flag = ts_.next().text;
          if (at_arg_start()) a.value = expression();
        } else {
          a.value = expression();
        }
        s->args.push_back(std::move(a));
      } while (ts_.accept(Tok::Comma));
    }
    expect_close(Tok::RParen, ")");
    return s;
  }
  s->args = bare_args();
  return s;
}

std::vector<Arg> LangParser::bare_args() {
  std::vector<Arg> out;
  while (!at_statement_end()) {
    if (ts_.at(Tok::Flag)) {
      Arg a;
      a.flag = ts_.next().text;
      if (at_arg_start()) a.value = expression();
      out.push_back(std::move(a));
    } else if (ts_.accept(Tok::Ellipsis)) {
    } else if (ts_.at(Tok::RParen)) {
      warnings_.push_back("line " + std::to_string(ts_.peek().line) +
                          ": unmatched ')' ignored");
      ts_.next();
    } else if (at_arg_start()) {
      out.push_back(Arg{{}, expression()});
    } else {
      break;
    }
  }
  return out;
}

StmtPtr LangParser::statements_until_keyword(std::string_view keyword) {
  auto b = std::make_shared<Stmt>();
  b->kind = Stmt::Kind::Block;
  while (true) {
    while (ts_.accept(Tok::Semi)) {
    }
    if (ts_.at_keyword(keyword) || ts_.at_end()) break;
    b->body.push_back(statement());
  }
  return b;
}

// ---- printing -----------------------------------------------------------

std::string print_expr(const Expr& e) {
  std::string out;
  switch (e.kind) {
    case Expr::Kind::Literal:
      if (e.literal.kind == Literal::Kind::String) {
        out = "\"";
        for (char c : e.literal.text) {
          if (c == '"' || c == '\\') out += '\\';
          out += c;
        }
        out += "\"";
      } else {
        out = e.literal.text;
      }
      break;
    case Expr::Kind::Word: out = e.name; break;
    case Expr::Kind::Binding: out = "!" + e.name; break;
    case Expr::Kind::Param: out = "%" + e.name; break;
    case Expr::Kind::Self: out = "self"; break;
    case Expr::Kind::Wildcard: out = "**"; break;
    case Expr::Kind::RelPattern:
      out = "(" + print_expr(*e.a) + "|" + e.name + "|" + print_expr(*e.b) + ")";
      break;
    case Expr::Kind::Collect: return "~" + print_expr(*e.a);
  }
  for (auto& s : e.steps) out += (s.kind == Step::Kind::Back ? "\\" : "%") + s.name;
  return out;
}

namespace {

std::string cond_child(const Cond& c) {
  auto s = print_cond(c);
  if (c.kind == Cond::Kind::And || c.kind == Cond::Kind::Or) return "(" + s + ")";
  return s;
}

}  // namespace

std::string print_cond(const Cond& c) {
  switch (c.kind) {
    case Cond::Kind::True: return "true";
    case Cond::Kind::And:
    case Cond::Kind::Or: {
      std::string sep = c.kind == Cond::Kind::And ? " and " : " or ";
      std::string out;
      for (std::size_t i = 0; i < c.children.size(); ++i) {
        if (i) out += sep;
        out += cond_child(*c.children[i]);
      }
      return out;
    }
    case Cond::Kind::Not: return "not " + cond_child(*c.children[0]);
    case Cond::Kind::Compare:
      return print_expr(*c.lhs) + " " + cmp_text(c.op) + " " + print_expr(*c.rhs);
    case Cond::Kind::Transition: return "(" + c.name + " := " + print_expr(*c.rhs) + ")";
    case Cond::Kind::History:
      return print_expr(*c.lhs) + "@(" + c.name + cmp_text(c.op) + print_expr(*c.rhs) + ")";
    case Cond::Kind::Ref: return c.name;
    case Cond::Kind::Truthy: return print_expr(*c.lhs);
  }
  return "";
}

std::string print_stmt(const Stmt& s) {
  switch (s.kind) {
    case Stmt::Kind::Block: {
      if (s.body.empty()) return "{ }";
      std::string out = "{ ";
      for (std::size_t i = 0; i < s.body.size(); ++i) {
        if (i) out += "; ";
        out += print_stmt(*s.body[i]);
      }
      return out + " }";
    }
    case Stmt::Kind::If: {
      std::string out = "IF " + print_cond(*s.cond) + " THEN " + print_stmt(*s.then_branch);
      if (s.else_branch) out += " ELSE " + print_stmt(*s.else_branch);
      return out;
    }
    case Stmt::Kind::Abort: return s.value ? "ABORT " + print_expr(*s.value) : "ABORT";
    case Stmt::Kind::Assign:
      return print_expr(*s.target) + (s.fan_out ? " := " : " = ") + print_expr(*s.value);
    case Stmt::Kind::New: return "new " + s.name;
    case Stmt::Kind::Call: {
      std::string out = s.name;
      if (s.parenthesized) out += "(";
      for (std::size_t i = 0; i < s.args.size(); ++i) {
        const auto& a = s.args[i];
        out += s.parenthesized ? (i ? ", " : "") : " ";
        if (!a.flag.empty()) {
          out += "-" + a.flag;
          if (a.value) out += " ";
        }
        if (a.value) out += print_expr(*a.value);
      }
      if (s.parenthesized) out += ")";
      return out;
    }
  }
  return "";
}

namespace {

bool equal_expr(const ExprPtr& a, const ExprPtr& b) {
  if (!a || !b) return !a && !b;
  if (a->kind != b->kind || a->name != b->name || !(a->steps == b->steps)) return false;
  if (a->kind == Expr::Kind::Literal && !(a->literal == b->literal)) return false;
  return equal_expr(a->a, b->a) && equal_expr(a->b, b->b);
}

}  // namespace

bool equal(const Cond& a, const Cond& b) {
  if (a.kind != b.kind || a.name != b.name || a.op != b.op) return false;
  if (!equal_expr(a.lhs, b.lhs) || !equal_expr(a.rhs, b.rhs)) return false;
  if (a.children.size() != b.children.size()) return false;
  for (std::size_t i = 0; i < a.children.size(); ++i)
    if (!equal(*a.children[i], *b.children[i])) return false;
  return true;
}

bool equal(const Stmt& a, const Stmt& b) {
  auto same = [](const StmtPtr& x, const StmtPtr& y) {
    if (!x || !y) return !x && !y;
    return equal(*x, *y);
  };
  if (a.kind != b.kind || a.name != b.name || a.fan_out != b.fan_out ||
      a.parenthesized != b.parenthesized)
    return false;
  if (!equal_expr(a.target, b.target) || !equal_expr(a.value, b.value)) return false;
  if ((a.cond == nullptr) != (b.cond == nullptr) || (a.cond && !equal(*a.cond, *b.cond)))
    return false;
  if (!same(a.then_branch, b.then_branch) || !same(a.else_branch, b.else_branch)) return false;
  if (a.body.size() != b.body.size() || a.args.size() != b.args.size()) return false;
  for (std::size_t i = 0; i < a.body.size(); ++i)
    if (!equal(*a.body[i], *b.body[i])) return false;
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (a.args[i].flag != b.args[i].flag || !equal_expr(a.args[i].value, b.args[i].value))
      return false;
  return true;
}

CondPtr parse_event(std::string_view text, std::vector<std::string>* warnings) {
  std::vector<std::string> local;
  TokenStream ts(tokenize(text));
  LangParser p(ts, warnings ? *warnings : local);
  auto c = p.condition();
  ts.accept(Tok::Semi);
  if (!ts.at_end()) ts.fail("unexpected token after event expression");
  return c;
}

StmtPtr parse_action(std::string_view text, std::vector<std::string>* warnings) {
  std::vector<std::string> local;
  TokenStream ts(tokenize(text));
  LangParser p(ts, warnings ? *warnings : local);
  auto b = std::make_shared<Stmt>();
  b->kind = Stmt::Kind::Block;
  while (true) {
    while (ts.accept(Tok::Semi)) {
    }
    if (ts.at_end()) break;
    b->body.push_back(p.statement());
    if (!ts.at_end() && !ts.at(Tok::Semi)) ts.fail("expected ';'");
  }
  if (b->body.size() == 1) return b->body[0];
  return b;
}

}  // namespace adl
