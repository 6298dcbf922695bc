#include "adl/constraint.hpp"

#include <algorithm>
#include <charconv>

#include "adl/lexer.hpp"

namespace adl {

const char* cmp_text(CmpOp op) {
  switch (op) {
    case CmpOp::Eq: return "=";
    case CmpOp::Ne: return "!=";
    case CmpOp::Lt: return "<";
    case CmpOp::Gt: return ">";
    case CmpOp::Le: return "<=";
    case CmpOp::Ge: return ">=";
    case CmpOp::SetEq: return "==";
  }
  return "?";
}

Literal Literal::string(std::string s) {
  Literal l;
  l.kind = Kind::String;
  l.text = std::move(s);
  return l;
}

Literal Literal::integer(std::int64_t v) {
  Literal l;
  l.kind = Kind::Number;
  l.number = v;
  l.text = std::to_string(v);
  return l;
}

Literal Literal::of_date(Date d) {
  Literal l;
  l.kind = Kind::Date;
  l.date = d;
  l.text = d.literal();
  return l;
}

Value Literal::value() const {
  switch (kind) {
    case Kind::Number: return Value::integer(number);
    case Kind::Date: return Value::date(date);
    case Kind::String: return Value::string(text);
  }
  return {};
}

std::string Literal::print() const {
  if (kind != Kind::String || is_plain_word(text)) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

namespace {

template <typename T>
bool ordered(const T& a, CmpOp op, const T& b) {
  switch (op) {
    case CmpOp::Eq:
    case CmpOp::SetEq: return a == b;
    case CmpOp::Ne: return a != b;
    case CmpOp::Lt: return a < b;
    case CmpOp::Gt: return a > b;
    case CmpOp::Le: return a <= b;
    case CmpOp::Ge: return a >= b;
  }
  return false;
}

std::optional<bool> bool_word(const std::string& s) {
  auto l = to_lower(s);
  if (l == "true" || l == "yes") return true;
  if (l == "false" || l == "no") return false;
  return std::nullopt;
}

}  // namespace

bool compare_literal(const Value& v, CmpOp op, const Literal& lit) {
  switch (v.kind()) {
    case ValueKind::Unset: return false;
    case ValueKind::Integer:
      return lit.kind == Literal::Kind::Number && ordered(v.as_integer(), op, lit.number);
    case ValueKind::Date:
      return lit.kind == Literal::Kind::Date && ordered(v.as_date(), op, lit.date);
    case ValueKind::String:
      return lit.kind == Literal::Kind::String && ordered(v.as_string(), op, lit.text);
    case ValueKind::Boolean: {
      if (lit.kind != Literal::Kind::String) return false;
      auto b = bool_word(lit.text);
      if (!b || (op != CmpOp::Eq && op != CmpOp::Ne && op != CmpOp::SetEq)) return false;
      return op == CmpOp::Ne ? v.as_boolean() != *b : v.as_boolean() == *b;
    }
    case ValueKind::Set: {
      if (lit.kind != Literal::Kind::String) return false;
      const auto& s = v.as_set();
      bool member = std::binary_search(s.begin(), s.end(), lit.text);
      if (op == CmpOp::Eq) return member;
      if (op == CmpOp::Ne) return !member;
      if (op == CmpOp::SetEq) return s.size() == 1 && member;
      return false;
    }
  }
  return false;
}

ConstraintPtr Constraint::make_true() {
  static const ConstraintPtr t = std::make_shared<Constraint>();
  return t;
}

ConstraintPtr Constraint::atom(std::string attr, CmpOp op, Literal lit) {
  auto c = std::make_shared<Constraint>();
  c->kind = Kind::Atom;
  c->attr = std::move(attr);
  c->op = op;
  c->literal = std::move(lit);
  return c;
}

ConstraintPtr Constraint::make(Kind k, std::vector<ConstraintPtr> children) {
  auto c = std::make_shared<Constraint>();
  c->kind = k;
  c->children = std::move(children);
  return c;
}

bool equal(const Constraint& a, const Constraint& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == Constraint::Kind::Atom)
    return a.attr == b.attr && a.op == b.op && a.literal == b.literal;
  if (a.children.size() != b.children.size()) return false;
  for (std::size_t i = 0; i < a.children.size(); ++i)
    if (!equal(*a.children[i], *b.children[i])) return false;
  return true;
}

ConstraintPtr conjoin(ConstraintPtr a, ConstraintPtr b) {
  if (!a || a->is_true()) return b ? b : Constraint::make_true();
  if (!b || b->is_true()) return a;
  return Constraint::make(Constraint::Kind::And, {a, b});
}

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : ts_(tokenize(text)) {}

  ConstraintPtr run() {
    if (ts_.at_end()) return Constraint::make_true();
    auto e = expr();
    if (!ts_.at_end()) ts_.fail("unexpected token in constraint");
    return e;
  }

 private:
  // or-level
  ConstraintPtr expr() {
    std::vector<ConstraintPtr> parts{conj()};
    while (ts_.accept_keyword("or")) parts.push_back(conj());
    if (parts.size() == 1) return parts[0];
    return Constraint::make(Constraint::Kind::Or, std::move(parts));
  }

  ConstraintPtr conj() {
    std::vector<ConstraintPtr> parts{term()};
    while (ts_.accept_keyword("and")) parts.push_back(term());
    if (parts.size() == 1) return parts[0];
    return Constraint::make(Constraint::Kind::And, std::move(parts));
  }

  ConstraintPtr term() {
    if (ts_.accept_keyword("not")) return Constraint::make(Constraint::Kind::Not, {term()});
    if (ts_.accept_keyword("if")) {
      auto a = expr();
      ts_.expect_keyword("then");
      auto b = expr();
      return Constraint::make(Constraint::Kind::Implies, {a, b});
    }
    if (ts_.accept(Tok::LParen)) {
      auto e = expr();
      ts_.expect(Tok::RParen, "')'");
      return e;
    }
    if (ts_.accept(Tok::LBracket)) {
      auto a = atom();
      ts_.expect(Tok::RBracket, "']'");
      return a;
    }
    if (ts_.at(Tok::Ident)) return atom();
    ts_.fail("expected constraint term");
  }

  ConstraintPtr atom() {
    const Token& name = ts_.expect(Tok::Ident, "attribute name");
    std::string attr = name.text;
    CmpOp op;
    switch (ts_.peek().kind) {
      case Tok::Eq: op = CmpOp::Eq; break;
      case Tok::Ne: op = CmpOp::Ne; break;
      case Tok::Lt: op = CmpOp::Lt; break;
      case Tok::Gt: op = CmpOp::Gt; break;
      case Tok::Le: op = CmpOp::Le; break;
      case Tok::Ge: op = CmpOp::Ge; break;
      default: ts_.fail("expected comparison operator");
    }
    ts_.next();
    return Constraint::atom(std::move(attr), op, literal());
  }

  Literal literal() {
    const Token& t = ts_.peek();
    switch (t.kind) {
      case Tok::Number: {
        std::int64_t v = 0;
        std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        ts_.next();
        return Literal::integer(v);
      }
      case Tok::DateLit: {
        auto d = Date::parse(t.text);
        if (!d) ts_.fail("invalid date literal");
        ts_.next();
        return Literal::of_date(*d);
      }
      case Tok::Ident:
      case Tok::String: {
        std::string s = t.text;
        ts_.next();
        return Literal::string(std::move(s));
      }
      default: ts_.fail("expected literal");
    }
  }

  TokenStream ts_;
};

bool needs_parens(const Constraint& child) {
  return child.kind == Constraint::Kind::And || child.kind == Constraint::Kind::Or ||
         child.kind == Constraint::Kind::Implies;
}

std::string print_child(const Constraint& c) {
  auto s = print_constraint(c);
  return needs_parens(c) ? "(" + s + ")" : s;
}

}  // namespace

ConstraintPtr parse_constraint(std::string_view text) { return Parser(text).run(); }

std::string print_constraint(const Constraint& c) {
  switch (c.kind) {
    case Constraint::Kind::True: return "";
    case Constraint::Kind::Atom:
      return "[" + c.attr + cmp_text(c.op) + c.literal.print() + "]";
    case Constraint::Kind::Not: return "not " + print_child(*c.children[0]);
    case Constraint::Kind::And:
    case Constraint::Kind::Or: {
      std::string sep = c.kind == Constraint::Kind::And ? " and " : " or ";
      std::string out;
      for (std::size_t i = 0; i < c.children.size(); ++i) {
        if (i) out += sep;
        out += print_child(*c.children[i]);
      }
      return out;
    }
    case Constraint::Kind::Implies: {
      const auto& a = *c.children[0];
      const auto& b = *c.children[1];
      // The consequent extends to the end of the enclosing expression, so
      // only a nested implication in the antecedent needs parentheses.
      std::string lhs = print_constraint(a);
      if (a.kind == Constraint::Kind::Implies) lhs = "(" + lhs + ")";
      return "if " + lhs + " then " + print_constraint(b);
    }
  }
  return "";
}

bool eval_constraint(const Constraint& c, const AttributeView& view) {
  switch (c.kind) {
    case Constraint::Kind::True: return true;
    case Constraint::Kind::Atom: return compare_literal(view(c.attr), c.op, c.literal);
    case Constraint::Kind::Not: return !eval_constraint(*c.children[0], view);
    case Constraint::Kind::And:
      for (auto& ch : c.children)
        if (!eval_constraint(*ch, view)) return false;
      return true;
    case Constraint::Kind::Or:
      for (auto& ch : c.children)
        if (eval_constraint(*ch, view)) return true;
      return false;
    case Constraint::Kind::Implies:
      return !eval_constraint(*c.children[0], view) || eval_constraint(*c.children[1], view);
  }
  return false;
}

bool eval_constraint(const Constraint& c, const std::map<std::string, Value>& view) {
  return eval_constraint(c, [&](const std::string& name) {
    auto it = view.find(name);
    return it == view.end() ? Value{} : it->second;
  });
}

void collect_atoms(const Constraint& c, std::vector<const Constraint*>& out) {
  if (c.kind == Constraint::Kind::Atom) {
    out.push_back(&c);
    return;
  }
  for (auto& ch : c.children) collect_atoms(*ch, out);
}

}  // namespace adl
