#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "adl/value.hpp"

namespace adl {

enum class CmpOp { Eq, Ne, Lt, Gt, Le, Ge, SetEq };

const char* cmp_text(CmpOp op);

/// A typed literal as written in source: number, date or bare/quoted text.
struct Literal {
  enum class Kind { String, Number, Date };
  Kind kind = Kind::String;
  std::string text;  // canonical source text (unquoted for strings)
  std::int64_t number = 0;
  Date date;

  static Literal string(std::string s);
  static Literal integer(std::int64_t v);
  static Literal of_date(Date d);

  Value value() const;
  std::string print() const;
  bool operator==(const Literal& o) const {
    return kind == o.kind && text == o.text;
  }
};

/// Compares an attribute value with a literal. Unset values and mismatched
/// kinds compare false; sets support `=` (membership) and `!=`.
bool compare_literal(const Value& v, CmpOp op, const Literal& lit);

struct Constraint;
using ConstraintPtr = std::shared_ptr<const Constraint>;

struct Constraint {
  enum class Kind { True, Atom, And, Or, Not, Implies };
  Kind kind = Kind::True;
  std::string attr;
  CmpOp op = CmpOp::Eq;
  Literal literal;
  std::vector<ConstraintPtr> children;  // Implies: {antecedent, consequent}

  static ConstraintPtr make_true();
  static ConstraintPtr atom(std::string attr, CmpOp op, Literal lit);
  static ConstraintPtr make(Kind k, std::vector<ConstraintPtr> children);

  bool is_true() const { return kind == Kind::True; }
};

bool equal(const Constraint& a, const Constraint& b);

ConstraintPtr parse_constraint(std::string_view text);
std::string print_constraint(const Constraint& c);

using AttributeView = std::function<Value(const std::string&)>;

bool eval_constraint(const Constraint& c, const AttributeView& view);
bool eval_constraint(const Constraint& c, const std::map<std::string, Value>& view);

/// Atoms in left-to-right order (duplicates kept).
void collect_atoms(const Constraint& c, std::vector<const Constraint*>& out);

/// Builds `a and b`, dropping constant-true operands.
ConstraintPtr conjoin(ConstraintPtr a, ConstraintPtr b);

}  // namespace adl
