#pragma once

#include <memory>
#include <string>
#include <vector>

#include "adl/constraint.hpp"
#include "adl/lexer.hpp"

namespace adl {

struct Expr;
struct Cond;
struct Stmt;
using ExprPtr = std::shared_ptr<const Expr>;
using CondPtr = std::shared_ptr<const Cond>;
using StmtPtr = std::shared_ptr<const Stmt>;

/// Navigation step after a base expression: `\R` walks back along R to the
/// origins, `/a` and `%a` read attribute a.
struct Step {
  enum class Kind { Back, Attr };
  Kind kind;
  std::string name;
  bool operator==(const Step&) const = default;
};

struct Expr {
  enum class Kind {
    Literal,     // number, date or quoted string
    Word,        // bare identifier, bound late (parameter, attribute, role path, text)
    Binding,     // !name
    Param,       // %name
    Self,
    Wildcard,    // **
    RelPattern,  // (a|R|b)
    Collect,     // ~e
  };
  Kind kind = Kind::Word;
  Literal literal;
  std::string name;  // Word text, binding/param name, relation type of a pattern
  std::vector<Step> steps;
  ExprPtr a, b;  // pattern endpoints; Collect operand in `a`
};

struct Cond {
  enum class Kind {
    True,
    And,
    Or,
    Not,
    Compare,     // lhs op rhs
    Transition,  // name := rhs ("becomes" during this command)
    History,     // lhs@(name op rhs)
    Ref,         // named event or method (implicit event)
    Truthy,      // bare expression, e.g. !modified
  };
  Kind kind = Kind::True;
  std::vector<CondPtr> children;
  ExprPtr lhs, rhs;
  CmpOp op = CmpOp::Eq;
  std::string name;
};

/// Call argument; `flag` is non-empty for `-d value` forms.
struct Arg {
  std::string flag;
  ExprPtr value;  // may be null for a bare flag
};

struct Stmt {
  enum class Kind { Block, If, Abort, Assign, New, Call };
  Kind kind = Kind::Block;
  std::vector<StmtPtr> body;  // Block
  CondPtr cond;               // If
  StmtPtr then_branch, else_branch;
  ExprPtr target, value;      // Assign: target (= | :=) value; Abort: optional message
  bool fan_out = false;       // Assign written with :=
  std::string name;           // Call / New
  std::vector<Arg> args;
  bool parenthesized = false;  // Call written name(...)
};

std::string print_expr(const Expr& e);
std::string print_cond(const Cond& c);
std::string print_stmt(const Stmt& s);

bool equal(const Cond& a, const Cond& b);
bool equal(const Stmt& a, const Stmt& b);

/// Parser for the event/condition and action languages, usable standalone
/// or on a token stream shared with the DSL loader.
class LangParser {
 public:
  LangParser(TokenStream& ts, std::vector<std::string>& warnings)
      : ts_(ts), warnings_(warnings) {}

  CondPtr condition();
  ExprPtr expression();
  StmtPtr statement();
  /// Statements up to a closing keyword such as END (not consumed).
  StmtPtr statements_until_keyword(std::string_view keyword);

  static bool is_reserved(std::string_view word);

 private:
  CondPtr disjunction();
  CondPtr conjunction();
  CondPtr unary();
  CondPtr atom();
  bool paren_starts_pattern() const;
  ExprPtr primary();
  ExprPtr postfix(ExprPtr base);
  StmtPtr block();
  StmtPtr call_or_assign();
  std::vector<Arg> bare_args();
  bool at_statement_end() const;
  bool at_arg_start() const;
  void expect_close(Tok kind, const char* what);

  TokenStream& ts_;
  std::vector<std::string>& warnings_;
};

CondPtr parse_event(std::string_view text, std::vector<std::string>* warnings = nullptr);
StmtPtr parse_action(std::string_view text, std::vector<std::string>* warnings = nullptr);

}  // namespace adl
