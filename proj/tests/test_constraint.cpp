#include "doctest.h"

#include "adl/action.hpp"
#include "adl/constraint.hpp"

using namespace adl;
using K = Constraint::Kind;

namespace {

std::map<std::string, Value> view(std::initializer_list<std::pair<const char*, const char*>> kv) {
  std::map<std::string, Value> v;
  for (auto& [k, s] : kv) {
    auto d = std::string(s).find('_') != std::string::npos ? Date::parse(s) : std::nullopt;
    v[k] = d ? Value::date(*d) : Value::string(s);
  }
  return v;
}

int count_kind(const Cond& c, Cond::Kind k) {
  int n = c.kind == k;
  for (auto& ch : c.children) n += count_kind(*ch, k);
  return n;
}

}  // namespace

TEST_CASE("conjunction of three atoms") {
  auto c = parse_constraint("[recovery=Yes] and [system=unix] and [messages=English]");
  std::vector<const Constraint*> atoms;
  collect_atoms(*c, atoms);
  CHECK(c->kind == K::And);
  REQUIRE(atoms.size() == 3);
  CHECK(atoms[0]->attr == "recovery");
  CHECK(atoms[2]->literal.text == "English");
}

TEST_CASE("empty text is the constant-true constraint") {
  CHECK(parse_constraint("")->is_true());
  CHECK(parse_constraint("   ")->is_true());
}

TEST_CASE("implication keeps a disjunctive consequent") {
  auto c = parse_constraint("if [arguments=sorted] then [system=unix_4.3] or [recovery=no]");
  REQUIRE(c->kind == K::Implies);
  CHECK(c->children[0]->kind == K::Atom);
  CHECK(c->children[1]->kind == K::Or);
  CHECK(eval_constraint(*c, view({})));  // vacuous
  CHECK_FALSE(eval_constraint(*c, view({{"arguments", "sorted"}})));
  CHECK(eval_constraint(*c, view({{"arguments", "sorted"}, {"system", "unix_4.3"}})));
}

TEST_CASE("and binds tighter than or") {
  auto c = parse_constraint("[a=1] and [b=1] or [c=1]");
  REQUIRE(c->kind == K::Or);
  CHECK(c->children[0]->kind == K::And);
  auto d = parse_constraint("[a=1] or [b=1] and [c=1]");
  REQUIRE(d->kind == K::Or);
  CHECK(d->children[1]->kind == K::And);
}

TEST_CASE("unset and mismatched attributes make an atom false") {
  auto c = parse_constraint("[system!=unix]");
  CHECK_FALSE(eval_constraint(*c, view({})));
  CHECK(eval_constraint(*c, view({{"system", "VMS"}})));
  CHECK_FALSE(eval_constraint(*parse_constraint("[date>88_01_01]"), view({{"date", "late"}})));
}

TEST_CASE("date literals read year-first when the first field exceeds 31") {
  auto c = parse_constraint(
      "([reserved=Riad] or [author=Riad] or [state=official]) and [date>18_02_89]");
  CHECK(eval_constraint(*c, view({{"state", "official"}, {"date", "89_03_01"}})));
  CHECK_FALSE(eval_constraint(*c, view({{"state", "official"}, {"date", "89_02_01"}})));
  // The printer always writes year first.
  CHECK(print_constraint(*parse_constraint("[date>18_02_89]")) == "[date>89_02_18]");
}

TEST_CASE("bare atoms without brackets") {
  auto c = parse_constraint("state=official and date<88_08_23");
  CHECK(eval_constraint(*c, view({{"state", "official"}, {"date", "88_08_01"}})));
  CHECK_FALSE(eval_constraint(*c, view({{"state", "official"}, {"date", "88_09_01"}})));
}

TEST_CASE("print then parse is stable") {
  for (auto text : {"[a=1] and [b=1] or [c=1]", "not ([a=x] or [b!=y])",
                    "if [arguments=sorted] then [system=unix_4.3] or [recovery=no]",
                    "[date<=88_08_23]"}) {
    auto once = parse_constraint(text);
    auto twice = parse_constraint(print_constraint(*once));
    CHECK_MESSAGE(equal(*once, *twice), text);
  }
}

TEST_CASE("syntax errors name a position") {
  CHECK_THROWS_WITH(parse_constraint("[a=1] and"), doctest::Contains("column 10"));
  CHECK_THROWS(parse_constraint("[a=1"));
}

TEST_CASE("event texts") {
  auto del = parse_event(
      "(!cmd = remove and (!object\\comp/state = released or !object@(status= validated)))");
  CHECK(count_kind(*del, Cond::Kind::History) == 1);
  CHECK(count_kind(*del, Cond::Kind::Compare) == 2);

  auto ready = parse_event("(state := ready)");
  CHECK(ready->kind == Cond::Kind::Transition);

  auto comma = parse_event("[!cmd = delete, state = official]");
  CHECK(comma->kind == Cond::Kind::And);
  CHECK(comma->children.size() == 2);
}
