#include "doctest.h"

#include <algorithm>
#include <deque>

#include "adl/builder.hpp"
#include "pm_oracle.hpp"

using namespace adl;

namespace {

using Reals = std::vector<std::pair<std::string, std::string>>;

// Family F with interface I and the given realizations of I.
struct Pm {
  Engine e;
  explicit Pm(const Reals& reals,
              const std::string& iface_constraint = "") {
    e.load(oracle::kVariantSchema);
    e.create_object("F", "family");
    e.create_object("I", "interface");
    e.create_relation("F", "contains", "I");
    if (!iface_constraint.empty()) e.set_attribute("I", "constraints", iface_constraint);
    for (auto& [name, attrs] : reals) {
      e.create_object(name, "variant");
      e.create_relation("I", "is_realized", name);
      // attrs: "a=v,b=w"
      std::size_t p = 0;
      while (p < attrs.size()) {
        auto comma = attrs.find(',', p);
        std::string kv = attrs.substr(p, comma == std::string::npos ? std::string::npos : comma - p);
        auto eq = kv.find('=');
        e.set_attribute(name, kv.substr(0, eq), kv.substr(eq + 1));
        if (comma == std::string::npos) break;
        p = comma + 1;
      }
    }
  }
  ProductModel pm() const { return ProductModel::from_store(e); }
};

}  // namespace

TEST_CASE("a single realization is forced") {
  Pm p(Reals{{"R", ""}});
  auto sm = build_system_model(p.pm(), "I", nullptr);
  CHECK(sm.nodes() == std::vector<std::string>{"I", "R"});
  CHECK(check_model_consistency(p.pm(), sm).empty());
  CHECK(component_listing(p.pm(), sm) == std::vector<std::string>{"F/I/R"});
}

TEST_CASE("global constraint picks the unix realization") {
  Pm p(Reals{{"R1", "system=unix"}, {"R2", "system=VMS"}});
  auto sm = build_system_model(p.pm(), "I", parse_constraint("[system=unix]"));
  CHECK(sm.realization.at("I") == "R1");
  sm = build_system_model(p.pm(), "I", parse_constraint("[system=VMS]"));
  CHECK(sm.realization.at("I") == "R2");
  CHECK_THROWS_WITH(build_system_model(p.pm(), "I", parse_constraint("[system=amiga]")),
                    doctest::Contains("rule 2"));
}

TEST_CASE("ancestor implication prunes a descendant") {
  Pm p(Reals{{"R1", "arguments=sorted,system=VMS,recovery=yes"},
        {"R2", "arguments=sorted,system=VMS,recovery=no"}},
       "if [arguments=sorted] then [system=unix_4.3] or [recovery=no]");
  auto sm = build_system_model(p.pm(), "I", nullptr);
  CHECK(sm.realization.at("I") == "R2");
  // Hand-built model with the rejected realization names the ancestor.
  SystemModel bad = sm;
  bad.realization["I"] = "R1";
  auto v = check_model_consistency(p.pm(), bad);
  REQUIRE(v.size() == 1);
  CHECK(v[0].rule == 3);
  CHECK(v[0].node == "R1");
  CHECK(v[0].detail.find("ancestor I") == 0);
}

TEST_CASE("two interfaces of one family break rule 1") {
  Pm p(Reals{{"R1", ""}});
  p.e.create_object("J", "interface");
  p.e.create_relation("F", "contains", "J");
  p.e.create_object("S", "variant");
  p.e.create_relation("J", "is_realized", "S");
  p.e.create_relation("R1", "depends_on", "J");
  auto pm = p.pm();
  CHECK_THROWS_WITH(build_system_model(pm, "I", nullptr), doctest::Contains("rule 1"));
  SystemModel sm{"I", nullptr, {"I", "J"}, {{"I", "R1"}, {"J", "S"}}};
  auto v = check_model_consistency(pm, sm);
  REQUIRE(v.size() == 1);
  CHECK(v[0].rule == 1);
  CHECK(v[0].node == "F");
}

TEST_CASE("builder agrees with exhaustive enumeration") {
  std::mt19937 rng(7);
  int solvable = 0;
  for (int round = 0; round < 60; ++round) {
    auto m = oracle::generate(rng);
    Engine e;
    e.load(oracle::kVariantSchema);
    oracle::install(e, m);
    auto pm = ProductModel::from_store(e);
    auto expected = oracle::solutions(m);
    ConstraintPtr where = m.where.empty() ? nullptr : parse_constraint(m.where);
    INFO("round " << round << " root " << m.root << " where " << m.where);
    if (expected.empty()) {
      CHECK_THROWS(build_system_model(pm, m.root, where));
      continue;
    }
    ++solvable;
    auto sm = build_system_model(pm, m.root, where);
    CHECK(check_model_consistency(pm, sm).empty());
    CHECK(std::find(expected.begin(), expected.end(), sm.realization) != expected.end());
    // determinism
    CHECK(build_system_model(pm, m.root, where) == sm);
  }
  CHECK(solvable > 10);
}

TEST_CASE("filter-then-max picks the latest matching revision") {
  Pm p(Reals{{"R", "system=unix"}});
  int day = 1;
  p.e.set_clock([&] { return Date::from_civil(1988, 8, day); });
  for (int n = 1; n <= 8; ++n) {
    day = n;
    p.e.set_attribute("R", "recovery", (n == 2 || n == 5 || n == 7) ? "yes" : "no");
    p.e.run("rev", [&] { p.e.do_new_revision("R"); });
  }
  auto pm = p.pm();
  auto sm = build_system_model(pm, "I", nullptr);
  // Revision 1 is the creation snapshot, so loop step n is revision n + 1.
  auto b = instantiate_configuration(p.e, sm, parse_constraint("[recovery=yes]"));
  CHECK(b.revisions.at("R") == 8);
  CHECK(instantiate_configuration(p.e, sm, nullptr).revisions.at("R") == 9);
  b = instantiate_configuration(p.e, sm, parse_constraint("[recovery=yes] and [date<88_08_06]"));
  CHECK(b.revisions.at("R") == 6);
  CHECK(component_listing(pm, sm, &b) == std::vector<std::string>{"F/I/R@6"});
  CHECK_THROWS_WITH(instantiate_configuration(p.e, sm, parse_constraint("[recovery=maybe]")),
                    doctest::Contains("no revision of R"));
}

TEST_CASE("official revision before a date") {
  Pm p(Reals{{"R", ""}});
  struct Step { int month, day; const char* state; };
  const Step steps[] = {{6, 1, "official"}, {8, 1, "official"}, {8, 20, "draft"},
                        {9, 1, "official"}};
  Date now;
  p.e.set_clock([&] { return now; });
  for (auto& s : steps) {
    now = Date::from_civil(1988, s.month, s.day);
    p.e.set_attribute("R", "state", s.state);
    p.e.run("rev", [&] { p.e.do_new_revision("R"); });
  }
  auto sm = build_system_model(p.pm(), "I", nullptr);
  auto b = instantiate_configuration(p.e, sm, parse_constraint("state=official and date<88_08_23"));
  CHECK(b.revisions.at("R") == 3);  // the 88_08_01 official one
}

TEST_CASE("configurations are stored as objects composed of their nodes") {
  Pm p(Reals{{"R1", "system=unix"}, {"R2", "system=VMS"}});
  auto pm = p.pm();
  auto sm = build_system_model(pm, "I", parse_constraint("[system=VMS]"));
  REQUIRE(p.e.run("sm", [&] { do_store_system_model(p.e, "SM", sm); }).committed);
  auto back = load_system_model(p.e, "SM");
  CHECK(back == sm);
  CHECK(print_constraint(*back.where) == print_constraint(*sm.where));
  p.e.run("rev", [&] { p.e.do_new_revision("R2"); });
  auto b = instantiate_configuration(p.e, back, nullptr, "SM");
  REQUIRE(p.e.run("bind", [&] { do_store_bound(p.e, "SM_1", back, b); }).committed);
  CHECK(p.e.get("SM_1", "bound").display() == "R2@2");
  CHECK(p.e.db().object("SM_1")->branch("main")->revisions.size() == 2);
}

TEST_CASE("object closure over named relations") {
  Pm p(Reals{{"R1", "system=unix"}, {"R2", "system=VMS"}});
  auto closure = build_object_closure(p.e, "I", {"depends_on", "is_realized"},
                                      parse_constraint("[system=VMS]"));
  CHECK(closure == std::set<std::string>{"I", "R2"});

  Engine e;
  e.load("OBJECT doc ; END doc ;");
  for (auto n : {"a", "b", "c", "d", "x"}) e.create_object(n, "doc");
  e.create_relation("a", "composed_of", "b");
  e.create_relation("b", "composed_of", "c");
  e.create_relation("a", "composed_of", "d");
  // oracle: plain breadth-first reachability
  std::set<std::string> expect{"a"};
  std::deque<std::string> q{"a"};
  while (!q.empty()) {
    auto n = q.front();
    q.pop_front();
    for (auto& k : e.db().outgoing(n))
      if (expect.insert(k.dest).second) q.push_back(k.dest);
  }
  CHECK(build_object_closure(e, "a", {"composed_of"}, nullptr) == expect);
  CHECK(build_object_closure(e, "x", {"composed_of"}, nullptr) == std::set<std::string>{"x"});
}
