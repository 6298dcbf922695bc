#include "doctest.h"

#include "adl/loader.hpp"
#include "fixture.hpp"

using namespace adl;

TEST_CASE("philosophers program loads verbatim") {
  Schema s;
  auto r = load_dsl(s, read_fixture("philosophers.adl"));
  CHECK(r.types == std::vector<std::string>{"Philo", "Fork", "Use"});
  CHECK(r.methods == std::vector<std::string>{"newstate"});
  auto philo = s.effective("Philo");
  REQUIRE(philo->attribute("STATE"));
  CHECK(philo->attribute("STATE")->default_value == Value::string("think"));
  CHECK(philo->method("eat"));
  REQUIRE(philo->triggers.size() == 1);
  CHECK(philo->triggers[0].def.coupling == Coupling::Error);
  auto use = s.effective("Use");
  CHECK(use->kind == TypeKind::Relation);
  CHECK(use->card == Cardinality::ManyMany);
  REQUIRE(use->triggers.size() == 3);
  CHECK(use->triggers[0].def.coupling == Coupling::Pre);
  CHECK(use->triggers[0].def.scope == Scope::Origin);
  CHECK(use->triggers[2].def.coupling == Coupling::After);
  CHECK(use->triggers[2].def.scope == Scope::Dest);
  REQUIRE(s.free_method("newstate"));
  CHECK(s.free_method("newstate")->params == std::vector<std::string>{"state"});
  // the stray ')' in the newstate body is reported, not fatal
  CHECK(!r.warnings.empty());
}

TEST_CASE("change management program loads verbatim") {
  Schema s;
  auto r = load_dsl(s, read_fixture("change_management.adl"));
  REQUIRE(s.event("Delete_Official"));
  CHECK(s.event("Delete_Official")->priority == 1);
  auto prog = s.effective("prog");
  CHECK(prog->triggers.size() == 2);
  auto ref = s.effective("RefWS");
  REQUIRE(ref->triggers.size() == 4);
  CHECK(ref->triggers[0].def.coupling == Coupling::Post);
  CHECK(ref->triggers[0].def.event == "replace");
  CHECK(ref->triggers[3].def.coupling == Coupling::After);
}

TEST_CASE("composition relation loads with a relation method") {
  Schema s;
  load_dsl(s, read_fixture("composition.adl"));
  auto c = s.effective("composition");
  REQUIRE(c->method("duplicate"));
  CHECK(c->method("duplicate")->def.scope == Scope::Origin);
  CHECK(c->method("duplicate")->def.flag_params.size() == 1);
  CHECK(c->triggers.size() == 3);
}

TEST_CASE("release program loads with roles and connections") {
  Schema s;
  load_dsl(s, read_fixture("tempo_prelude.adl"));
  auto r = load_dsl(s, read_fixture("release.adl"));
  CHECK(r.processes == std::vector<std::string>{"development", "validation", "release"});
  const ProcessDef* rel = s.process("release");
  REQUIRE(rel);
  CHECK(rel->user == "PMmanager");
  CHECK(rel->roles.size() == 3);
  REQUIRE(rel->connections.size() == 2);
  CHECK(rel->connections[0].kinds == std::vector<std::string>{"notify", "resynch"});
  CHECK(rel->connections[0].left_path == "to_consult.name");
  CHECK(rel->connections[1].events.count("merge_when"));
  CHECK(s.is_subtype("development.to_change", "development.to_consult"));
  CHECK(s.is_subtype("development.to_change", "Module"));
  auto tc = s.effective("development.to_change");
  REQUIRE(tc->attribute("state"));
  CHECK(tc->attribute("state")->domain.values.size() == 6);
  CHECK(s.effective("release")->triggers.size() == 1);
}

TEST_CASE("undefined base type aborts the whole load") {
  Schema s;
  auto before = s.type_names();
  CHECK_THROWS(load_dsl(s, "OBJECT A ; END A ; OBJECT B IS Missing ; END B ;"));
  CHECK(s.type_names() == before);
}

TEST_CASE("empty file gives an empty report") {
  Schema s;
  CHECK(load_dsl(s, "").empty());
}
