#include "doctest.h"

#include "adl/engine.hpp"
#include "fixture.hpp"

using namespace adl;

namespace {

std::string state(Engine& e, const std::string& obj, const std::string& attr = "state") {
  return e.get(obj, attr).display();
}

}  // namespace

TEST_CASE("philosophers: failed eat leaves the philosopher hungry, release retries") {
  Engine e;
  e.load(read_fixture("philosophers.adl"));
  for (int i = 0; i < 3; ++i) {
    REQUIRE(e.create_object("p" + std::to_string(i), "Philo").committed);
    REQUIRE(e.create_object("f" + std::to_string(i), "Fork").committed);
  }
  for (int i = 0; i < 3; ++i) {
    REQUIRE(e.create_relation("p" + std::to_string(i), "Use", "f" + std::to_string(i)).committed);
    REQUIRE(e.create_relation("p" + std::to_string(i), "Use", "f" + std::to_string((i + 1) % 3))
                .committed);
  }
  auto r = e.invoke("p0", "eat");
  CHECK(r.committed);
  CHECK(state(e, "p0", "STATE") == "eat");
  CHECK(state(e, "f0", "STATE") == "occupied");
  CHECK(state(e, "f1", "STATE") == "occupied");

  r = e.invoke("p1", "eat");
  CHECK_FALSE(r.committed);
  CHECK(r.output == std::vector<std::string>{"The f1 fork is occupied"});
  CHECK(state(e, "p1", "STATE") == "hungry");
  CHECK(state(e, "f2", "STATE") == "free");  // the PRE get on f2 never ran or was undone

  r = e.invoke("p0", "think");
  CHECK(r.committed);
  CHECK(state(e, "p1", "STATE") == "eat");
  CHECK(state(e, "f0", "STATE") == "free");
  int retries = 0;
  for (auto& l : r.trace)
    if (l.cascade == 1 && l.phase == "METHOD" && l.event == "eat") ++retries;
  CHECK(retries == 1);
}

TEST_CASE("trace follows PRE METHOD POST COMMIT AFTER") {
  Engine e;
  e.load(read_fixture("philosophers.adl"));
  e.create_object("p", "Philo");
  e.create_object("f", "Fork");
  e.create_relation("p", "Use", "f");
  e.invoke("p", "eat");
  auto r = e.invoke("p", "think");
  std::vector<std::string> phases;
  for (auto& l : r.trace)
    if (l.nest == 0 && l.cascade == 0) phases.push_back(l.phase);
  CHECK(phases == std::vector<std::string>{"METHOD", "POST", "COMMIT", "AFTER"});
  CHECK(r.trace[0].render() == "METHOD|think|0|Philo|newstate(self, think)");
}

TEST_CASE("composition relation cascades delete and protects components") {
  Engine e;
  e.load(read_fixture("composition.adl"));
  e.load("OBJECT thing; END thing;");
  for (auto n : {"A", "X", "Y", "Z"}) REQUIRE(e.create_object(n, "thing").committed);
  for (auto n : {"X", "Y", "Z"}) REQUIRE(e.create_relation("A", "composition", n).committed);

  auto r = e.invoke("X", "delete");
  CHECK_FALSE(r.committed);
  CHECK(r.output == std::vector<std::string>{"you must delete first its container A"});
  CHECK(e.db().object("X"));

  r = e.invoke("A", "delete");
  INFO(r.message);
  CHECK(r.committed);
  for (auto n : {"A", "X", "Y", "Z"}) CHECK_FALSE(e.db().object(n));
}

TEST_CASE("relation method overloads the entity method and copies the aggregate") {
  Engine e;
  e.load(read_fixture("composition.adl"));
  e.load("OBJECT thing; END thing;");
  for (auto n : {"A", "X"}) e.create_object(n, "thing");
  e.create_relation("A", "composition", "X");
  auto r = e.invoke("A", "duplicate", {"-d", "B"});
  INFO(r.message);
  INFO(r.trace_text());
  REQUIRE(r.committed);
  CHECK(e.db().object("B"));
  CHECK(e.db().relation(RelKey{"B", "composition", "X"}));
}

namespace {

// Builds one prog with n workspaces, each created by its own user.
void change_setup(Engine& e, int n) {
  e.load(read_fixture("change_management.adl"));
  REQUIRE(e.create_object("P", "prog").committed);
  for (int i = 0; i < n; ++i) {
    e.session().user = "u" + std::to_string(i);
    std::string ws = "W" + std::to_string(i);
    REQUIRE(e.create_object(ws, "ws").committed);
    REQUIRE(e.create_relation(ws, "RefWS", "P").committed);
  }
}

}  // namespace

TEST_CASE("change management: official iff every workspace validated") {
  for (int n = 1; n <= 3; ++n) {
    for (int mask = 0; mask < (1 << n); ++mask) {
      Engine e;
      change_setup(e, n);
      for (int i = 0; i < n; ++i)
        if (mask & (1 << i)) {
          e.session().user = "u" + std::to_string(i);
          auto r = e.invoke("P", "validate");
          REQUIRE(r.committed);
        }
      bool all = mask == (1 << n) - 1;
      CAPTURE(n);
      CAPTURE(mask);
      CHECK((state(e, "P") == "official") == all);
      if (all) {
        auto r = e.invoke("P", "delete");
        CHECK_FALSE(r.committed);
        CHECK(e.db().object("P"));
      }
    }
  }
}

TEST_CASE("change management: replace mails every workspace owner") {
  Engine e;
  change_setup(e, 3);
  e.session().user = "u0";
  auto r = e.invoke("P", "replace");
  REQUIRE(r.committed);
  std::size_t mails = 0;
  for (auto& [u, box] : e.db().inboxes()) mails += box.size();
  CHECK(mails == 3);
  CHECK(e.db().inboxes().count("u2"));
}

TEST_CASE("abort rolls back every write") {
  Engine e;
  e.load(read_fixture("philosophers.adl"));
  e.create_object("p", "Philo");
  std::string before = e.db().digest();
  auto r = e.run("t", [&] {
    e.do_write_text(Item::object("p"), "STATE", "eat");
    e.do_create_object("q", "Philo");
    e.abort("stop");
  });
  CHECK_FALSE(r.committed);
  CHECK(r.message == "stop");
  CHECK(e.db().digest() == before);
}

TEST_CASE("relation structure checks") {
  Engine e;
  e.load("OBJECT t; END t; RELTYPE dep; CARD N:N; DAG; END dep;");
  for (auto n : {"A", "B", "C"}) e.create_object(n, "t");
  CHECK(e.create_relation("A", "dep", "B").committed);
  auto r = e.create_relation("B", "dep", "A");
  CHECK_FALSE(r.committed);
  CHECK(r.message.find("cycle in DAG relation") != std::string::npos);
  CHECK_FALSE(e.create_relation("A", "dep", "B").committed);
  CHECK(e.create_relation("P1", "part", "C").message.find("unknown object") != std::string::npos);
}

TEST_CASE("unknown method aborts") {
  Engine e;
  e.load("OBJECT t; END t;");
  e.create_object("a", "t");
  auto r = e.invoke("a", "frobnicate");
  CHECK_FALSE(r.committed);
  CHECK(r.message.find("unknown method") != std::string::npos);
}
