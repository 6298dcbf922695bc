#include "doctest.h"

#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "adl/tempo.hpp"
#include "fixture.hpp"

using namespace adl;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

// Release schema, modules M1..M3 owned by u1, u2, u3, and a release instance.
struct Release {
  fs::path root;
  Engine e;
  Tempo t{e};
  std::string rel;

  explicit Release(const std::string& tag) {
    root = fs::temp_directory_path() / ("adl_tempo_" + tag + "_" + std::to_string(getpid()));
    fs::remove_all(root);
    e.set_work_root(root);
    e.load(read_fixture("tempo_prelude.adl"));
    e.load(read_fixture("release.adl"));
    e.load(read_fixture("release_modules.adl"));
    for (int i = 1; i <= 3; ++i) {
      std::string m = "M" + std::to_string(i);
      e.create_object(m, "team_module");
      e.set_attribute(m, "responsible", "u" + std::to_string(i));
      e.set_attribute(m, "content", "a\nb\nc\nd\n");
      e.run("rev", [&] { e.do_new_revision(m); });
    }
    rel = t.instantiate({"release", "PM", {"M1", "M2", "M3"}, "", "", "", {}});
  }
  ~Release() { fs::remove_all(root); }

  std::string dev(const std::string& user) {
    return t.instantiate({"development", user, {"M1", "M2", "M3"}, "", rel, "implement", {}});
  }
  std::size_t mails(const std::string& user) {
    auto it = e.db().inboxes().find(user);
    return it == e.db().inboxes().end() ? 0 : it->second.size();
  }
  std::size_t validation_wes() {
    return std::count_if(e.db().wes().begin(), e.db().wes().end(),
                         [](auto& p) { return p.second.process == "validation"; });
  }
};

}  // namespace

TEST_CASE("objects bind to the most derived role whose filter holds") {
  Release r("bind");
  auto s = r.t.status(r.rel);
  CHECK(s.bindings["components"] == std::vector<std::string>{"M1", "M2", "M3"});
  std::string d = r.dev("u2");
  auto ds = r.t.status(d);
  CHECK(ds.bindings["to_change"] == std::vector<std::string>{"M2"});
  CHECK(ds.bindings["to_consult"] == std::vector<std::string>{"M1", "M3"});
  CHECK(ds.parent == r.rel);
  CHECK(r.t.status(r.rel).bindings["implement"] == std::vector<std::string>{d});
  CHECK(slurp(r.t.file_of(d, "M2")) == "a\nb\nc\nd\n");
}

TEST_CASE("role-local values stay inside their environment") {
  Release r("iso");
  std::string d1 = r.dev("u1"), d2 = r.dev("u2");
  REQUIRE(r.t.set_role_attr(d1, "to_change", "M1", "state", "edited").committed);
  CHECK(r.t.role_attr(d1, "to_change", "M1", "state").display() == "edited");
  CHECK(r.t.role_attr(d2, "to_consult", "M1", "state").is_unset());
  CHECK(r.e.get(Item::object("M1"), "state").is_unset());
  // A value outside the role's domain is refused.
  CHECK_FALSE(r.t.set_role_attr(d1, "to_change", "M1", "state", "bogus").committed);
  CHECK_THROWS(r.t.set_role_attr(d1, "to_consult", "M1", "state", "edited"));
}

TEST_CASE("three holders of one module give six change connections") {
  Release r("conn");
  r.dev("u1");
  r.dev("u1");
  r.dev("u1");
  int change = 0, consult = 0;
  for (auto& [id, c] : r.e.db().connections()) {
    change += c.type == "change_change";
    consult += c.type == "consult_change";
  }
  CHECK(change == 6);
  CHECK(consult == 0);
}

TEST_CASE("release cycle: notify, resynch, merge, available, one validation") {
  Release r("cycle");
  std::string d1 = r.dev("u1"), d2 = r.dev("u2"), d3 = r.dev("u1");
  // consult: d2 sees M1 from d1 and d3, d1 and d3 see M2 from d2. change: d1 and d3 on M1.
  int change = 0, consult = 0;
  for (auto& [id, c] : r.e.db().connections()) {
    change += c.type == "change_change";
    consult += c.type == "consult_change";
  }
  CHECK(change == 2);
  CHECK(consult == 4);

  spit(r.t.file_of(d1, "M1"), "A\nb\nc\nd\n");
  spit(r.t.file_of(d3, "M1"), "a\nb\nc\nD\n");
  auto u1 = r.mails("u1"), u2 = r.mails("u2");
  REQUIRE(r.t.set_role_attr(d1, "to_change", "M1", "state", "ready").committed);
  CHECK(r.mails("u2") == u2 + 1);
  CHECK(r.mails("u1") == u1 + 1);
  CHECK(slurp(r.t.file_of(d2, "M1")) == "A\nb\nc\nd\n");
  CHECK(slurp(r.t.file_of(d3, "M1")) == "A\nb\nc\nD\n");
  // d3 still holds an unready copy, so nothing is available yet.
  CHECK(r.t.role_attr(d1, "to_change", "M1", "state").display() == "ready");

  REQUIRE(r.t.set_role_attr(d3, "to_change", "M1", "state", "ready").committed);
  CHECK(r.t.role_attr(d1, "to_change", "M1", "state").display() == "available");
  CHECK(r.t.role_attr(d3, "to_change", "M1", "state").display() == "available");
  CHECK(r.validation_wes() == 0);

  REQUIRE(r.t.set_role_attr(d2, "to_change", "M2", "state", "ready").committed);
  CHECK(r.t.role_attr(d2, "to_change", "M2", "state").display() == "available");
  CHECK(r.validation_wes() == 1);

  // Another full round must not spawn a second validation environment.
  REQUIRE(r.t.set_role_attr(d1, "to_change", "M1", "state", "ready").committed);
  REQUIRE(r.t.set_role_attr(d3, "to_change", "M1", "state", "ready").committed);
  CHECK(r.t.role_attr(d3, "to_change", "M1", "state").display() == "available");
  CHECK(r.validation_wes() == 1);
}

TEST_CASE("conflicting edits are marked and reported") {
  Release r("conflict");
  std::string d1 = r.dev("u1"), d3 = r.dev("u1");
  spit(r.t.file_of(d1, "M1"), "X\nb\nc\nd\n");
  spit(r.t.file_of(d3, "M1"), "Y\nb\nc\nd\n");
  REQUIRE(r.t.set_role_attr(d1, "to_change", "M1", "state", "ready").committed);
  std::string text = slurp(r.t.file_of(d3, "M1"));
  CHECK(text.find("<<<<<<< " + d3) != std::string::npos);
  CHECK(text.find(">>>>>>> " + d1) != std::string::npos);
  auto c = r.e.db().connections().at("change_change:" + d3 + "<" + d1 + ":M1");
  CHECK(c.status == "conflict");
}

TEST_CASE("a tool list limits what an environment may invoke") {
  Release r("tools");
  std::string d = r.t.instantiate(
      {"development", "u1", {"M1", "M2", "M3"}, "", r.rel, "implement", {"compile"}});
  CHECK_THROWS_WITH(r.t.invoke_in_we(d, "to_change", "M1", "replace"),
                    doctest::Contains("not among the tools"));
  CHECK(r.t.status(d).tools == std::vector<std::string>{"compile"});
  CHECK(r.e.get(Item::object(d), "tools").display() == "compile");
}
