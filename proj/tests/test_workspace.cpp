#include "doctest.h"

#include <unistd.h>

#include <fstream>
#include <sstream>

#include "adl/workspace.hpp"
#include "fixture.hpp"

using namespace adl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& tag) {
  fs::path d = fs::temp_directory_path() / ("adl_ws_" + tag + "_" + std::to_string(getpid()));
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

// Aggregate `app` with components a, b and a shared header h.
struct Setup {
  Engine e;
  Workspaces w{e};
  explicit Setup(const std::string& schema = "OBJECT src; END src;") {
    e.load(schema);
    e.create_object("app", "src");
    for (auto n : {"a", "b", "h"}) {
      e.create_object(n, "src");
      e.create_relation("app", "composed_of", n);
      e.set_attribute(n, "content", std::string("text of ") + n + "\n");
      e.run("rev", [&] { e.do_new_revision(n); });
    }
    REQUIRE(w.make_context("C", {"app"}).committed);
  }
};

}  // namespace

TEST_CASE("context membership follows the aggregate") {
  Setup s;
  CHECK(s.w.members("C") == std::set<std::string>{"app", "a", "b", "h"});
  s.e.create_object("c", "src");
  s.e.create_relation("app", "composed_of", "c");
  CHECK(s.w.members("C").count("c"));
  s.w.make_context("E", {});
  CHECK(s.w.members("E").empty());
  CHECK_FALSE(s.w.make_context("F", {"nope"}).committed);
}

TEST_CASE("checkout materializes copies and links") {
  Setup s;
  fs::path d = scratch("co");
  auto r = s.w.checkout("W", "C", d, "ann",
                        {{"h", LinkMode::Dynamic}, {"b", LinkMode::Static}});
  INFO(r.message);
  REQUIRE(r.committed);
  CHECK(slurp(d / "app/a") == "text of a\n");
  CHECK(slurp(d / "app/h") == "adl-link:h\n");
  CHECK(slurp(d / "app/b") == "adl-link:b@2\n");

  // a new revision elsewhere: the dynamic link follows, the static one stays
  s.e.set_attribute("h", "content", "new h\n");
  s.e.set_attribute("b", "content", "new b\n");
  s.e.run("rev", [&] {
    s.e.do_new_revision("h");
    s.e.do_new_revision("b");
  });
  CHECK(s.w.read("W", "app/h") == "new h\n");
  CHECK(s.w.read("W", "app/b") == "text of b\n");

  auto m = s.w.resolve_path("W", "app/a");
  CHECK(m.object == "a");
  CHECK(m.revision == 2);
  CHECK(s.e.get(Item::object(m.object), "content").display() == "text of a\n");
  spit(d / "app/stray", "x");
  CHECK_THROWS_WITH(s.w.resolve_path("W", "app/stray"), doctest::Contains("unmapped path"));
  CHECK(s.w.locate(d / "app/a")->second == "app/a");
  fs::remove_all(d);
}

TEST_CASE("checkin creates revisions only for changed copies") {
  Setup s;
  fs::path d = scratch("ci");
  REQUIRE(s.w.checkout("W", "C", d, "ann", {{"h", LinkMode::Dynamic}}).committed);
  std::string before = s.e.db().digest();
  std::vector<std::pair<std::string, int>> made;
  REQUIRE(s.w.checkin("W", {"app/a", "app/b"}, false, &made).committed);
  CHECK(made.empty());
  CHECK(s.e.db().digest() == before);

  spit(d / "app/a", "edited a\n");
  REQUIRE(s.w.checkin("W", {"app/a"}, false, &made).committed);
  REQUIRE(made.size() == 1);
  CHECK(made[0] == std::pair<std::string, int>{"a", 3});
  CHECK(s.e.content_of("a", "main", 3) == "edited a\n");
  CHECK(s.w.resolve_path("W", "app/a").revision == 3);

  auto r = s.w.checkin("W", {"app/h"});
  CHECK_FALSE(r.committed);
  CHECK(r.message.find("link-mode") != std::string::npos);
  fs::remove_all(d);
}

TEST_CASE("a rejecting trigger undoes the whole checkin") {
  Setup s("OBJECT src; POST ON replace DO IF content = bad THEN ABORT \"rejected\"; END src;");
  fs::path d = scratch("reject");
  REQUIRE(s.w.checkout("W", "C", d, "ann").committed);
  spit(d / "app/a", "fine\n");
  spit(d / "app/b", "bad");
  std::string db_before = s.e.db().digest();
  auto r = s.w.checkin("W", {"app/a", "app/b"});
  CHECK_FALSE(r.committed);
  CHECK(r.message == "rejected");
  CHECK(s.e.db().digest() == db_before);
  CHECK(s.e.latest_revision("a") == 2);
  fs::remove_all(d);
}

TEST_CASE("sync in both directions") {
  Setup s;
  fs::path d = scratch("sync");
  REQUIRE(s.w.checkout("W", "C", d, "ann").committed);
  std::vector<std::string> rep;
  REQUIRE(s.w.sync("W", SyncDirection::ToWs, &rep).committed);
  CHECK(rep.empty());

  s.e.create_object("c", "src");
  s.e.create_relation("app", "composed_of", "c");
  s.e.set_attribute("a", "content", "a2\n");
  s.e.run("rev", [&] { s.e.do_new_revision("a"); });
  REQUIRE(s.w.sync("W", SyncDirection::ToWs, &rep).committed);
  CHECK(rep == std::vector<std::string>{"~ app/a", "+ app/c"});
  CHECK(fs::exists(d / "app/c"));
  CHECK(slurp(d / "app/a") == "a2\n");

  spit(d / "app/new.c", "fresh\n");
  spit(d / ".adlignore", "*.o\n");
  spit(d / "app/junk.o", "obj");
  fs::remove(d / "app/b");
  REQUIRE(s.w.sync("W", SyncDirection::ToDb, &rep).committed);
  CHECK(rep == std::vector<std::string>{"+ app/new.c", "- app/b"});
  CHECK(s.e.db().object("new.c"));
  CHECK(s.w.members("C").count("new.c"));
  CHECK_FALSE(s.w.members("C").count("b"));
  fs::remove_all(d);
}

TEST_CASE("aborted transaction restores files byte for byte") {
  Setup s;
  fs::path d = scratch("abort");
  REQUIRE(s.w.checkout("W", "C", d, "ann").committed);
  std::string dir_before = dir_digest(d), db_before = s.e.db().digest();
  auto r = s.e.run("t", [&] {
    s.e.do_write_file(d / "app/a", "overwritten");
    s.e.do_write_file(d / "app/b", "overwritten");
    s.e.do_write_file(d / "app/sub/new", "created");
    s.e.do_remove_file(d / "app/h");
    s.e.abort("injected");
  });
  CHECK_FALSE(r.committed);
  CHECK(dir_digest(d) == dir_before);
  CHECK(s.e.db().digest() == db_before);
  fs::remove_all(d);
}
