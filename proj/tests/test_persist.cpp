#include "doctest.h"

#include <unistd.h>

#include <fstream>

#include "adl/persist.hpp"
#include "fixture.hpp"

using namespace adl;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  fs::path d = fs::temp_directory_path() / ("adl_persist_" + tag + "_" + std::to_string(getpid()));
  fs::remove_all(d);
  return d;
}

void populate(Engine& e) {
  e.load(read_fixture("philosophers.adl"));
  for (int i = 0; i < 3; ++i) {
    e.create_object("p" + std::to_string(i), "Philo");
    e.create_object("f" + std::to_string(i), "Fork");
  }
  for (int i = 0; i < 3; ++i) {
    e.create_relation("p" + std::to_string(i), "Use", "f" + std::to_string(i));
    e.create_relation("p" + std::to_string(i), "Use", "f" + std::to_string((i + 1) % 3));
  }
  e.invoke("p0", "eat");
  e.invoke("p1", "eat");  // aborts, ERROR program commits hungry
  e.invoke("p0", "think");
}

}  // namespace

TEST_CASE("journal replay rebuilds the same store") {
  fs::path d = fresh_dir("replay");
  Store::init(d);
  std::string digest;
  {
    Store s(d);
    populate(s.engine());
    digest = s.engine().db().digest();
    CHECK(s.seq() > 0);
  }
  Store again(d);
  CHECK(again.engine().db().digest() == digest);
  CHECK(again.engine().get("p1", "STATE").display() == "eat");
  fs::remove_all(d);
}

TEST_CASE("snapshot plus journal tail equals full replay") {
  fs::path d = fresh_dir("snap");
  Store::init(d);
  std::string digest;
  {
    Store s(d);
    s.set_snapshot_interval(7);
    populate(s.engine());
    digest = s.engine().db().digest();
  }
  bool any = false;
  for (auto& e : fs::directory_iterator(d / "snapshot")) any = any || e.is_directory();
  CHECK(any);
  Store again(d);
  CHECK(again.engine().db().digest() == digest);
  fs::remove_all(d);
}

TEST_CASE("journal lines follow seq|timestamp|user|op|fields") {
  fs::path d = fresh_dir("format");
  Store::init(d);
  {
    Store s(d);
    s.engine().session().user = "ann";
    s.engine().load("OBJECT t; END t;");
    s.engine().create_object("a b", "t");  // rejected, nothing journalled
    s.engine().create_object("a", "t");
  }
  std::ifstream in(d / "journal.log");
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  REQUIRE(lines.size() >= 2);
  auto j = JournalLine::parse(lines[1]);
  CHECK(j.seq == 2);
  CHECK(j.user == "ann");
  CHECK(j.op.get("op") == "obj");
  CHECK(JournalLine::parse(lines[1]).render() == lines[1]);
  fs::remove_all(d);
}

TEST_CASE("a second opener is refused by the lock") {
  fs::path d = fresh_dir("lock");
  Store::init(d);
  Store s(d);
  CHECK_THROWS_WITH_AS(Store{d}, doctest::Contains("locked"), Error);
  fs::remove_all(d);
}
