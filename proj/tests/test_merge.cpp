#include "doctest.h"

#include <random>

#include "adl/merge.hpp"

using namespace adl;

namespace {

std::string render(const std::vector<std::string>& lines) {
  std::string s;
  for (auto& l : lines) s += l + "\n";
  return s;
}

}  // namespace

TEST_CASE("non-overlapping line edits merge cleanly") {
  // Reference: apply each side's replacements to the base independently.
  std::mt19937 rng(7);
  for (int round = 0; round < 200; ++round) {
    std::vector<std::string> base, ours, theirs, expect;
    for (int i = 0; i < 10; ++i) base.push_back("line " + std::to_string(i));
    ours = theirs = expect = base;
    for (int i = 0; i < 10; ++i) {
      int pick = rng() % 4;
      if (pick == 1) ours[i] = expect[i] = "ours " + std::to_string(i);
      if (pick == 2) theirs[i] = expect[i] = "theirs " + std::to_string(i);
    }
    auto r = merge3(render(base), render(ours), render(theirs));
    CAPTURE(round);
    CHECK_FALSE(r.conflict);
    CHECK(r.text == render(expect));
  }
}

TEST_CASE("insertions and deletions on both sides") {
  std::string base = "a\nb\nc\nd\ne\n";
  auto r = merge3(base, "a\nb\nX\nc\nd\ne\n", "a\nb\nc\nd\n");
  CHECK_FALSE(r.conflict);
  CHECK(r.text == "a\nb\nX\nc\nd\n");
}

TEST_CASE("same line changed differently is a conflict") {
  auto r = merge3("a\nb\nc\n", "a\nB1\nc\n", "a\nB2\nc\n", "WE1", "WE2");
  CHECK(r.conflict);
  CHECK(r.text == "a\n<<<<<<< WE1\nB1\n=======\nB2\n>>>>>>> WE2\nc\n");
}

TEST_CASE("identical edits do not conflict") {
  auto r = merge3("a\nb\n", "a\nz\n", "a\nz\n");
  CHECK_FALSE(r.conflict);
  CHECK(r.text == "a\nz\n");
}

TEST_CASE("unchanged side takes the other") {
  CHECK(merge3("x\n", "x\n", "y\n").text == "y\n");
  CHECK(merge3("x\n", "y\n", "x\n").text == "y\n");
  CHECK(merge3("", "", "").text.empty());
}

TEST_CASE("two-way fallback always flags a conflict") {
  auto r = merge2("a\nb\n", "a\nb\n");
  CHECK(r.conflict);
  CHECK(r.text == "a\nb\n");
  r = merge2("a\nb\nc\n", "a\nx\nc\n");
  CHECK(r.text == "a\n<<<<<<< ours\nb\n=======\nx\n>>>>>>> theirs\nc\n");
}
