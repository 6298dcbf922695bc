// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Every check compares the engine against a model kept in this file.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "adl/builder.hpp"
#include "adl/tempo.hpp"
#include "adl/workspace.hpp"
#include "fixture.hpp"
#include "pm_oracle.hpp"

using namespace adl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string l; std::getline(ss, l);) out.push_back(l);
  return out;
}

std::string unlines(const std::vector<std::string>& ls) {
  std::string s;
  for (auto& l : ls) s += l + "\n";
  return s;
}

fs::path scratch(const std::string& tag) {
  fs::path d = fs::temp_directory_path() / ("adl_accept_" + tag + "_" + std::to_string(getpid()));
  fs::remove_all(d);
  return d;
}

// Every file and directory under `dir` with its bytes, for exact comparison.
std::map<std::string, std::string> tree_of(const fs::path& dir) {
  std::map<std::string, std::string> out;
  if (!fs::exists(dir)) return out;
  for (auto& ent : fs::recursive_directory_iterator(dir)) {
    std::string rel = fs::relative(ent.path(), dir).string();
    if (ent.is_directory())
      out[rel + "/"] = "";
    else
      out[rel] = slurp(ent.path());
  }
  return out;
}

std::string state(Engine& e, const std::string& obj) { return e.get(obj, "STATE").display(); }

// ---------------------------------------------------------------- 1

Outcome philosophers(std::mt19937& rng) {
  Outcome o;
  Engine e;
  e.load(read_fixture("philosophers.adl"));
  const int n = 5;
  auto P = [](int i) { return "p" + std::to_string(i); };
  for (int i = 0; i < n; ++i) {
    e.create_object(P(i), "Philo");
    e.create_object("f" + std::to_string(i), "Fork");
  }
  for (int i = 0; i < n; ++i) {
    e.create_relation(P(i), "Use", "f" + std::to_string(i));
    e.create_relation(P(i), "Use", "f" + std::to_string((i + 1) % n));
  }
  int failed_eats = 0, releases_with_hungry = 0;
  for (int step = 0; step < 10000 && o.ok; ++step) {
    int p = static_cast<int>(rng() % n);
    std::vector<std::string> before;
    for (int i = 0; i < n; ++i) before.push_back(state(e, P(i)));
    bool eating = before[p] == "eat";
    auto r = e.invoke(P(p), eating ? "think" : "eat");
    if (eating) {
      if (!r.committed) o.fail("think refused at step " + std::to_string(step));
      // Each released fork is shared with exactly one neighbour.
      int expected = (before[(p + n - 1) % n] == "hungry") + (before[(p + 1) % n] == "hungry");
      releases_with_hungry += expected;
      int retries = 0;
      // A retry is a cascaded transaction, opened by an AFTER trigger, that starts an eat.
      // It may abort in PRE before the eat body runs.
      for (std::size_t i = 0; i + 1 < r.trace.size(); ++i) {
        const auto &a = r.trace[i], &b = r.trace[i + 1];
        if (a.cascade == 0 && a.phase == "AFTER" && b.cascade == 1 && b.nest == 0 &&
            b.event == "eat" && (b.phase == "PRE" || b.phase == "METHOD"))
          ++retries;
      }
      if (retries != expected)
        o.fail("step " + std::to_string(step) + ": " + std::to_string(retries) + " retries for " +
               std::to_string(expected) + " hungry sharers");
    } else if (!r.committed) {
      ++failed_eats;
      if (state(e, P(p)) != "hungry") o.fail("failed eat left " + P(p) + " " + state(e, P(p)));
    }
    for (int i = 0; i < n; ++i)
      if (state(e, P(i)) == "eat" && state(e, P((i + 1) % n)) == "eat")
        o.fail("neighbours " + P(i) + " and " + P((i + 1) % n) + " both eat at step " +
               std::to_string(step));
  }
  if (o.ok)
    o.detail = std::to_string(failed_eats) + " failed eats, " +
               std::to_string(releases_with_hungry) + " retries";
  return o;
}

// ---------------------------------------------------------------- 2

Outcome change_management() {
  Outcome o;
  int runs = 0;
  for (int n = 1; n <= 4; ++n)
    for (int mask = 0; mask < (1 << n); ++mask) {
      ++runs;
      std::string tag = "N=" + std::to_string(n) + " mask=" + std::to_string(mask) + ": ";
      Engine e;
      e.load(read_fixture("change_management.adl"));
      e.create_object("P", "prog");
      for (int i = 0; i < n; ++i) {
        e.session().user = "u" + std::to_string(i);
        e.create_object("W" + std::to_string(i), "ws");
        e.create_relation("W" + std::to_string(i), "RefWS", "P");
      }
      for (int i = 0; i < n; ++i)
        if (mask & (1 << i)) {
          e.session().user = "u" + std::to_string(i);
          if (!e.invoke("P", "validate").committed) o.fail(tag + "validate refused");
        }
      bool all = mask == (1 << n) - 1;
      bool official = e.get("P", "state").display() == "official";
      if (official != all) o.fail(tag + "official=" + std::to_string(official));
      if (official) {
        if (e.invoke("P", "delete").committed || !e.db().object("P"))
          o.fail(tag + "official object deleted");
      }
      auto count = [&] {
        std::size_t m = 0;
        for (auto& [u, box] : e.db().inboxes()) m += box.size();
        return m;
      };
      std::size_t before = count();
      e.session().user = "u0";
      if (!e.invoke("P", "replace").committed) o.fail(tag + "replace refused");
      if (count() - before != static_cast<std::size_t>(n))
        o.fail(tag + std::to_string(count() - before) + " notifications");
    }
  if (o.ok) o.detail = std::to_string(runs) + " subsets";
  return o;
}

// ---------------------------------------------------------------- 3

struct ReleaseRun {
  fs::path root;
  Engine e;
  Tempo t{e};
  std::string rel;
  explicit ReleaseRun(const std::string& tag) {
    root = scratch("rel_" + tag);
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
  ~ReleaseRun() { fs::remove_all(root); }
  std::string dev(const std::string& user) {
    return t.instantiate({"development", user, {"M1", "M2", "M3"}, "", rel, "implement", {}});
  }
  std::vector<std::string> inbox(const std::string& user) {
    auto it = e.db().inboxes().find(user);
    if (it == e.db().inboxes().end()) return {};
    return it->second;
  }
  std::size_t validation_wes() {
    return std::count_if(e.db().wes().begin(), e.db().wes().end(),
                         [](auto& p) { return p.second.process == "validation"; });
  }
};

// One development step: edit a line of a to_change copy, or mark it ready.
struct Step {
  int dev;       // index into the WE list
  bool ready;
  int line;      // edited line for edits
};

Outcome release_scenario() {
  Outcome o;
  const std::string base = "a\nb\nc\nd\n";
  // d0 (u1) and d2 (u1) change M1, d1 (u2) changes M2; M3 is only consulted.
  const std::vector<std::string> users{"u1", "u2", "u1"};
  const std::vector<std::string> module_of{"M1", "M2", "M1"};
  const std::vector<int> edit_line{0, 1, 3};
  std::vector<Step> steps;
  for (int d = 0; d < 3; ++d) {
    steps.push_back({d, false, edit_line[d]});
    steps.push_back({d, true, 0});
  }
  // All interleavings of the three edit-then-ready sequences.
  std::vector<std::vector<int>> orders;
  std::vector<int> idx{0, 1, 2, 3, 4, 5};
  do {
    bool keeps = true;
    for (int d = 0; d < 3; ++d)
      keeps &= std::find(idx.begin(), idx.end(), 2 * d) <
               std::find(idx.begin(), idx.end(), 2 * d + 1);
    if (keeps) orders.push_back(idx);
  } while (std::next_permutation(idx.begin(), idx.end()));

  int round = 0;
  for (auto& order : orders) {
    ReleaseRun r(std::to_string(round++));
    std::vector<std::string> we;
    for (auto& u : users) we.push_back(r.dev(u));
    std::string tag = "order " + std::to_string(round) + ": ";
    std::set<int> ready;
    auto holders = [&](const std::string& m) {
      std::vector<int> out;
      for (int d = 0; d < 3; ++d)
        if (module_of[d] == m) out.push_back(d);
      return out;
    };
    for (int s : order) {
      const Step& st = steps[s];
      const std::string& m = module_of[st.dev];
      fs::path mine = r.t.file_of(we[st.dev], m);
      if (!st.ready) {
        auto ls = lines_of(slurp(mine));
        ls[st.line] = std::string(1, static_cast<char>(std::toupper(ls[st.line][0])));
        spit(mine, unlines(ls));
        continue;
      }
      // Expected effects, computed before the transition.
      std::string source = slurp(mine);
      std::map<int, std::string> merged;
      for (int d : holders(m)) {
        if (d == st.dev) continue;
        auto b = lines_of(base), t = lines_of(slurp(r.t.file_of(we[d], m))), sl = lines_of(source);
        for (std::size_t i = 0; i < b.size(); ++i)
          if (sl[i] != b[i]) t[i] = sl[i];
        merged[d] = unlines(t);
      }
      std::map<std::string, std::size_t> mails;
      for (auto& u : {"u1", "u2"}) mails[u] = r.inbox(u).size();

      if (!r.t.set_role_attr(we[st.dev], "to_change", m, "state", "ready").committed) {
        o.fail(tag + "ready refused");
        break;
      }
      ready.insert(st.dev);

      for (int d = 0; d < 3; ++d) {
        if (d == st.dev) continue;
        std::string got = slurp(r.t.file_of(we[d], m));
        if (module_of[d] == m) {
          if (got != merged[d]) o.fail(tag + "merge into " + we[d] + " gave " + got);
          auto c = r.e.db().connections().find("change_change:" + we[d] + "<" + we[st.dev] + ":" +
                                               m);
          if (c == r.e.db().connections().end() || c->second.status != "merged")
            o.fail(tag + "no merge between to_change copies of " + m);
        } else if (got != source) {
          o.fail(tag + "to_consult copy of " + m + " in " + we[d] + " not resynched");
        }
      }
      // One notification per other WE holding the module, sent to its owner.
      std::map<std::string, std::size_t> expect;
      for (int d = 0; d < 3; ++d)
        if (d != st.dev) ++expect[users[d]];
      for (auto& [u, k] : expect) {
        auto box = r.inbox(u);
        std::size_t hits = 0;
        for (std::size_t i = mails[u]; i < box.size(); ++i)
          if (box[i].find(m + " changed in " + we[st.dev]) != std::string::npos) ++hits;
        if (hits != k)
          o.fail(tag + u + " got " + std::to_string(hits) + " notifications for " + m);
      }
      // available only once every to_change copy of the module is ready
      bool all_ready = true;
      for (int d : holders(m)) all_ready &= ready.count(d) > 0;
      for (int d : holders(m)) {
        bool avail = r.t.role_attr(we[d], "to_change", m, "state").display() == "available";
        if (avail != all_ready)
          o.fail(tag + m + " in " + we[d] + (avail ? " available early" : " not available"));
      }
      std::size_t vals = r.validation_wes();
      if (vals != (ready.size() == 3 ? 1u : 0u))
        o.fail(tag + std::to_string(vals) + " validation WEs after " +
               std::to_string(ready.size()) + " ready");
    }
    if (!o.ok) break;
  }
  if (o.ok) o.detail = std::to_string(orders.size()) + " interleavings";
  return o;
}

// ---------------------------------------------------------------- 4

Outcome builder_oracle(std::mt19937& rng) {
  Outcome o;
  int solvable = 0;
  for (int round = 0; round < 200; ++round) {
    auto m = oracle::generate(rng);
    Engine e;
    e.load(oracle::kVariantSchema);
    oracle::install(e, m);
    auto pm = ProductModel::from_store(e);
    auto expected = oracle::solutions(m);
    ConstraintPtr where = m.where.empty() ? nullptr : parse_constraint(m.where);
    std::string tag = "model " + std::to_string(round) + ": ";
    try {
      auto sm = build_system_model(pm, m.root, where);
      if (expected.empty()) {
        o.fail(tag + "builder found a selection the enumeration rejects");
        continue;
      }
      ++solvable;
      if (!check_model_consistency(pm, sm).empty()) o.fail(tag + "inconsistent selection");
      if (std::find(expected.begin(), expected.end(), sm.realization) == expected.end())
        o.fail(tag + "selection not among the enumerated ones");
    } catch (const Error&) {
      if (!expected.empty()) o.fail(tag + "builder missed " + std::to_string(expected.size()) +
                                    " selections");
    }
  }
  if (o.ok) o.detail = std::to_string(solvable) + "/200 solvable, 0 mismatches";
  return o;
}

// ---------------------------------------------------------------- 5

std::string yymmdd(int y, unsigned m, unsigned d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d_%02u_%02u", y % 100, m, d);
  return buf;
}

Outcome bound_selection(std::mt19937& rng) {
  Outcome o;
  using namespace std::chrono;
  auto pick = [&](int n) { return static_cast<int>(rng() % n); };
  int checks = 0;
  for (int round = 0; round < 150; ++round) {
    Engine e;
    e.load(oracle::kVariantSchema);
    e.create_object("F", "family");
    e.create_object("I", "interface");
    e.create_relation("F", "contains", "I");
    sys_days day = sys_days(year{1988} / January / 1) + days(pick(60));
    e.set_clock([&] {
      year_month_day ymd(day);
      return Date::from_civil(int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day()));
    });
    struct Rev {
      std::string state, recovery;
      sys_days date;
    };
    // Revision 1 is the snapshot taken at creation, before any attribute.
    std::vector<Rev> revs{{"", "", day}};
    e.create_object("R", "variant");
    e.create_relation("I", "is_realized", "R");
    int n = 1 + pick(10);
    for (int i = 1; i < n; ++i) {
      day += days(1 + pick(20));
      Rev r{pick(2) ? "official" : "draft", pick(2) ? "yes" : "no", day};
      e.set_attribute("R", "state", r.state);
      e.set_attribute("R", "recovery", r.recovery);
      e.run("rev", [&] { e.do_new_revision("R"); });
      revs.push_back(r);
    }
    auto sm = build_system_model(ProductModel::from_store(e), "I", nullptr);
    for (int q = 0; q < 4; ++q) {
      sys_days cut = sys_days(year{1988} / January / 1) + days(pick(260));
      year_month_day c(cut);
      std::string lit = yymmdd(int(c.year()), unsigned(c.month()), unsigned(c.day()));
      std::string text;
      std::function<bool(const Rev&)> pred;
      switch (pick(4)) {
        case 0:
          text = "state=official and date<" + lit;
          pred = [=](const Rev& r) { return r.state == "official" && r.date < cut; };
          break;
        case 1:
          text = "[recovery=yes] and [date>" + lit + "]";
          pred = [=](const Rev& r) { return r.recovery == "yes" && r.date > cut; };
          break;
        case 2:
          text = "[state!=official] or [date<=" + lit + "]";
          pred = [=](const Rev& r) { return r.state == "draft" || r.date <= cut; };
          break;
        default:
          text = "[state=official]";
          pred = [](const Rev& r) { return r.state == "official"; };
      }
      int want = 0;
      for (std::size_t i = 0; i < revs.size(); ++i)
        if (pred(revs[i])) want = static_cast<int>(i) + 1;
      ++checks;
      std::string tag = "round " + std::to_string(round) + " '" + text + "': ";
      try {
        auto b = instantiate_configuration(e, sm, parse_constraint(text));
        int got = b.revisions.at("R");
        if (got != want) o.fail(tag + "got " + std::to_string(got) + " want " + std::to_string(want));
        else if (!pred(revs[got - 1])) o.fail(tag + "selected revision fails the predicate");
      } catch (const Error& err) {
        if (want != 0) o.fail(tag + "no selection, want " + std::to_string(want));
      }
    }
  }

  // A planted official revision among drafts and later official ones.
  Engine e;
  e.load(oracle::kVariantSchema);
  e.create_object("F", "family");
  e.create_object("I", "interface");
  e.create_relation("F", "contains", "I");
  Date now = Date::from_civil(1988, 5, 1);
  e.set_clock([&] { return now; });
  e.create_object("R", "variant");
  e.create_relation("I", "is_realized", "R");
  struct Planted { unsigned month, day; const char* state; };
  const Planted plan[] = {{6, 1, "official"}, {8, 1, "official"}, {8, 20, "draft"},
                          {9, 1, "official"}};
  for (auto& s : plan) {
    now = Date::from_civil(1988, s.month, s.day);
    e.set_attribute("R", "state", s.state);
    e.run("rev", [&] { e.do_new_revision("R"); });
  }
  auto sm = build_system_model(ProductModel::from_store(e), "I", nullptr);
  auto b = instantiate_configuration(e, sm, parse_constraint("state=official and date<88_08_23"));
  if (b.revisions.at("R") != 3)  // the 88_08_01 revision
    o.fail("planted official revision not chosen: got " + std::to_string(b.revisions.at("R")));
  if (o.ok) o.detail = std::to_string(checks) + " predicates, planted revision chosen";
  return o;
}

// ---------------------------------------------------------------- 6

Outcome atomicity(std::mt19937& rng) {
  Outcome o;
  auto pick = [&](int n) { return static_cast<int>(rng() % n); };
  Engine e;
  Workspaces w{e};
  e.load("OBJECT src; ATTRIBUTE level : integer; END src; RELTYPE link; CARD N:N; END link;");
  for (int i = 0; i < 6; ++i) {
    std::string n = "o" + std::to_string(i);
    e.create_object(n, "src");
    e.set_attribute(n, "content", "text " + n + "\n");
    e.run("rev", [&] { e.do_new_revision(n); });
  }
  e.create_object("app", "src");
  for (int i = 0; i < 6; ++i) e.create_relation("app", "composed_of", "o" + std::to_string(i));
  w.make_context("C", {"app"});
  fs::path d = scratch("atomic");
  w.checkout("W", "C", d, "ann");
  int aborted = 0, created = 0;
  for (int tx = 0; tx < 500 && o.ok; ++tx) {
    std::string db_before = e.db().digest();
    auto dir_before = tree_of(d);
    int ops = 1 + pick(6);
    bool commit = pick(4) == 0;
    int abort_at = commit ? -1 : pick(ops + 1);
    auto obj = [&] { return "o" + std::to_string(pick(6)); };
    auto r = e.run("fuzz", [&] {
      for (int k = 0; k < ops; ++k) {
        if (k == abort_at) e.abort("injected");
        switch (pick(6)) {
          case 0: e.do_write_text(Item::object(obj()), "state", "s" + std::to_string(pick(9))); break;
          case 1: e.do_write_text(Item::object(obj()), "level", std::to_string(pick(100))); break;
          case 2: e.do_create_relation({obj(), "link", obj()}); break;  // duplicates abort too
          case 3: e.do_create_object("n" + std::to_string(created++), "src"); break;
          case 4: {
            fs::path f = d / (pick(2) ? "app" : "app/extra") / ("f" + std::to_string(pick(4)));
            e.do_write_file(f, "bytes " + std::to_string(pick(1000)) + "\n");
            break;
          }
          default: {
            auto files = tree_of(d);
            for (auto& [rel, content] : files)
              if (rel.back() != '/' && pick(3) == 0) {
                e.do_remove_file(d / rel);
                break;
              }
          }
        }
      }
      if (abort_at == ops) e.abort("injected at end");
    });
    if (r.committed) continue;
    ++aborted;
    if (e.db().digest() != db_before) o.fail("store changed by aborted tx " + std::to_string(tx));
    if (tree_of(d) != dir_before) o.fail("WS changed by aborted tx " + std::to_string(tx));
  }
  fs::remove_all(d);
  if (o.ok) o.detail = std::to_string(aborted) + " aborted transactions restored";
  return o;
}

// ---------------------------------------------------------------- 7

// Independent expression model: atoms test attribute a<k> against "y".
struct Expr {
  enum Kind { Atom, And, Or, Not, If } kind = Atom;
  int attr = 0;
  bool neq = false;
  std::vector<Expr> kids;
};

Expr random_expr(std::mt19937& rng, int& budget) {
  auto pick = [&](int n) { return static_cast<int>(rng() % n); };
  Expr x;
  if (budget <= 1 || pick(3) == 0) {
    --budget;
    x.attr = pick(6);
    x.neq = pick(3) == 0;
    return x;
  }
  int k = pick(4);
  if (k == 3) {
    x.kind = Expr::Not;
    x.kids.push_back(random_expr(rng, budget));
    return x;
  }
  x.kind = k == 0 ? Expr::And : k == 1 ? Expr::Or : Expr::If;
  --budget;  // reserve one atom for the right side
  x.kids.push_back(random_expr(rng, budget));
  ++budget;
  x.kids.push_back(random_expr(rng, budget));
  return x;
}

std::string text_of(const Expr& x, bool desugar) {
  switch (x.kind) {
    case Expr::Atom: return "[a" + std::to_string(x.attr) + (x.neq ? "!=" : "=") + "y]";
    case Expr::Not: return "not (" + text_of(x.kids[0], desugar) + ")";
    case Expr::And: return "(" + text_of(x.kids[0], desugar) + " and " + text_of(x.kids[1], desugar) + ")";
    case Expr::Or: return "(" + text_of(x.kids[0], desugar) + " or " + text_of(x.kids[1], desugar) + ")";
    case Expr::If:
      if (desugar)
        return "(not (" + text_of(x.kids[0], desugar) + ") or (" + text_of(x.kids[1], desugar) + "))";
      return "(if " + text_of(x.kids[0], desugar) + " then " + text_of(x.kids[1], desugar) + ")";
  }
  return "";
}

int atoms_in(const Expr& x) {
  if (x.kind == Expr::Atom) return 1;
  int n = 0;
  for (auto& k : x.kids) n += atoms_in(k);
  return n;
}

// view[k]: 0 unset, 1 "y", 2 "n". Atoms over unset attributes are false.
bool truth(const Expr& x, const std::vector<int>& view) {
  switch (x.kind) {
    case Expr::Atom: return x.neq ? view[x.attr] == 2 : view[x.attr] == 1;
    case Expr::Not: return !truth(x.kids[0], view);
    case Expr::And: return truth(x.kids[0], view) && truth(x.kids[1], view);
    case Expr::Or: return truth(x.kids[0], view) || truth(x.kids[1], view);
    case Expr::If: return !truth(x.kids[0], view) || truth(x.kids[1], view);
  }
  return false;
}

std::map<std::string, Value> view_of(const std::map<std::string, std::string>& m) {
  std::map<std::string, Value> v;
  for (auto& [k, s] : m) v[k] = s.size() >= 8 && s[2] == '_' ? Value::date(*Date::parse(s))
                                                             : Value::string(s);
  return v;
}

Outcome constraint_language(std::mt19937& rng) {
  Outcome o;
  long views = 0;
  for (int i = 0; i < 1000 && o.ok; ++i) {
    int budget = 1 + static_cast<int>(rng() % 6);
    Expr x = random_expr(rng, budget);
    if (atoms_in(x) > 6) {
      o.fail("generator produced more than 6 atoms");
      break;
    }
    std::string text = text_of(x, false);
    ConstraintPtr c, sugarless;
    try {
      c = parse_constraint(text);
      sugarless = parse_constraint(text_of(x, true));
    } catch (const Error& err) {
      o.fail("parse of " + text + ": " + err.what());
      break;
    }
    std::vector<int> view(6, 0);
    for (int code = 0; code < 729; ++code) {  // 3^6 assignments
      std::map<std::string, Value> v;
      for (int k = 0, rest = code; k < 6; ++k, rest /= 3) {
        view[k] = rest % 3;
        if (view[k]) v["a" + std::to_string(k)] = Value::string(view[k] == 1 ? "y" : "n");
      }
      ++views;
      bool want = truth(x, view);
      if (eval_constraint(*c, v) != want) {
        o.fail(text + " disagrees with the truth table at assignment " + std::to_string(code));
        break;
      }
      if (eval_constraint(*sugarless, v) != want) {
        o.fail("desugared " + text + " differs at assignment " + std::to_string(code));
        break;
      }
    }
  }

  // Documented readings of the three published expressions.
  using K = Constraint::Kind;
  auto c1 = parse_constraint("[recovery=Yes] and [system=unix] and [messages=English]");
  std::vector<const Constraint*> atoms;
  collect_atoms(*c1, atoms);
  bool conj = c1->kind == K::And && atoms.size() == 3;
  std::map<std::string, std::string> all{{"recovery", "Yes"}, {"system", "unix"},
                                         {"messages", "English"}};
  auto other = all;
  other["system"] = "VMS";
  if (!conj || !eval_constraint(*c1, view_of(all)) || eval_constraint(*c1, view_of(other)))
    o.fail("three-atom conjunction misread");

  auto c2 = parse_constraint("if [arguments=sorted] then [system=unix_4.3] or [recovery=no]");
  bool shape = c2->kind == K::Implies && c2->children.size() == 2 &&
               c2->children[1]->kind == K::Or;
  bool vacuous = eval_constraint(*c2, view_of({{"system", "VMS"}}));
  bool unmet = !eval_constraint(*c2, view_of({{"arguments", "sorted"}, {"system", "VMS"}}));
  bool by_recovery = eval_constraint(*c2, view_of({{"arguments", "sorted"}, {"recovery", "no"}}));
  if (!shape || !vacuous || !unmet || !by_recovery) o.fail("implication with disjunction misread");

  auto c3 = parse_constraint(
      "([reserved=Riad] or [author=Riad] or [state=official]) and [date>18_02_89]");
  bool after = eval_constraint(*c3, view_of({{"state", "official"}, {"date", "89_03_01"}}));
  bool before = eval_constraint(*c3, view_of({{"state", "official"}, {"date", "89_01_15"}}));
  bool nobody = eval_constraint(*c3, view_of({{"state", "draft"}, {"date", "89_03_01"}}));
  if (!after || before || nobody) o.fail("reservation expression misread");

  if (o.ok) o.detail = "1000 expressions, " + std::to_string(views) + " assignments";
  return o;
}

// ---------------------------------------------------------------- 8

Outcome trigger_ordering(std::mt19937& rng) {
  Outcome o;
  auto pick = [&](int n) { return static_cast<int>(rng() % n); };
  const int prios[] = {1, 5, 9};
  int fired = 0;
  for (int round = 0; round < 100 && o.ok; ++round) {
    int ntypes = 2 + pick(7);
    std::vector<int> parent(ntypes, -1), depth(ntypes, 1);
    for (int t = 1; t < ntypes; ++t) {
      std::vector<int> ok;
      for (int p = 0; p < t; ++p)
        if (depth[p] < 4) ok.push_back(p);
      parent[t] = ok[pick(static_cast<int>(ok.size()))];
      depth[t] = depth[parent[t]] + 1;
    }
    struct Trig { int type, prio, order; bool matches; std::string tag; };
    std::vector<Trig> trigs;
    std::string src = "DEFEVENT\n";
    for (int p : prios)
      src += "Go" + std::to_string(p) + " = [!cmd = go] PRIORITY " + std::to_string(p) +
             ";\nStop" + std::to_string(p) + " = [!cmd = stop] PRIORITY " + std::to_string(p) +
             ";\n";
    for (int t = 0; t < ntypes; ++t) {
      std::string name = "T" + std::to_string(t);
      src += "OBJECT " + name + (parent[t] >= 0 ? " IS T" + std::to_string(parent[t]) : "") + ";\n";
      if (t == 0) src += "  METHOD go DO print \"body\";\n";
      int k = pick(4);
      for (int j = 0; j < k; ++j) {
        Trig tr{t, prios[pick(3)], j, pick(5) != 0, name + "_" + std::to_string(j)};
        src += "  PRE ON " + std::string(tr.matches ? "Go" : "Stop") + std::to_string(tr.prio) +
               " DO print \"" + tr.tag + "\";\n";
        trigs.push_back(tr);
      }
      src += "END " + name + ";\n";
    }
    std::string tag = "configuration " + std::to_string(round) + ": ";
    Engine e;
    try {
      e.load(src);
    } catch (const Error& err) {
      o.fail(tag + "load failed: " + err.what());
      break;
    }
    int leaf = pick(ntypes);
    e.create_object("x", "T" + std::to_string(leaf));
    // distance from the receiver's type up its ancestry
    std::map<int, int> dist;
    for (int t = leaf, k = 0; t >= 0; t = parent[t], ++k) dist[t] = k;
    std::vector<Trig> want;
    for (auto& tr : trigs)
      if (tr.matches && dist.count(tr.type)) want.push_back(tr);
    std::stable_sort(want.begin(), want.end(), [&](const Trig& a, const Trig& b) {
      if (a.prio != b.prio) return a.prio > b.prio;
      if (dist[a.type] != dist[b.type]) return dist[a.type] < dist[b.type];
      return a.order < b.order;
    });
    auto r = e.invoke("x", "go");
    if (!r.committed) {
      o.fail(tag + "invoke aborted: " + r.message);
      break;
    }
    std::vector<std::string> want_out;
    for (auto& tr : want) want_out.push_back(tr.tag);
    want_out.push_back("body");
    if (r.output != want_out) o.fail(tag + "trigger output order differs");
    // properties read straight off the trace
    int last_prio = 10, last_dist = -1;
    for (auto& l : r.trace) {
      if (l.phase != "PRE" || l.nest != 0) continue;
      ++fired;
      int d = dist[std::stoi(l.source.substr(1))];
      if (l.priority > last_prio) o.fail(tag + "priority rises in trace");
      if (l.priority == last_prio && d < last_dist) o.fail(tag + "general before specific");
      if (l.priority != last_prio) last_dist = -1;
      last_prio = l.priority;
      last_dist = std::max(last_dist, d);
    }
  }
  if (o.ok) o.detail = "100 configurations, " + std::to_string(fired) + " triggers fired";
  return o;
}

// ---------------------------------------------------------------- 9

Outcome tempo_isolation(std::mt19937& rng) {
  Outcome o;
  auto pick = [&](int n) { return static_cast<int>(rng() % n); };
  ReleaseRun r("iso");
  const std::vector<std::string> users{"u1", "u2", "u1"};
  std::vector<std::string> we;
  for (auto& u : users) we.push_back(r.dev(u));
  const std::vector<std::string> values{"compiled", "edited"};
  const std::vector<std::string> modules{"M1", "M2", "M3"};
  std::map<std::pair<int, std::string>, std::string> model;  // (we, module) -> local state
  auto changes = [&](int d, const std::string& m) { return m == (users[d] == "u1" ? "M1" : "M2"); };
  int reads = 0, writes = 0;
  for (int op = 0; op < 1000 && o.ok; ++op) {
    int d = pick(3);
    const std::string& m = modules[pick(3)];
    std::string tag = "op " + std::to_string(op) + ": ";
    if (pick(2) == 0 && changes(d, m)) {
      std::string v = values[pick(2)];
      if (!r.t.set_role_attr(we[d], "to_change", m, "state", v).committed)
        o.fail(tag + "write refused");
      model[{d, m}] = v;
      ++writes;
      continue;
    }
    ++reads;
    std::string role = changes(d, m) ? "to_change" : "to_consult";
    Value got = r.t.role_attr(we[d], role, m, "state");
    auto it = model.find({d, m});
    std::string want = it == model.end() ? "" : it->second;
    if ((want.empty() && !got.is_unset()) || (!want.empty() && got.display() != want))
      o.fail(tag + we[d] + " reads " + got.display() + " for " + m + ", wrote '" + want + "'");
    if (!r.e.get(Item::object(m), "state").is_unset())
      o.fail(tag + "overlay value reached the shared object " + m);
  }
  if (o.ok) o.detail = std::to_string(writes) + " writes, " + std::to_string(reads) + " reads";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  unsigned seed = 20260401;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::strcmp(argv[i], "--seed") == 0) seed = static_cast<unsigned>(std::stoul(argv[i + 1]));

  struct Criterion {
    int id;
    const char* name;
    double limit_s;  // 0: no time bound
    std::function<Outcome(std::mt19937&)> run;
  };
  const std::vector<Criterion> all = {
      {1, "philosophers", 10, philosophers},
      {2, "change management", 5, [](std::mt19937&) { return change_management(); }},
      {3, "release", 30, [](std::mt19937&) { return release_scenario(); }},
      {4, "builder oracle", 60, builder_oracle},
      {5, "bound selection", 0, bound_selection},
      {6, "transaction atomicity", 0, atomicity},
      {7, "constraint language", 0, constraint_language},
      {8, "trigger ordering", 0, trigger_ordering},
      {9, "tempo isolation", 0, tempo_isolation},
  };
  int failures = 0;
  for (auto& c : all) {
    std::mt19937 rng(seed + static_cast<unsigned>(c.id));
    auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run(rng);
    } catch (const std::exception& ex) {
      out.fail(std::string("exception: ") + ex.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0 && secs >= c.limit_s)
      out.fail("took " + std::to_string(secs) + " s, limit " + std::to_string(c.limit_s) + " s");
    char timing[32];
    std::snprintf(timing, sizeof timing, "%.2f s", secs);
    std::cout << "criterion " << c.id << " " << (out.ok ? "PASS" : "FAIL") << " " << c.name
              << " (" << timing << "): " << out.detail << "\n";
    failures += !out.ok;
  }
  std::cout << (failures ? "acceptance FAILED" : "acceptance passed") << "\n";
  return failures ? 1 : 0;
}
