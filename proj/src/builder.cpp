#include "adl/builder.hpp"

#include <algorithm>
#include <deque>
#include <functional>

namespace adl {

namespace {

// The first atom that evaluates false, or the whole constraint.
std::string failing_atom(const Constraint& c, const std::map<std::string, Value>& view) {
  std::vector<const Constraint*> atoms;
  collect_atoms(c, atoms);
  for (auto* a : atoms)
    if (!eval_constraint(*a, view)) return print_constraint(*a);
  return print_constraint(c);
}

bool holds(const ConstraintPtr& c, const std::map<std::string, Value>& view) {
  return !c || eval_constraint(*c, view);
}

}  // namespace

// ------------------------------------------------------------------ product model

void ProductModel::add(PmNode n) {
  std::sort(n.depends_on.begin(), n.depends_on.end());
  std::string name = n.name;
  nodes[name] = std::move(n);
}

const PmNode& ProductModel::node(const std::string& name) const {
  auto it = nodes.find(name);
  if (it == nodes.end()) throw Error("unknown product model node " + name);
  return it->second;
}

std::vector<std::string> ProductModel::members(const std::string& owner) const {
  std::vector<std::string> out;
  for (auto& [n, node] : nodes)
    if (node.owner == owner && node.kind != NodeKind::Family) out.push_back(n);
  return out;
}

std::vector<std::string> ProductModel::problems() const {
  std::vector<std::string> out;
  for (auto& [n, node] : nodes) {
    if (node.kind == NodeKind::Interface) {
      auto it = nodes.find(node.owner);
      if (it == nodes.end() || it->second.kind != NodeKind::Family)
        out.push_back("interface " + n + " belongs to no family");
    } else if (node.kind == NodeKind::Realization) {
      auto it = nodes.find(node.owner);
      if (it == nodes.end() || it->second.kind != NodeKind::Interface)
        out.push_back("realization " + n + " belongs to no interface");
    }
    for (auto& d : node.depends_on) {
      auto it = nodes.find(d);
      if (it == nodes.end() || it->second.kind == NodeKind::Family)
        out.push_back(n + " depends_on " + d + ", which is not an interface or realization");
    }
  }
  // depends_on must stay acyclic
  std::map<std::string, int> mark;
  std::function<bool(const std::string&)> cyclic = [&](const std::string& n) {
    int& m = mark[n];
    if (m == 1) return true;
    if (m == 2) return false;
    m = 1;
    auto it = nodes.find(n);
    if (it != nodes.end())
      for (auto& d : it->second.depends_on)
        if (nodes.count(d) && cyclic(d)) return true;
    mark[n] = 2;
    return false;
  };
  for (auto& [n, node] : nodes)
    if (!mark[n] && cyclic(n)) {
      out.push_back("depends_on has a cycle through " + n);
      break;
    }
  return out;
}

ProductModel ProductModel::from_store(const Engine& e) {
  ProductModel pm;
  const Database& db = e.db();
  for (auto& [name, rec] : db.objects()) {
    if (rec.deleted) continue;
    std::optional<NodeKind> kind;
    for (auto& t : e.schema().linearize(rec.type, rec.partition)) {
      if (t == "family") kind = NodeKind::Family;
      if (t == "interface") kind = NodeKind::Interface;
      if (t == "realization") kind = NodeKind::Realization;
      if (kind) break;
    }
    if (!kind) continue;
    PmNode n;
    n.name = name;
    n.kind = *kind;
    for (auto& [a, v] : rec.attrs) {
      if (a == "constraints") {
        std::string text = v.display();
        if (!text.empty()) n.constraint = parse_constraint(text);
      } else if (a != "content") {
        n.attrs[a] = v;
      }
    }
    const char* owner_rel = *kind == NodeKind::Interface     ? "contains"
                            : *kind == NodeKind::Realization ? "is_realized"
                                                             : nullptr;
    if (owner_rel)
      for (auto& k : db.incoming(name))
        if (k.rel == owner_rel) n.owner = k.origin;
    for (auto& k : db.outgoing(name))
      if (k.rel == "depends_on") n.depends_on.push_back(k.dest);
    pm.add(std::move(n));
  }
  return pm;
}

// ------------------------------------------------------------------ consistency

std::vector<std::string> SystemModel::nodes() const {
  std::vector<std::string> out = interfaces;
  for (auto& [i, r] : realization) out.push_back(r);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string Violation::render() const {
  static const char* names[] = {"closure", "rule 1", "rule 2", "rule 3"};
  return std::string(names[rule]) + ": " + node + ": " + detail;
}

std::map<std::string, std::vector<std::string>> selected_graph(const ProductModel& pm,
                                                               const SystemModel& sm) {
  std::map<std::string, std::vector<std::string>> g;
  std::set<std::string> ifaces(sm.interfaces.begin(), sm.interfaces.end());
  auto selected = [&](const std::string& n) {
    auto it = pm.nodes.find(n);
    if (it == pm.nodes.end()) return false;
    if (it->second.kind == NodeKind::Interface) return ifaces.count(n) > 0;
    if (it->second.kind == NodeKind::Realization) {
      auto r = sm.realization.find(it->second.owner);
      return r != sm.realization.end() && r->second == n;
    }
    return false;
  };
  for (auto& i : sm.interfaces) {
    if (!pm.nodes.count(i)) continue;
    g[pm.node(i).owner].push_back(i);
    auto r = sm.realization.find(i);
    if (r != sm.realization.end()) g[i].push_back(r->second);
  }
  for (auto& n : sm.nodes()) {
    if (!pm.nodes.count(n)) continue;
    for (auto& d : pm.node(n).depends_on)
      if (selected(d)) g[n].push_back(d);
  }
  for (auto& [n, out] : g) {
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }
  return g;
}

std::vector<Violation> check_model_consistency(const ProductModel& pm, const SystemModel& sm) {
  std::vector<Violation> out;
  std::set<std::string> ifaces(sm.interfaces.begin(), sm.interfaces.end());
  for (auto& n : sm.nodes())
    if (!pm.nodes.count(n)) out.push_back({0, n, "not in the product model"});
  if (!out.empty()) return out;

  // Closure: root selected, every interface realized once, depends_on targets present.
  if (!ifaces.count(sm.root)) out.push_back({0, sm.root, "root interface not selected"});
  for (auto& i : sm.interfaces) {
    auto r = sm.realization.find(i);
    if (r == sm.realization.end())
      out.push_back({0, i, "no realization selected"});
    else if (pm.node(r->second).owner != i)
      out.push_back({0, r->second, "does not realize " + i});
  }
  for (auto& [i, r] : sm.realization)
    if (!ifaces.count(i)) out.push_back({0, r, "its interface " + i + " is not selected"});
  for (auto& n : sm.nodes())
    for (auto& d : pm.node(n).depends_on) {
      const PmNode& t = pm.node(d);
      bool ok = t.kind == NodeKind::Interface
                    ? ifaces.count(d) > 0
                    : sm.realization.count(t.owner) && sm.realization.at(t.owner) == d;
      if (!ok) out.push_back({0, n, "depends_on " + d + " which is not selected"});
    }
  auto g = selected_graph(pm, sm);
  std::set<std::string> reached{sm.root};
  std::deque<std::string> todo{sm.root};
  while (!todo.empty()) {
    std::string n = todo.front();
    todo.pop_front();
    for (auto& t : g[n])
      if (reached.insert(t).second) todo.push_back(t);
  }
  for (auto& n : sm.nodes())
    if (!reached.count(n)) out.push_back({0, n, "not reachable from " + sm.root});

  // Rule 1
  std::map<std::string, std::vector<std::string>> per_family;
  for (auto& i : sm.interfaces) per_family[pm.node(i).owner].push_back(i);
  for (auto& [f, is] : per_family)
    if (is.size() > 1) {
      std::string list;
      for (auto& i : is) list += (list.empty() ? "" : ", ") + i;
      out.push_back({1, f, "interfaces " + list});
    }

  // Rule 2 and rule 3 constrain the realizations.
  std::map<std::string, std::vector<std::string>> parents;
  for (auto& [from, tos] : g)
    for (auto& t : tos) parents[t].push_back(from);
  for (auto& [i, r] : sm.realization) {
    const PmNode& rn = pm.node(r);
    if (!holds(sm.where, rn.attrs)) out.push_back({2, r, failing_atom(*sm.where, rn.attrs)});
    std::set<std::string> seen;
    std::deque<std::string> q{r};
    while (!q.empty()) {
      std::string n = q.front();
      q.pop_front();
      for (auto& p : parents[n])
        if (seen.insert(p).second) q.push_back(p);
    }
    for (auto& a : seen) {
      auto it = pm.nodes.find(a);
      if (it == pm.nodes.end() || !it->second.constraint) continue;
      if (!eval_constraint(*it->second.constraint, rn.attrs))
        out.push_back({3, r, "ancestor " + a + ": " +
                                 failing_atom(*it->second.constraint, rn.attrs)});
    }
  }
  return out;
}

// ------------------------------------------------------------------ search

namespace {

struct SearchState {
  std::map<std::string, std::string> family;  // family -> interface
  std::set<std::string> interfaces;
  std::map<std::string, std::string> realization;
};

class Search {
 public:
  Search(const ProductModel& pm, std::string root, ConstraintPtr where)
      : pm_(pm), root_(std::move(root)), where_(std::move(where)) {}

  std::optional<SystemModel> run() {
    SearchState s;
    if (!select(s, root_)) {
      fail(0, {1, root_, "conflicting selection"});
      return std::nullopt;
    }
    return solve(s);
  }

  std::string failure() const { return failure_; }

 private:
  bool select(SearchState& s, const std::string& name) {
    const PmNode& n = pm_.node(name);
    if (n.kind == NodeKind::Interface) {
      auto f = s.family.find(n.owner);
      if (f != s.family.end()) return f->second == name;
      s.family[n.owner] = name;
      s.interfaces.insert(name);
    } else if (n.kind == NodeKind::Realization) {
      auto r = s.realization.find(n.owner);
      if (r != s.realization.end()) return r->second == name;
      s.realization[n.owner] = name;
      if (!select(s, n.owner)) return false;
    } else {
      return false;
    }
    for (auto& d : n.depends_on)
      if (!select(s, d)) return false;
    return true;
  }

  SystemModel model_of(const SearchState& s) const {
    SystemModel sm;
    sm.root = root_;
    sm.where = where_;
    sm.interfaces.assign(s.interfaces.begin(), s.interfaces.end());
    sm.realization = s.realization;
    return sm;
  }

  void fail(std::size_t depth, const Violation& v) {
    if (failure_.empty() || depth > depth_) {
      depth_ = depth;
      failure_ = v.render();
    }
  }

  std::optional<SystemModel> solve(const SearchState& s) {
    std::string open;
    for (auto& i : s.interfaces)
      if (!s.realization.count(i)) {
        open = i;
        break;
      }
    std::size_t depth = s.interfaces.size() + s.realization.size();
    if (open.empty()) {
      SystemModel sm = model_of(s);
      auto v = check_model_consistency(pm_, sm);
      if (v.empty()) return sm;
      fail(depth, v.front());
      return std::nullopt;
    }
    auto reals = pm_.members(open);
    if (reals.empty()) fail(depth, {0, open, "has no realization"});
    for (auto& r : reals) {
      const PmNode& rn = pm_.node(r);
      if (!holds(where_, rn.attrs)) {
        fail(depth + 1, {2, r, failing_atom(*where_, rn.attrs)});
        continue;
      }
      SearchState next = s;
      if (!select(next, r)) {
        fail(depth + 1, {1, r, "needs an interface whose family already has another"});
        continue;
      }
      if (auto sm = solve(next)) return sm;
    }
    return std::nullopt;
  }

  const ProductModel& pm_;
  std::string root_;
  ConstraintPtr where_;
  std::string failure_;
  std::size_t depth_ = 0;
};

}  // namespace

SystemModel build_system_model(const ProductModel& pm, const std::string& root,
                               ConstraintPtr where) {
  auto problems = pm.problems();
  if (!problems.empty()) throw Error("inconsistent product model: " + problems.front());
  auto it = pm.nodes.find(root);
  if (it == pm.nodes.end() || it->second.kind != NodeKind::Interface)
    throw Error("root " + root + " is not an interface");
  if (where && where->is_true()) where = nullptr;
  Search s(pm, root, where);
  auto sm = s.run();
  if (!sm) throw Error("no consistent selection from " + root + ": " + s.failure());
  return *sm;
}

// ------------------------------------------------------------------ bound configurations

std::map<std::string, Value> revision_view(const Revision& r) {
  std::map<std::string, Value> v = r.snapshot;
  if (!v.count("date") || v["date"].is_unset()) v["date"] = Value::date(r.timestamp);
  if (!v.count("author") || v["author"].is_unset()) v["author"] = Value::string(r.author);
  v["revision"] = Value::integer(r.number);
  return v;
}

BoundConfiguration instantiate_configuration(const Engine& e, const SystemModel& sm,
                                             ConstraintPtr select, const std::string& model) {
  if (select && select->is_true()) select = nullptr;
  BoundConfiguration b{model, select, {}};
  for (auto& [i, r] : sm.realization) {
    const ObjectRec* rec = e.db().object(r);
    if (!rec) throw Error("unknown variant " + r);
    const Branch* br = rec->branch("main");
    int best = 0;
    if (br)
      for (auto& rev : br->revisions)
        if (holds(select, revision_view(rev))) best = std::max(best, rev.number);
    if (!best)
      throw Error("no revision of " + r + " satisfies " +
                  (select ? print_constraint(*select) : std::string("the empty predicate")));
    b.revisions[r] = best;
  }
  return b;
}

std::set<std::string> build_object_closure(const Engine& e, const std::string& root,
                                           const std::vector<std::string>& relations,
                                           ConstraintPtr filter) {
  std::set<std::string> rels;
  for (auto& r : relations) rels.insert(to_lower(r));
  if (rels == std::set<std::string>{"depends_on", "is_realized"}) {
    auto sm = build_system_model(ProductModel::from_store(e), root, filter);
    auto n = sm.nodes();
    return {n.begin(), n.end()};
  }
  if (!e.db().object(root)) throw Error("unknown object " + root);
  for (auto& r : rels)
    if (!e.schema().resolve_name(r)) throw Error("unknown relation " + r);
  std::set<std::string> seen{root};
  std::deque<std::string> q{root};
  while (!q.empty()) {
    std::string n = q.front();
    q.pop_front();
    for (auto& k : e.db().outgoing(n)) {
      if (!rels.count(to_lower(k.rel)) || seen.count(k.dest)) continue;
      const ObjectRec* d = e.db().object(k.dest);
      if (!d || !holds(filter, d->attrs)) continue;
      seen.insert(k.dest);
      q.push_back(k.dest);
    }
  }
  return seen;
}

std::vector<std::string> component_listing(const ProductModel& pm, const SystemModel& sm,
                                           const BoundConfiguration* bound) {
  std::vector<std::string> out;
  for (auto& i : sm.interfaces) {
    std::string line = pm.node(i).owner + "/" + i;
    auto r = sm.realization.find(i);
    if (r != sm.realization.end()) {
      line += "/" + r->second;
      if (bound && bound->revisions.count(r->second))
        line += "@" + std::to_string(bound->revisions.at(r->second));
    }
    out.push_back(line);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ------------------------------------------------------------------ persistence

namespace {

void store_common(Engine& e, const std::string& name, const SystemModel& sm) {
  e.do_create_object(name, "configuration");
  Item self = Item::object(name);
  e.do_write(self, "root", Value::string(sm.root));
  if (sm.where) e.do_write(self, "where", Value::string(print_constraint(*sm.where)));
  for (auto& n : sm.nodes()) e.do_create_relation(RelKey{name, "composed_of", n});
}

}  // namespace

void do_store_system_model(Engine& e, const std::string& name, const SystemModel& sm) {
  store_common(e, name, sm);
}

SystemModel load_system_model(const Engine& e, const std::string& name) {
  const ObjectRec* rec = e.db().object(name);
  if (!rec || !e.schema().is_subtype(rec->type, "configuration", rec->partition))
    throw Error(name + " is not a configuration");
  ProductModel pm = ProductModel::from_store(e);
  SystemModel sm;
  auto attr = [&](const char* a) {
    auto it = rec->attrs.find(a);
    return it == rec->attrs.end() ? std::string() : it->second.display();
  };
  sm.root = attr("root");
  std::string where = attr("where");
  if (!where.empty()) sm.where = parse_constraint(where);
  for (auto& k : e.db().outgoing(name)) {
    if (k.rel != "composed_of") continue;
    auto it = pm.nodes.find(k.dest);
    if (it == pm.nodes.end()) continue;
    if (it->second.kind == NodeKind::Interface) sm.interfaces.push_back(k.dest);
    if (it->second.kind == NodeKind::Realization) sm.realization[it->second.owner] = k.dest;
  }
  std::sort(sm.interfaces.begin(), sm.interfaces.end());
  return sm;
}

void do_store_bound(Engine& e, const std::string& name, const SystemModel& sm,
                    const BoundConfiguration& b) {
  store_common(e, name, sm);
  Item self = Item::object(name);
  if (b.select) e.do_write(self, "select", Value::string(print_constraint(*b.select)));
  std::string bound;
  for (auto& [r, n] : b.revisions) bound += (bound.empty() ? "" : ",") + r + "@" + std::to_string(n);
  e.do_write(self, "bound", Value::string(bound));
  e.do_new_revision(name);
}

}  // namespace adl
