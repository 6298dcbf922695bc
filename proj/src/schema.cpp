#include "adl/schema.hpp"

#include <algorithm>
#include <functional>

namespace adl {

const char* coupling_name(Coupling c) {
  switch (c) {
    case Coupling::Pre: return "PRE";
    case Coupling::Post: return "POST";
    case Coupling::After: return "AFTER";
    case Coupling::Error: return "ERROR";
  }
  return "?";
}

const char* scope_name(Scope s) {
  switch (s) {
    case Scope::Entity: return "ENTITY";
    case Scope::Origin: return "ORIGIN";
    case Scope::Dest: return "DEST";
  }
  return "?";
}

const char* card_name(Cardinality c) {
  switch (c) {
    case Cardinality::OneOne: return "1:1";
    case Cardinality::OneMany: return "1:N";
    case Cardinality::ManyOne: return "N:1";
    case Cardinality::ManyMany: return "N:N";
  }
  return "?";
}

std::string AttributeDef::describe() const {
  std::string out = name + " : " + domain.describe();
  if (computed) out += " COMP \"" + *computed + "\"";
  if (default_value) out += " := " + default_value->display();
  if (initial) out += " INITIAL " + initial->display();
  return out;
}

std::string TriggerDef::summary() const {
  std::string ev = inline_event ? print_cond(*inline_event) : event;
  return ev + " DO " + (action ? print_stmt(*action) : "{ }");
}

const AttributeDef* ResolvedType::attribute(const std::string& n) const {
  auto it = attributes.find(n);
  return it == attributes.end() ? nullptr : &it->second;
}

const ResolvedMethod* ResolvedType::method(const std::string& n) const {
  auto it = methods.find(n);
  return it == methods.end() ? nullptr : &it->second;
}

std::string ResolvedType::state_attribute() const {
  for (auto& [n, a] : attributes)
    if (!a.builtin && iequals(n, "state")) return n;
  return "state";
}

std::string ResolvedType::describe() const {
  std::string out = (kind == TypeKind::Object ? "object " : "relation ") + name + "\n";
  out += "  is";
  for (auto& l : linearization) out += " " + l;
  out += "\n";
  for (auto& [n, a] : attributes) out += "  attr " + a.describe() + "\n";
  for (auto& [n, m] : methods) {
    out += "  method " + n + "(";
    for (std::size_t i = 0; i < m.def.params.size(); ++i) out += (i ? "," : "") + m.def.params[i];
    for (auto& [f, p] : m.def.flag_params) out += " -" + f + " %" + p;
    out += ") from " + m.owner;
    if (m.def.scope != Scope::Entity) out += std::string(" ") + scope_name(m.def.scope);
    out += " " + (m.def.body ? print_stmt(*m.def.body) : std::string("<event>")) + "\n";
  }
  for (auto& t : triggers) {
    out += std::string("  trigger ") + coupling_name(t.def.coupling) + " " +
           scope_name(t.def.scope) + (t.def.visibility == Visibility::Global ? " GLOBAL " : " ") +
           t.def.summary() + " from " + t.owner + "\n";
  }
  for (auto& d : domain) out += "  domain " + d.text + "\n";
  if (card) out += std::string("  card ") + card_name(*card) + "\n";
  if (structure != Structure::None)
    out += structure == Structure::Dag ? "  dag\n" : "  tree\n";
  if (composition) out += "  composition\n";
  return out;
}

Schema::Schema() {
  partitions_[kRoot] = Partition{kRoot, std::nullopt, {}};
  install_builtins();
}

void Schema::install_builtins() {
  auto attr = [](std::string n, DomainKind k) {
    AttributeDef a;
    a.name = std::move(n);
    a.domain = Domain::of(k);
    a.builtin = true;
    return a;
  };
  auto& root = partitions_[kRoot].overlay;

  TypeDef object;
  object.name = "object";
  object.builtin = true;
  for (auto* n : {"state", "status", "content", "constraints", "reserved", "author", "suffix"})
    object.attributes.push_back(attr(n, DomainKind::String));
  object.attributes.push_back(attr("date", DomainKind::Date));
  root[object.name] = object;

  TypeDef relation;
  relation.name = "relation";
  relation.kind = TypeKind::Relation;
  relation.builtin = true;
  for (auto* n : {"status", "state", "author"})
    relation.attributes.push_back(attr(n, DomainKind::String));
  relation.attributes.push_back(attr("date", DomainKind::Date));
  root[relation.name] = relation;

  auto simple = [&](std::string name, std::vector<AttributeDef> attrs = {}) {
    TypeDef t;
    t.name = std::move(name);
    t.supertypes = {"object"};
    t.attributes = std::move(attrs);
    t.builtin = true;
    root[t.name] = t;
  };
  simple("rset");
  simple("family");
  simple("interface");
  simple("realization");
  simple("file");
  simple("ws", {attr("owner", DomainKind::String), attr("dir", DomainKind::String)});
  simple("configuration", {attr("root", DomainKind::String), attr("where", DomainKind::String),
                           attr("select", DomainKind::String), attr("bound", DomainKind::String)});
  simple("process", {attr("user", DomainKind::String), attr("parent", DomainKind::String),
                     attr("tools", DomainKind::String), attr("ws", DomainKind::String)});

  auto rel = [&](std::string name, std::string from, std::string to,
                 std::optional<Cardinality> card, Structure st, bool comp) {
    TypeDef t;
    t.name = std::move(name);
    t.kind = TypeKind::Relation;
    t.supertypes = {"relation"};
    t.card = card;
    t.structure = st;
    t.composition = comp;
    t.builtin = true;
    if (!from.empty()) {
      DomainPair d;
      d.origin = parse_constraint("type = " + from);
      d.dest = parse_constraint("type = " + to);
      d.text = "type = " + from + " -> type = " + to;
      t.domain.push_back(d);
    }
    root[t.name] = t;
  };
  rel("part", "", "", Cardinality::OneMany, Structure::Dag, true);
  rel("composed_of", "", "", Cardinality::ManyMany, Structure::Dag, true);
  rel("contains", "family", "interface", Cardinality::OneMany, Structure::Dag, true);
  rel("is_realized", "interface", "realization", Cardinality::OneMany, Structure::Dag, true);
  rel("depends_on", "", "", Cardinality::ManyMany, Structure::Dag, false);
  rel("role", "", "", Cardinality::ManyMany, Structure::None, false);
}

const Schema::Partition& Schema::partition(const std::string& name) const {
  auto it = partitions_.find(name);
  if (it == partitions_.end()) throw Error("unknown partition '" + name + "'");
  return it->second;
}

void Schema::add_partition(const std::string& name, const std::string& parent) {
  if (partitions_.count(name)) throw Error("partition '" + name + "' already exists");
  partition(parent);
  partitions_[name] = Partition{name, parent, {}};
  cache_.clear();
}

std::vector<std::string> Schema::partitions() const {
  std::vector<std::string> out;
  for (auto& [n, p] : partitions_) out.push_back(n);
  return out;
}

std::vector<std::string> Schema::chain(const std::string& name) const {
  std::vector<std::string> out;
  const Partition* p = &partition(name);
  while (true) {
    out.push_back(p->name);
    if (!p->parent) break;
    p = &partition(*p->parent);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

const std::map<std::string, TypeDef>& Schema::overlay(const std::string& name) const {
  return partition(name).overlay;
}

bool Schema::visible(const std::string& type, const std::string& part) const {
  for (auto& p : chain(part))
    if (partition(p).overlay.count(type)) return true;
  return false;
}

std::optional<std::string> Schema::resolve_name(const std::string& name,
                                                const std::string& part) const {
  if (visible(name, part)) return name;
  std::optional<std::string> found;
  for (auto& t : type_names(part)) {
    if (iequals(t, name)) {
      if (found && *found != t) return std::nullopt;
      found = t;
    }
  }
  return found;
}

std::vector<std::string> Schema::type_names(const std::string& part) const {
  std::set<std::string> names;
  for (auto& p : chain(part))
    for (auto& [n, t] : partition(p).overlay) names.insert(n);
  return {names.begin(), names.end()};
}

std::vector<std::string> Schema::supertypes(const std::string& type,
                                            const std::string& part) const {
  std::vector<std::string> out;
  for (auto& p : chain(part)) {
    auto& ov = partition(p).overlay;
    auto it = ov.find(type);
    if (it == ov.end()) continue;
    for (auto& s : it->second.supertypes)
      if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  }
  return out;
}

std::vector<std::string> Schema::linearize(const std::string& type,
                                           const std::string& part) const {
  if (!visible(type, part)) throw Error("type '" + type + "' is not visible");
  std::vector<std::string> post;
  std::set<std::string> seen;
  std::function<void(const std::string&)> dfs = [&](const std::string& t) {
    if (!seen.insert(t).second) return;
    auto sup = supertypes(t, part);
    // right-to-left so that, after reversal, earlier supertypes come first
    for (auto it = sup.rbegin(); it != sup.rend(); ++it) dfs(*it);
    post.push_back(t);
  };
  dfs(type);
  std::reverse(post.begin(), post.end());
  return post;
}

bool Schema::is_subtype(const std::string& a, const std::string& b,
                        const std::string& part) const {
  if (a == b) return true;
  if (!visible(a, part)) return false;
  std::set<std::string> seen{a};
  std::vector<std::string> stack{a};
  while (!stack.empty()) {
    auto t = stack.back();
    stack.pop_back();
    auto next = supertypes(t, part);
    // a role type also derives from its base
    if (auto it = role_bases_.find(t); it != role_bases_.end()) next.push_back(it->second);
    for (auto& s : next) {
      if (s == b) return true;
      if (seen.insert(s).second) stack.push_back(s);
    }
  }
  return false;
}

void Schema::check_acyclic(const std::string& part) const {
  std::map<std::string, int> color;
  std::function<void(const std::string&)> dfs = [&](const std::string& t) {
    color[t] = 1;
    for (auto& s : supertypes(t, part)) {
      if (color[s] == 1) throw Error("cycle in supertypes involving '" + s + "'");
      if (color[s] == 0) dfs(s);
    }
    color[t] = 2;
  };
  for (auto& t : type_names(part))
    if (color[t] == 0) dfs(t);
}

std::string Schema::define_type(TypeDef def, const std::string& part) {
  const Partition& target = partition(part);
  if (target.overlay.count(def.name))
    throw Error("type '" + def.name + "' is already defined in partition '" + part + "'");

  // duplicates collapse, order of first mention kept
  std::vector<std::string> sup;
  for (auto& s : def.supertypes) {
    auto resolved = resolve_name(s, part);
    if (!resolved) throw Error("unknown supertype '" + s + "' for '" + def.name + "'");
    if (*resolved == def.name) throw Error("cycle in supertypes: '" + def.name + "' inherits itself");
    if (std::find(sup.begin(), sup.end(), *resolved) == sup.end()) sup.push_back(*resolved);
  }

  bool refinement = visible(def.name, part);
  std::shared_ptr<const ResolvedType> inherited;
  if (refinement) {
    inherited = effective(def.name, part);
    if (inherited->kind != def.kind)
      throw Error("redefinition of '" + def.name + "' changes its kind");
    if (!sup.empty()) {
      for (auto& s : supertypes(def.name, part))
        if (std::find(sup.begin(), sup.end(), s) == sup.end())
          throw Error("redefinition of '" + def.name +
                      "' deletes inherited attributes of supertype '" + s + "'");
    }
    for (auto& a : def.attributes) {
      if (auto* old = inherited->attribute(a.name); old && !a.domain.widens(old->domain))
        throw Error("redefinition of attribute '" + a.name + "' in '" + def.name +
                    "' narrows its domain");
    }
  } else if (sup.empty() && !def.builtin) {
    sup.push_back(def.kind == TypeKind::Object ? "object" : "relation");
  }

  for (auto& s : sup) {
    auto st = effective(s, part);
    if (st->kind != def.kind)
      throw Error("supertype '" + s + "' of '" + def.name + "' has a different kind");
  }
  if (def.kind == TypeKind::Object &&
      (!def.domain.empty() || def.card || def.structure != Structure::None || def.composition))
    throw Error("object type '" + def.name + "' cannot declare DOMAIN, CARD or structure");

  for (auto& a : def.attributes) {
    if (a.domain.kind == DomainKind::Enumeration || a.domain.kind == DomainKind::SetOf) {
      if (a.domain.values.empty())
        throw Error("attribute '" + a.name + "' has an empty value list");
      std::set<std::string> uniq(a.domain.values.begin(), a.domain.values.end());
      if (uniq.size() != a.domain.values.size())
        throw Error("attribute '" + a.name + "' lists a value twice");
    }
    if (a.default_value && !a.domain.contains(*a.default_value))
      throw Error("default of attribute '" + a.name + "' is outside its domain");
    if (a.initial && !a.domain.contains(*a.initial))
      throw Error("initial value of attribute '" + a.name + "' is outside its domain");
  }
  for (auto& m : def.methods) m.owner = def.name;

  def.supertypes = sup;
  std::string name = def.name;
  auto& ov = partitions_[part].overlay;
  ov[name] = std::move(def);
  cache_.clear();
  try {
    check_acyclic(part);
  } catch (...) {
    ov.erase(name);
    cache_.clear();
    throw;
  }
  return name;
}

void Schema::define_event(EventRule rule) {
  events_[rule.name] = std::move(rule);
  cache_.clear();
}

void Schema::define_method(MethodDef m) {
  m.owner.clear();
  free_methods_[m.name] = std::move(m);
}

const RoleDef* ProcessDef::role(const std::string& n) const {
  for (auto& r : roles)
    if (r.name == n) return &r;
  for (auto& r : roles)
    if (iequals(r.name, n)) return &r;
  return nullptr;
}

void Schema::define_process(ProcessDef p) {
  for (auto& r : p.roles) {
    const RoleDef* parent = p.role(r.base);
    role_bases_[r.relation] = parent && parent != &r ? parent->relation : r.base;
  }
  processes_[p.name] = std::move(p);
  cache_.clear();
}

const ProcessDef* Schema::process(const std::string& name) const {
  auto it = processes_.find(name);
  if (it != processes_.end()) return &it->second;
  for (auto& [n, p] : processes_)
    if (iequals(n, name)) return &p;
  return nullptr;
}

std::optional<std::pair<std::string, std::string>> Schema::role_of(
    const std::string& relation) const {
  for (auto& [n, p] : processes_)
    for (auto& r : p.roles)
      if (r.relation == relation) return std::make_pair(n, r.name);
  return std::nullopt;
}

const EventRule* Schema::event(const std::string& name) const {
  auto it = events_.find(name);
  if (it != events_.end()) return &it->second;
  for (auto& [n, r] : events_)
    if (iequals(n, name)) return &r;
  return nullptr;
}

const MethodDef* Schema::free_method(const std::string& name) const {
  auto it = free_methods_.find(name);
  if (it != free_methods_.end()) return &it->second;
  for (auto& [n, m] : free_methods_)
    if (iequals(n, name)) return &m;
  return nullptr;
}

std::shared_ptr<const ResolvedType> Schema::effective(const std::string& type,
                                                      const std::string& part) const {
  auto key = std::make_pair(type, part);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  if (!visible(type, part))
    throw Error("type '" + type + "' is not visible in partition '" + part + "'");

  auto r = std::make_shared<ResolvedType>();
  r->name = type;
  r->linearization = linearize(type, part);
  auto parts = chain(part);

  // general to specific so that specific definitions overwrite
  for (auto it = r->linearization.rbegin(); it != r->linearization.rend(); ++it) {
    for (auto& p : parts) {
      auto& ov = partition(p).overlay;
      auto f = ov.find(*it);
      if (f == ov.end()) continue;
      const TypeDef& d = f->second;
      if (*it == type) r->kind = d.kind;
      for (auto& a : d.attributes) {
        auto& slot = r->attributes[a.name];
        // refinements may restate an attribute without repeating its default
        std::optional<Value> keep_default = slot.default_value;
        std::optional<Value> keep_initial = slot.initial;
        bool had = !slot.name.empty();
        slot = a;
        if (had && !a.default_value) slot.default_value = keep_default;
        if (had && !a.initial) slot.initial = keep_initial;
      }
      for (auto& m : d.methods) r->methods[m.name] = ResolvedMethod{m, d.name};
      if (!d.domain.empty()) r->domain = d.domain;
      if (d.card) r->card = d.card;
      if (d.structure != Structure::None) r->structure = d.structure;
      if (d.composition) r->composition = true;
    }
  }
  // the root kind decides for types that only appear through refinements
  if (r->linearization.back() == "relation") r->kind = TypeKind::Relation;

  int depth = 0;
  for (auto& t : r->linearization) {
    int order = 0;
    for (auto& p : parts) {
      auto& ov = partition(p).overlay;
      auto f = ov.find(t);
      if (f == ov.end()) continue;
      for (auto& trig : f->second.triggers)
        r->triggers.push_back(ResolvedTrigger{trig, t, depth, order++});
    }
    ++depth;
  }
  cache_[key] = r;
  return r;
}

}  // namespace adl
