#include "adl/tempo.hpp"

#include <algorithm>
#include <memory>

#include "adl/merge.hpp"

namespace adl {

namespace {

const RoleDef* parent_role(const ProcessDef& p, const RoleDef& r) {
  if (iequals(r.base, r.name)) return nullptr;
  return p.role(r.base);
}

std::string join_list(const std::vector<std::string>& v) {
  std::string s;
  for (auto& x : v) s += (s.empty() ? "" : ",") + x;
  return s;
}

}  // namespace

bool Tempo::supported_kind(const std::string& kind) {
  std::string k = to_lower(kind);
  return k == "notify" || k == "resynch" || k == "merge";
}

Tempo::Tempo(Engine& e) : e_(e), ws_(e) {
  e_.set_role_factory([this](const std::string& parent, const std::string& role) {
    const ProcessDef& p = process_of(parent);
    const RoleDef* r = p.role(role);
    if (!r) e_.abort("process " + p.name + " has no role " + role);
    if (!e_.schema().process(r->base)) e_.abort("role " + role + " is not a sub-process role");
    ProcessRequest req;
    req.type = r->base;
    req.parent = parent;
    req.role = r->name;
    auto it = e_.db().wes().find(parent);
    if (it != e_.db().wes().end()) req.user = it->second.user;
    // The new environment works on the parent's plain objects.
    std::set<std::string> seen;
    for (auto& pr : p.roles)
      if (!e_.schema().process(pr.base))
        for (auto& o : bound(parent, pr.name))
          if (seen.insert(o).second) req.objects.push_back(o);
    std::string name;
    do_instantiate(req, name);
  });
  e_.add_commit_hook(
      [this](const Engine::CommitInfo& info, const Engine::Schedule& s) { on_commit(info, s); });
}

const ProcessDef& Tempo::process_of(const std::string& instance) const {
  const ObjectRec* rec = e_.db().any_object(instance);
  if (!rec) throw Error("unknown process instance " + instance);
  if (auto* p = e_.schema().process(rec->type)) return *p;
  for (auto& t : e_.schema().linearize(rec->type, rec->partition))
    if (auto* p = e_.schema().process(t)) return *p;
  throw Error(instance + " is not a process instance");
}

std::vector<std::string> Tempo::bound(const std::string& we, const std::string& role) const {
  const RoleDef* r = process_of(we).role(role);
  if (!r) throw Error("unknown role " + role);
  std::vector<std::string> out;
  for (auto& k : e_.db().outgoing(we))
    if (k.rel == r->relation) out.push_back(k.dest);
  return out;
}

std::string Tempo::role_name(const std::string&, const RelKey& k) const {
  auto r = e_.schema().role_of(k.rel);
  return r ? r->second : k.rel;
}

// ------------------------------------------------------------------ instantiation

std::string Tempo::instantiate(const ProcessRequest& req, TxResult* result) {
  std::string name;
  auto r = e_.run("proc new " + req.type, [&] { do_instantiate(req, name); });
  if (result) *result = r;
  if (!r.committed) throw Error(r.message, ErrorKind::Aborted);
  return name;
}

void Tempo::do_instantiate(const ProcessRequest& req, std::string& name) {
  const ProcessDef* p = e_.schema().process(req.type);
  if (!p) {
    if (auto n = e_.schema().resolve_name(req.type)) p = e_.schema().process(*n);
  }
  if (!p) e_.abort("unknown process type " + req.type);
  name = req.name;
  if (name.empty())
    for (int n = 1; name.empty() || e_.db().any_object(name); ++n)
      name = p->name + "_" + std::to_string(n);
  std::string user = req.user.empty() ? e_.session().user : req.user;

  e_.do_create_object(name, p->name);
  Item inst = Item::object(name);
  e_.do_write(inst, "user", Value::string(user));
  if (!req.parent.empty()) e_.do_write(inst, "parent", Value::string(req.parent));
  if (!req.tools.empty()) e_.do_write(inst, "tools", Value::string(join_list(req.tools)));

  std::vector<std::string> objects = req.objects;
  std::sort(objects.begin(), objects.end());
  objects.erase(std::unique(objects.begin(), objects.end()), objects.end());
  for (auto& o : objects)
    if (!e_.db().object(o)) e_.abort("unknown object " + o);

  std::string ws;
  if (!e_.work_root().empty()) {
    ws = name;
    ws_.do_make_context(name, objects);
    ws_.do_checkout(ws, name, e_.work_root() / name, user);
    e_.do_write(inst, "ws", Value::string(ws));
  }
  e_.db().put_we(WeRec{name, p->name, user, ws, req.parent, req.tools});
  bind_objects(*p, name, objects);

  if (!req.parent.empty()) {
    const ProcessDef& pp = process_of(req.parent);
    const RoleDef* r = pp.role(req.role);
    if (!r) e_.abort("process " + pp.name + " has no role " + req.role);
    if (!e_.schema().is_subtype(p->name, r->base))
      e_.abort("role " + r->name + " of " + pp.name + " expects " + r->base + ", not " + p->name);
    e_.do_create_relation(RelKey{req.parent, r->relation, name});
    do_connect_roles(req.parent);
  }
}

void Tempo::bind_objects(const ProcessDef& p, const std::string& inst,
                         const std::vector<std::string>& objects) {
  for (auto& o : objects) {
    const ObjectRec* rec = e_.db().object(o);
    // Unfiltered roles over plain object types accept the object first.
    std::vector<const RoleDef*> roots;
    for (auto& r : p.roles) {
      if (parent_role(p, r) || e_.schema().process(r.base)) continue;
      auto base = e_.schema().resolve_name(r.base, rec->partition);
      if (base && e_.schema().is_subtype(rec->type, *base, rec->partition)) roots.push_back(&r);
    }
    if (roots.empty()) e_.abort("no role of " + p.name + " accepts " + o + " (" + rec->type + ")");
    if (roots.size() > 1)
      e_.abort(o + " is bindable to sibling roles " + roots[0]->name + " and " + roots[1]->name);
    const RoleDef* cur = roots[0];
    // Then it moves down to the most derived role whose filter holds.
    while (true) {
      std::vector<const RoleDef*> next;
      for (auto& r : p.roles) {
        if (parent_role(p, r) != cur) continue;
        bool ok = true;
        if (r.filter) {
          Frame f;
          f.self = f.receiver = Item::object(o);
          f.cmd = "bind";
          f.we = inst;
          try {
            ok = e_.eval_cond(*r.filter, f);
          } catch (const AbortSignal&) {
            ok = false;
          }
        }
        if (ok) next.push_back(&r);
      }
      if (next.empty()) break;
      if (next.size() > 1)
        e_.abort(o + " is bindable to sibling roles " + next[0]->name + " and " + next[1]->name);
      cur = next[0];
    }
    e_.do_create_relation(RelKey{inst, cur->relation, o});
  }
}

void Tempo::do_connect_roles(const std::string& parent) {
  const ProcessDef& pp = process_of(parent);
  for (auto& c : pp.connections) {
    for (auto& k : c.kinds)
      if (!supported_kind(k)) e_.abort("connection kind " + k + " is not implemented");
    std::vector<std::string> left = bound(parent, c.left_role);
    std::vector<std::string> right = bound(parent, c.right_role);
    auto split_path = [](const std::string& path) {
      auto dot = path.find('.');
      if (dot == std::string::npos) return std::pair<std::string, std::string>{"", path};
      return std::pair{path.substr(0, dot), path.substr(dot + 1)};
    };
    auto [lrole, lattr] = split_path(c.left_path);
    auto [rrole, rattr] = split_path(c.right_path);
    auto holders = [&](const std::string& we, const std::string& role) {
      std::vector<RelKey> out;
      const RoleDef* r = process_of(we).role(role);
      if (!r) return out;
      for (auto& k : e_.db().outgoing(we))
        if (k.rel == r->relation) out.push_back(k);
      return out;
    };
    for (auto& target : left)
      for (auto& source : right) {
        if (target == source) continue;
        for (auto& tk : holders(target, lrole))
          for (auto& sk : holders(source, rrole)) {
            Value tv = e_.get(Item::object(tk.dest, tk), lattr, target);
            Value sv = e_.get(Item::object(sk.dest, sk), rattr, source);
            if (tv.is_unset() || tv.display() != sv.display()) continue;
            std::string id = c.name + ":" + target + "<" + source + ":" + tk.dest;
            if (tk.dest != sk.dest) id += "/" + sk.dest;
            if (e_.db().connections().count(id)) continue;
            e_.db().put_connection(ConnectionRec{id, c.name, parent, target, lrole, tk.dest, source,
                                                 rrole, sk.dest, "idle"});
          }
      }
  }
}

// ------------------------------------------------------------------ role access

RelKey Tempo::binding(const std::string& we, const std::string& object,
                      const std::string& role) const {
  if (!e_.db().wes().count(we)) throw Error("unknown work environment " + we);
  auto k = e_.role_binding(we, object);
  if (!k) throw Error(object + " is not bound in " + we);
  if (!role.empty() && !iequals(role_name(we, *k), role))
    throw Error(object + " plays " + role_name(we, *k) + ", not " + role + ", in " + we);
  return *k;
}

Value Tempo::role_attr(const std::string& we, const std::string& role, const std::string& object,
                       const std::string& attr) const {
  RelKey k = binding(we, object, role);
  return e_.get(Item::object(object, k), attr, we);
}

TxResult Tempo::run_in_we(const std::string& we, const std::string& label,
                          const std::function<void()>& body) {
  if (!e_.db().wes().count(we)) throw Error("unknown work environment " + we);
  std::string saved = e_.session().we;
  e_.session().we = we;
  TxResult r;
  try {
    r = e_.run(label, body);
  } catch (...) {
    e_.session().we = saved;
    throw;
  }
  e_.session().we = saved;
  return r;
}

TxResult Tempo::set_role_attr(const std::string& we, const std::string& role,
                              const std::string& object, const std::string& attr,
                              const std::string& value) {
  RelKey k = binding(we, object, role);
  return run_in_we(we, "set " + attr,
                   [&] { e_.do_write_text(Item::object(object, k), attr, value, we); });
}

TxResult Tempo::invoke_in_we(const std::string& we, const std::string& role,
                             const std::string& object, const std::string& method,
                             const std::vector<std::string>& args) {
  binding(we, object, role);
  // A declared tool list is the set of methods the environment may run.
  const auto& tools = e_.db().wes().at(we).tools;
  if (!tools.empty() &&
      std::none_of(tools.begin(), tools.end(), [&](auto& t) { return iequals(t, method); }))
    throw Error(method + " is not among the tools of " + we);
  std::string saved = e_.session().we;
  e_.session().we = we;
  TxResult r;
  try {
    r = e_.invoke(object, method, args);
  } catch (...) {
    e_.session().we = saved;
    throw;
  }
  e_.session().we = saved;
  return r;
}

std::filesystem::path Tempo::file_of(const std::string& we, const std::string& object) const {
  auto it = e_.db().wes().find(we);
  if (it == e_.db().wes().end()) throw Error("unknown work environment " + we);
  if (it->second.workspace.empty()) throw Error(we + " has no workspace");
  auto rel = ws_.path_for(it->second.workspace, object);
  if (!rel) throw Error(object + " is not in the workspace of " + we);
  return ws_.path_of(it->second.workspace, *rel);
}

WeStatus Tempo::status(const std::string& we) const {
  auto it = e_.db().wes().find(we);
  if (it == e_.db().wes().end()) throw Error("unknown work environment " + we);
  const WeRec& w = it->second;
  WeStatus s{w.name, w.process, w.user, w.parent, w.workspace, w.tools, {}, {}, {}};
  for (auto& k : e_.db().outgoing(we)) {
    auto r = e_.schema().role_of(k.rel);
    if (!r) continue;
    s.bindings[r->second].push_back(k.dest);
    if (auto* rr = e_.db().relation(k))
      for (auto& [a, v] : rr->attrs) s.overlays[r->second + "/" + k.dest + "/" + a] = v.display();
  }
  for (auto& [id, c] : e_.db().connections())
    if (c.target_we == we || c.source_we == we) s.connections.push_back(c);
  return s;
}

// ------------------------------------------------------------------ post-commit

void Tempo::on_commit(const Engine::CommitInfo& info, const Engine::Schedule& schedule) {
  auto writes = std::make_shared<std::vector<Write>>(info.writes);
  std::vector<std::pair<std::string, std::string>> touched;
  for (auto& w : info.writes) {
    if (w.we.empty() || w.object.empty()) continue;
    auto it = e_.db().wes().find(w.we);
    if (it == e_.db().wes().end() || it->second.parent.empty()) continue;
    std::pair<std::string, std::string> key{w.we, w.object};
    if (std::find(touched.begin(), touched.end(), key) == touched.end()) touched.push_back(key);
  }
  for (auto& [we, obj] : touched) {
    if (!e_.db().object(obj)) continue;
    const std::string parent = e_.db().wes().at(we).parent;

    // Connections leaving this environment over the object, in id order.
    for (auto& [id, c] : e_.db().connections()) {
      if (c.source_we != we || c.source_object != obj) continue;
      const ProcessDef& pp = process_of(c.parent);
      auto def = std::find_if(pp.connections.begin(), pp.connections.end(),
                              [&](const ConnectionDef& d) { return d.name == c.type; });
      if (def == pp.connections.end()) continue;
      for (auto& kind : def->kinds) {
        auto ev = def->events.find(to_lower(kind) + "_when");
        if (ev == def->events.end()) continue;
        Frame f;
        f.receiver = Item::object(obj);
        f.self = Item::object(obj, e_.role_binding(we, obj));
        f.cmd = info.label;
        f.we = we;
        f.writes = writes.get();
        bool hit = false;
        try {
          hit = e_.eval_cond(*ev->second, f);
        } catch (const AbortSignal&) {
        } catch (const Error&) {
        }
        if (!hit) continue;
        std::string cid = id, k = to_lower(kind);
        schedule(k + " " + cid, [this, cid, k] {
          auto cit = e_.db().connections().find(cid);
          if (cit != e_.db().connections().end()) deliver(cit->second, k);
        });
      }
    }

    // Process rules of the enclosing process.
    auto type = e_.type_of(Item::object(parent));
    if (!type) continue;
    Frame f;
    f.self = Item::object(parent);
    f.receiver = Item::object(obj);
    f.cmd = info.label;
    f.params["name"] = {Item::object(obj)};
    f.writes = writes.get();
    std::vector<const ResolvedTrigger*> hits;
    for (auto& rt : type->triggers) {
      bool hit = false;
      try {
        hit = e_.event_true(rt.def, f);
      } catch (const AbortSignal&) {
      } catch (const Error&) {
      }
      if (hit && rt.def.action) hits.push_back(&rt);
    }
    std::stable_sort(hits.begin(), hits.end(), [&](auto* a, auto* b) {
      return e_.event_priority(a->def) > e_.event_priority(b->def);
    });
    if (hits.empty()) continue;
    schedule("rule " + parent + " " + obj, [this, type, hits, f, writes]() mutable {
      for (auto* rt : hits) e_.exec(*rt->def.action, f);
    });
  }
}

void Tempo::deliver(const ConnectionRec& conn, const std::string& kind) {
  ConnectionRec c = conn;
  const auto& wes = e_.db().wes();
  auto tgt = wes.find(c.target_we), src = wes.find(c.source_we);
  if (tgt == wes.end() || src == wes.end()) e_.abort("connection " + c.id + " lost an endpoint");
  const WeRec& t = tgt->second;
  const WeRec& s = src->second;
  if (kind == "notify") {
    e_.do_mail(t.user, c.type + ": " + c.source_object + " changed in " + c.source_we);
    c.status = "notified";
  } else if (!t.workspace.empty() && !s.workspace.empty()) {
    auto spath = ws_.path_for(s.workspace, c.source_object);
    auto tpath = ws_.path_for(t.workspace, c.target_object);
    if (!spath || !tpath) e_.abort("connection " + c.id + " has no files to exchange");
    MapEntry sm = ws_.resolve_path(s.workspace, *spath);
    MapEntry tm = ws_.resolve_path(t.workspace, *tpath);
    std::string theirs = ws_.read(s.workspace, *spath);
    if (kind == "resynch") {
      MapEntry next = tm;
      next.revision = sm.revision;
      next.mode = LinkMode::Copy;
      ws_.do_put_copy(t.workspace, *tpath, theirs, next);
      c.status = "resynched";
    } else {
      std::string ours = ws_.read(t.workspace, *tpath);
      int base_rev = std::min(sm.revision, tm.revision);
      MergeResult m;
      if (base_rev > 0 && sm.object == tm.object)
        m = merge3(e_.content_of(tm.object, tm.branch, base_rev), ours, theirs, c.target_we,
                   c.source_we);
      else
        m = merge2(ours, theirs, c.target_we, c.source_we);
      e_.do_write_file(ws_.path_of(t.workspace, *tpath), m.text);
      c.status = m.conflict ? "conflict" : "merged";
      if (m.conflict)
        e_.do_mail(t.user, c.type + ": merge conflict on " + c.target_object + " from " +
                               c.source_we);
    }
  } else {
    c.status = kind + " skipped (no workspace)";
  }
  e_.db().put_connection(c);
  e_.output(kind + " " + c.id + " " + c.status);
}

}  // namespace adl
