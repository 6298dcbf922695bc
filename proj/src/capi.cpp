#include "adl/adl.h"

#include <algorithm>
#include <fstream>
#include <memory>
#include <sstream>

#include "adl/builder.hpp"
#include "adl/persist.hpp"
#include "adl/tempo.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct adl_result {
  adl_status status = ADL_OK;
  std::string message;
  std::vector<std::string> lines, json_lines, trace;

  void emit(std::string text, const json& obj) {
    lines.push_back(std::move(text));
    json_lines.push_back(obj.dump());
  }
};

struct adl_store {
  std::unique_ptr<adl::Store> store;
  std::unique_ptr<adl::Tempo> tempo;

  adl::Engine& e() { return store->engine(); }
  adl::Workspaces& ws() { return tempo->workspaces(); }
};

namespace {

using adl::Engine;
using adl::Error;
using adl::ErrorKind;
using adl::TxResult;

adl_status status_of(ErrorKind k) {
  switch (k) {
    case ErrorKind::Domain: return ADL_ERR_DOMAIN;
    case ErrorKind::Usage: return ADL_ERR_USAGE;
    case ErrorKind::Aborted: return ADL_ERR_ABORTED;
    case ErrorKind::Io: return ADL_ERR_IO;
  }
  return ADL_ERR_DOMAIN;
}

std::string str(const char* s) { return s ? s : ""; }

std::vector<std::string> list(size_t n, const char* const* v) {
  std::vector<std::string> out;
  for (size_t i = 0; i < n; ++i) out.push_back(str(v[i]));
  return out;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(what, ErrorKind::Usage);
}

// Runs `body`, converting exceptions into the result status.
template <class F>
adl_status guard(adl_result** out, F&& body) {
  auto r = std::make_unique<adl_result>();
  try {
    body(*r);
  } catch (const Error& e) {
    r->status = status_of(e.kind());
    r->message = e.what();
  } catch (const std::exception& e) {
    r->status = ADL_ERR_DOMAIN;
    r->message = e.what();
  }
  adl_status s = r->status;
  if (out)
    *out = r.release();
  return s;
}

template <class F>
adl_status with_store(adl_store* s, adl_result** out, F&& body) {
  return guard(out, [&](adl_result& r) {
    require(s && s->store, "no open store");
    body(r);
  });
}

// Copies a transaction's output and trace, and records it for `tx last`.
void absorb(adl_store* s, adl_result& r, const TxResult& tx) {
  for (auto& line : tx.output) r.emit(line, json{{"output", line}});
  for (auto& t : tx.trace) r.trace.push_back(t.render());
  for (auto& d : tx.diagnostics) r.trace.push_back("# " + d);
  s->store->save_last(tx);
  if (!tx.committed) {
    r.status = ADL_ERR_ABORTED;
    r.message = tx.message.empty() ? "transaction aborted" : tx.message;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path, ErrorKind::Io);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path absolute(const std::string& p) { return fs::weakly_canonical(fs::absolute(p)); }

void report_load(adl_result& r, const adl::LoadReport& rep) {
  auto put = [&](const char* kind, const std::vector<std::string>& names) {
    for (auto& n : names) r.emit(std::string(kind) + " " + n, json{{"kind", kind}, {"name", n}});
  };
  put("type", rep.types);
  put("event", rep.events);
  put("method", rep.methods);
  put("process", rep.processes);
  put("partition", rep.partitions);
  for (auto& w : rep.warnings) r.trace.push_back("warning: " + w);
}

adl::LoadReport load(adl_store* s, adl_result& r, const std::string& text) {
  auto rep = s->e().load(text);
  s->e().invalidate_caches();
  report_load(r, rep);
  return rep;
}

std::string fresh_name(Engine& e, const std::string& stem) {
  for (int n = 1;; ++n) {
    std::string name = stem + std::to_string(n);
    if (!e.db().any_object(name)) return name;
  }
}

void listing(adl_result& r, const std::vector<std::string>& lines) {
  for (auto& l : lines) r.emit(l, json{{"component", l}});
}

std::string ws_of_dir(adl_store* s, const fs::path& dir) {
  for (auto& [name, w] : s->e().db().workspaces())
    if (absolute(w.dir) == dir) return name;
  if (auto hit = s->ws().locate(dir / ".")) return hit->first;
  throw Error("no workspace at " + dir.string());
}

}  // namespace

extern "C" {

const char* adl_version(void) { return "adelite 1.0"; }

adl_status adl_init(const char* dir, adl_result** out) {
  return guard(out, [&](adl_result& r) {
    require(dir && *dir, "store path required");
    if (adl::Store::exists(dir)) throw Error(str(dir) + " already holds a store");
    adl::Store::init(dir);
    r.emit("initialized " + str(dir), json{{"initialized", str(dir)}});
  });
}

adl_status adl_open(const char* dir, const char* user, adl_store** store, adl_result** err) {
  return guard(err, [&](adl_result&) {
    require(store != nullptr, "store handle pointer required");
    require(dir && *dir, "store path required");
    if (!adl::Store::exists(dir))
      throw Error("no store at " + str(dir) + " (run adl init)", ErrorKind::Io);
    auto h = std::make_unique<adl_store>();
    h->store = std::make_unique<adl::Store>(absolute(dir));
    h->tempo = std::make_unique<adl::Tempo>(h->store->engine());
    if (user && *user) h->e().session().user = user;
    *store = h.release();
  });
}

void adl_close(adl_store* s) { delete s; }

adl_status adl_digest(adl_store* s, adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    std::string d = s->e().db().digest();
    r.emit(d, json{{"digest", d}});
  });
}

adl_status adl_load_file(adl_store* s, const char* path, adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    require(path != nullptr, "file required");
    load(s, r, read_file(path));
  });
}

adl_status adl_load_text(adl_store* s, const char* text, adl_result** out) {
  return with_store(s, out, [&](adl_result& r) { load(s, r, str(text)); });
}

adl_status adl_new(adl_store* s, const char* name, const char* type, const char* partition,
                   adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    require(name && type, "name and type required");
    std::string part = partition && *partition ? partition : adl::Schema::kRoot;
    absorb(s, r, s->e().create_object(name, type, part));
    if (r.status == ADL_OK)
      r.emit("created " + str(name) + " (" + str(type) + ")",
             json{{"created", str(name)}, {"type", str(type)}});
  });
}

adl_status adl_mkrel(adl_store* s, const char* origin, const char* rel, const char* dest,
                     adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    require(origin && rel && dest, "origin, relation and destination required");
    absorb(s, r, s->e().create_relation(origin, rel, dest));
    if (r.status == ADL_OK) {
      std::string key = str(origin) + "|" + str(rel) + "|" + str(dest);
      r.emit("created " + key, json{{"created", key}});
    }
  });
}

adl_status adl_set(adl_store* s, const char* target, const char* attr, const char* value,
                   adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    require(target && attr && value, "target, attribute and value required");
    absorb(s, r, s->e().set_attribute(target, attr, value));
  });
}

adl_status adl_get(adl_store* s, const char* target, const char* attr, adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    require(target && attr, "target and attribute required");
    adl::Value v = s->e().get(target, attr);
    std::string text = v.is_unset() ? "" : v.display();
    r.emit(text, json{{"target", str(target)}, {"attr", str(attr)}, {"value", text}});
  });
}

adl_status adl_invoke(adl_store* s, const char* target, const char* method, size_t argc,
                      const char* const* argv, adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    require(target && method, "target and method required");
    absorb(s, r, s->e().invoke(target, method, list(argc, argv)));
  });
}

adl_status adl_history(adl_store* s, const char* target, const char* attr, int with_dates,
                       adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    require(target != nullptr, "target required");
    const auto& db = s->e().db();
    adl::Item it = s->e().resolve(target);
    const std::vector<adl::HistoryRecord>* hist = nullptr;
    if (it.kind == adl::Item::Kind::Object) {
      if (auto* o = db.any_object(it.name)) hist = &o->history;
    } else if (auto* rel = db.relation(it.rel)) {
      hist = &rel->history;
    }
    if (!hist) throw Error("unknown target " + str(target));
    for (auto& h : *hist) {
      if (attr && *attr && !adl::iequals(h.attr, attr)) continue;
      std::string o = h.old_value.is_unset() ? "" : h.old_value.display();
      std::string n = h.new_value.is_unset() ? "" : h.new_value.display();
      std::string text = h.attr + "|" + o + "|" + n + "|" + h.command + "|" + h.user;
      json j{{"attr", h.attr}, {"old", o}, {"new", n}, {"command", h.command}, {"user", h.user}};
      if (with_dates) {
        text = h.when.iso() + "|" + text;
        j["when"] = h.when.iso();
      }
      r.emit(text, j);
    }
  });
}

// ---------------------------------------------------------------- configurations

adl_status adl_build_sm(adl_store* s, const char* name, const char* root, const char* where,
                        adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    require(root && *root, "--root required");
    Engine& e = s->e();
    auto pm = adl::ProductModel::from_store(e);
    adl::ConstraintPtr w = where && *where ? adl::parse_constraint(where) : nullptr;
    auto sm = adl::build_system_model(pm, root, w);
    std::string n = name && *name ? str(name) : fresh_name(e, "sm");
    absorb(s, r, e.run("build-sm " + n, [&] { adl::do_store_system_model(e, n, sm); }));
    if (r.status != ADL_OK) return;
    r.emit("model " + n, json{{"model", n}});
    listing(r, adl::component_listing(pm, sm));
  });
}

adl_status adl_bind(adl_store* s, const char* sm_name, const char* name, const char* select,
                    adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    require(sm_name && *sm_name, "--sm required");
    Engine& e = s->e();
    auto sm = adl::load_system_model(e, sm_name);
    auto pm = adl::ProductModel::from_store(e);
    adl::ConstraintPtr p = select && *select ? adl::parse_constraint(select) : nullptr;
    auto b = adl::instantiate_configuration(e, sm, p, sm_name);
    std::string n = name && *name ? str(name) : fresh_name(e, str(sm_name) + "_b");
    absorb(s, r, e.run("bind " + n, [&] { adl::do_store_bound(e, n, sm, b); }));
    if (r.status != ADL_OK) return;
    r.emit("bound " + n, json{{"bound", n}});
    listing(r, adl::component_listing(pm, sm, &b));
  });
}

adl_status adl_sm_check(adl_store* s, const char* sm_name, adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    require(sm_name && *sm_name, "model name required");
    auto sm = adl::load_system_model(s->e(), sm_name);
    auto v = adl::check_model_consistency(adl::ProductModel::from_store(s->e()), sm);
    for (auto& x : v)
      r.emit(x.render(), json{{"rule", x.rule}, {"node", x.node}, {"detail", x.detail}});
    if (v.empty()) {
      r.emit("consistent", json{{"consistent", true}});
    } else {
      r.status = ADL_ERR_DOMAIN;
      r.message = std::to_string(v.size()) + " violation(s) in " + str(sm_name);
    }
  });
}

// ---------------------------------------------------------------- workspaces

adl_status adl_ctx_new(adl_store* s, const char* name, size_t n, const char* const* roots,
                       adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    require(name && *name, "context name required");
    absorb(s, r, s->ws().make_context(name, list(n, roots)));
    if (r.status == ADL_OK) r.emit("context " + str(name), json{{"context", str(name)}});
  });
}

adl_status adl_ctx_show(adl_store* s, const char* name, adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    require(name && *name, "context name required");
    for (auto& [path, obj] : s->ws().layout(name))
      r.emit(path + " " + obj, json{{"path", path}, {"object", obj}});
  });
}

adl_status adl_checkout(adl_store* s, const char* ws, const char* ctx, const char* dir,
                        const char* link_mode, size_t n, const char* const* linked,
                        adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    require(ctx && *ctx && dir && *dir, "--ctx and --dir required");
    std::map<std::string, adl::LinkMode> modes;
    if (n) {
      require(link_mode != nullptr, "--link needs static or dynamic");
      auto m = adl::parse_mode(link_mode);
      require(m && *m != adl::LinkMode::Copy, "--link needs static or dynamic");
      for (auto& o : list(n, linked)) modes[o] = *m;
    }
    fs::path d = absolute(dir);
    std::string name = ws && *ws ? str(ws) : d.filename().string();
    absorb(s, r, s->ws().checkout(name, ctx, d, s->e().session().user, modes));
    if (r.status != ADL_OK) return;
    for (auto& [path, m] : s->e().db().workspaces().at(name).mapping) {
      std::string text = path + " " + m.object + "@" + std::to_string(m.revision) + " " +
                         adl::mode_name(m.mode);
      r.emit(text, json{{"path", path}, {"object", m.object}, {"revision", m.revision},
                        {"mode", adl::mode_name(m.mode)}});
    }
  });
}

adl_status adl_checkin(adl_store* s, size_t n, const char* const* paths, int force,
                       adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    require(n > 0, "at least one path required");
    std::map<std::string, std::vector<std::string>> by_ws;
    for (auto& p : list(n, paths)) {
      auto hit = s->ws().locate(absolute(p));
      if (!hit) throw Error(p + " is not inside a workspace");
      by_ws[hit->first].push_back(hit->second);
    }
    require(by_ws.size() == 1, "paths span several workspaces");
    std::vector<std::pair<std::string, int>> created;
    auto& [ws, rels] = *by_ws.begin();
    absorb(s, r, s->ws().checkin(ws, rels, force != 0, &created));
    if (r.status != ADL_OK) return;
    for (auto& [obj, rev] : created)
      r.emit(obj + "@" + std::to_string(rev), json{{"object", obj}, {"revision", rev}});
  });
}

adl_status adl_sync(adl_store* s, const char* dir, int to_db, adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    fs::path d = absolute(dir && *dir ? dir : ".");
    std::string ws = ws_of_dir(s, d);
    std::vector<std::string> report;
    absorb(s, r, s->ws().sync(ws, to_db ? adl::SyncDirection::ToDb : adl::SyncDirection::ToWs,
                              &report));
    for (auto& line : report) r.emit(line, json{{"change", line}});
  });
}

adl_status adl_resolve(adl_store* s, const char* path, adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    require(path && *path, "path required");
    auto hit = s->ws().locate(absolute(path));
    if (!hit) throw Error(str(path) + " is not inside a workspace");
    auto m = s->ws().resolve_path(hit->first, hit->second);
    std::string text =
        m.object + "@" + std::to_string(m.revision) + " " + adl::mode_name(m.mode);
    r.emit(text, json{{"workspace", hit->first}, {"path", hit->second}, {"object", m.object},
                      {"revision", m.revision}, {"mode", adl::mode_name(m.mode)}});
  });
}

// ---------------------------------------------------------------- processes

adl_status adl_proc_new(adl_store* s, const adl_proc_request* req, adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    require(req && req->type && *req->type, "process type required");
    adl::ProcessRequest p;
    p.type = req->type;
    p.user = req->user && *req->user ? req->user : s->e().session().user;
    p.objects = list(req->n_objects, req->objects);
    p.name = str(req->name);
    p.parent = str(req->parent);
    p.role = str(req->role);
    require(p.parent.empty() == p.role.empty(), "--parent and --role go together");
    p.tools = list(req->n_tools, req->tools);
    TxResult tx;
    std::string name;
    try {
      name = s->tempo->instantiate(p, &tx);
    } catch (const Error& e) {
      absorb(s, r, tx);
      if (r.status == ADL_OK) throw;
      return;
    }
    absorb(s, r, tx);
    r.emit(name, json{{"instance", name}});
  });
}

adl_status adl_we_invoke(adl_store* s, const char* we, const char* role, const char* object,
                         const char* method, size_t argc, const char* const* argv,
                         adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    require(we && role && object && method, "we, role, object and method required");
    absorb(s, r, s->tempo->invoke_in_we(we, role, object, method, list(argc, argv)));
  });
}

adl_status adl_we_set(adl_store* s, const char* we, const char* role, const char* object,
                      const char* attr, const char* value, adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    require(we && role && object && attr && value, "we, role, object, attribute and value required");
    absorb(s, r, s->tempo->set_role_attr(we, role, object, attr, value));
  });
}

adl_status adl_we_get(adl_store* s, const char* we, const char* role, const char* object,
                      const char* attr, adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    require(we && role && object && attr, "we, role, object and attribute required");
    adl::Value v = s->tempo->role_attr(we, role, object, attr);
    std::string text = v.is_unset() ? "" : v.display();
    r.emit(text, json{{"we", str(we)}, {"object", str(object)}, {"attr", str(attr)},
                      {"value", text}});
  });
}

adl_status adl_we_status(adl_store* s, const char* we, adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    require(we && *we, "work environment required");
    auto st = s->tempo->status(we);
    auto field = [&](const char* k, const std::string& v) {
      if (!v.empty()) r.emit(std::string(k) + " " + v, json{{k, v}});
    };
    field("process", st.process);
    field("user", st.user);
    field("parent", st.parent);
    field("workspace", st.workspace);
    std::string tools;
    for (auto& t : st.tools) tools += (tools.empty() ? "" : ",") + t;
    field("tools", tools);
    for (auto& [role, objs] : st.bindings)
      for (auto& o : objs)
        r.emit("bind " + role + " " + o, json{{"role", role}, {"object", o}});
    for (auto& [key, v] : st.overlays)
      r.emit("overlay " + key + " = " + v, json{{"overlay", key}, {"value", v}});
    for (auto& c : st.connections)
      r.emit("connection " + c.id + " " + c.status,
             json{{"connection", c.id}, {"type", c.type}, {"status", c.status}});
  });
}

adl_status adl_inbox(adl_store* s, const char* user, adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    std::string u = user && *user ? user : s->e().session().user;
    auto& boxes = s->e().db().inboxes();
    auto it = boxes.find(u);
    if (it == boxes.end()) return;
    for (auto& m : it->second) r.emit(m, json{{"user", u}, {"mail", m}});
  });
}

adl_status adl_event_log(adl_store* s, size_t tail, adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    std::vector<std::string> lines;
    std::ifstream in(s->store->dir() / "events.log");
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    size_t from = tail && tail < lines.size() ? lines.size() - tail : 0;
    for (size_t i = from; i < lines.size(); ++i) r.emit(lines[i], json{{"event", lines[i]}});
  });
}

adl_status adl_tx_last(adl_store* s, adl_result** out) {
  return with_store(s, out, [&](adl_result& r) {
    std::istringstream in(s->store->load_last());
    for (std::string l; std::getline(in, l);) r.emit(l, json{{"trace", l}});
  });
}

// ---------------------------------------------------------------- results

adl_status adl_result_status(const adl_result* r) { return r ? r->status : ADL_ERR_USAGE; }
const char* adl_result_message(const adl_result* r) { return r ? r->message.c_str() : ""; }
size_t adl_result_count(const adl_result* r) { return r ? r->lines.size() : 0; }
const char* adl_result_line(const adl_result* r, size_t i) {
  return r && i < r->lines.size() ? r->lines[i].c_str() : nullptr;
}
const char* adl_result_json(const adl_result* r, size_t i) {
  return r && i < r->json_lines.size() ? r->json_lines[i].c_str() : nullptr;
}
size_t adl_result_trace_count(const adl_result* r) { return r ? r->trace.size() : 0; }
const char* adl_result_trace(const adl_result* r, size_t i) {
  return r && i < r->trace.size() ? r->trace[i].c_str() : nullptr;
}
void adl_result_free(adl_result* r) { delete r; }

}  // extern "C"
