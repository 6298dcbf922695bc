#include "adl/engine.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <deque>
#include <fstream>
#include <sstream>

namespace adl {

namespace fs = std::filesystem;

struct Engine::Candidate {
  std::shared_ptr<const ResolvedType> type;  // keeps `trig` alive
  const ResolvedTrigger* trig = nullptr;
  std::optional<RelKey> rel;
  bool global = false;
  int priority = 0;
  std::string event;
  std::size_t seq = 0;
};

struct Engine::Pending {
  Candidate cand;
  Frame frame;
};

struct Engine::Slot {
  std::optional<RelKey> overlay;  // role relation holding a WE-local value
  std::shared_ptr<const ResolvedType> type;
  const AttributeDef* def = nullptr;
};

struct Tx {
  std::string label;
  Session session;
  std::vector<UndoEntry> log;
  std::vector<Write> writes;
  std::vector<Engine::Pending> after;
  std::vector<Engine::Pending> errors;
  std::vector<TraceLine> trace;
  std::vector<std::string> output;
  std::vector<std::string> diagnostics;
  std::vector<std::string> events;
  std::vector<std::string> cmds;
  int nest = 0;
  int cascade = 0;
};

namespace {

const std::set<std::string> kReceiverBuiltins = {"newstate", "mda",     "set",  "delete",
                                                  "copy",     "makerel", "replace"};
const std::set<std::string> kFreeBuiltins = {"print", "echo", "mail", "sh"};

std::string summarize(const std::string& s) {
  if (s.size() <= 80) return s;
  return s.substr(0, 77) + "...";
}

std::string join_texts(const Items& items, const char* sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i].text();
  }
  return out;
}

Value item_value(const Item& i) { return i.is_entity() ? Value::string(i.text()) : i.value; }

bool truthy(const Item& i) {
  if (i.is_entity()) return true;
  const Value& v = i.value;
  switch (v.kind()) {
    case ValueKind::Unset: return false;
    case ValueKind::Boolean: return v.as_boolean();
    case ValueKind::Integer: return v.as_integer() != 0;
    case ValueKind::String: {
      auto l = to_lower(v.as_string());
      return !l.empty() && l != "false" && l != "no" && l != "0";
    }
    case ValueKind::Set: return !v.as_set().empty();
    case ValueKind::Date: return true;
  }
  return false;
}

/// Reads `b` as a literal typed after `a` so `5` matches an integer and
/// `88_08_23` a date, while plain words stay strings.
bool value_match(const Value& a, CmpOp op, const Value& b) {
  if (a.is_unset() || b.is_unset()) return false;
  if (b.kind() == ValueKind::Set) {
    for (auto& e : b.as_set())
      if (value_match(a, op, Value::string(e))) return true;
    return false;
  }
  Literal lit;
  ValueKind ak = a.kind() == ValueKind::Set ? ValueKind::String : a.kind();
  switch (b.kind()) {
    case ValueKind::Integer:
      lit = ak == ValueKind::Integer ? Literal::integer(b.as_integer()) : Literal::string(b.display());
      break;
    case ValueKind::Date:
      lit = ak == ValueKind::Date ? Literal::of_date(b.as_date()) : Literal::string(b.display());
      break;
    case ValueKind::String: {
      const std::string& t = b.as_string();
      lit = Literal::string(t);
      if (ak == ValueKind::Integer) {
        try {
          std::size_t pos = 0;
          long long n = std::stoll(t, &pos);
          if (pos == t.size()) lit = Literal::integer(n);
        } catch (...) {
        }
      } else if (ak == ValueKind::Date) {
        if (auto d = Date::parse(t)) lit = Literal::of_date(*d);
      }
      break;
    }
    default: lit = Literal::string(b.display());
  }
  return compare_literal(a, op, lit);
}

bool compare_items(const Items& l, CmpOp op, const Items& r) {
  if (op == CmpOp::SetEq) {
    std::set<std::string> ls, rs;
    auto add = [](std::set<std::string>& out, const Item& i) {
      Value v = item_value(i);
      if (v.is_unset()) out.insert(std::string(1, '\0'));  // never equals a literal
      for (auto& e : v.elements()) out.insert(e);
    };
    for (auto& i : l) add(ls, i);
    for (auto& i : r) add(rs, i);
    return !ls.empty() && !rs.empty() && ls == rs;
  }
  if (op == CmpOp::Ne) {
    if (l.empty() || r.empty()) return false;
    for (auto& a : l)
      for (auto& b : r)
        if (value_match(item_value(a), CmpOp::Eq, item_value(b))) return false;
    return true;
  }
  for (auto& a : l)
    for (auto& b : r)
      if (value_match(item_value(a), op, item_value(b))) return true;
  return false;
}

const AttributeDef* find_attr(const ResolvedType& t, const std::string& name) {
  if (auto* a = t.attribute(name)) return a;
  for (auto& [n, a] : t.attributes)
    if (iequals(n, name)) return &a;
  return nullptr;
}

const Value* find_value(const std::map<std::string, Value>& attrs, const std::string& name) {
  auto it = attrs.find(name);
  if (it != attrs.end()) return &it->second;
  for (auto& [n, v] : attrs)
    if (iequals(n, name)) return &v;
  return nullptr;
}

std::string strip_marks(std::string s) {
  while (!s.empty() && (s[0] == '%' || s[0] == '-' || s[0] == '!')) s.erase(0, 1);
  return s;
}

bool is_flag_word(const std::string& s) {
  return s.size() > 1 && s[0] == '-' && !std::isdigit(static_cast<unsigned char>(s[1]));
}

}  // namespace

// ------------------------------------------------------------------ values

std::string TraceLine::render() const {
  return std::string(cascade, '>') + std::string(nest, '.') + phase + "|" + event + "|" +
         std::to_string(priority) + "|" + source + "|" + summary;
}

std::string TxResult::trace_text() const {
  std::string out;
  for (auto& l : trace) out += l.render() + "\n";
  return out;
}

Item Item::of_value(Value v) {
  Item i;
  i.value = std::move(v);
  return i;
}

Item Item::object(std::string n, std::optional<RelKey> via) {
  Item i;
  i.kind = Kind::Object;
  i.name = std::move(n);
  i.via = std::move(via);
  return i;
}

Item Item::relation(RelKey k) {
  Item i;
  i.kind = Kind::Relation;
  i.rel = std::move(k);
  return i;
}

std::string Item::text() const {
  switch (kind) {
    case Kind::Object: return name;
    case Kind::Relation: return rel.str();
    case Kind::Value: return value.display();
  }
  return {};
}

// ------------------------------------------------------------------ engine basics

Engine::Engine() = default;
Engine::~Engine() = default;

Date Engine::now() const {
  if (clock_) return clock_();
  auto s = std::chrono::duration_cast<std::chrono::seconds>(
               std::chrono::system_clock::now().time_since_epoch())
               .count();
  return Date{s};
}

std::string Engine::canonical_command(const std::string& name) {
  std::string l = to_lower(name);
  if (l == "remove") return "delete";
  return l;
}

std::string Engine::current_user() const { return tx_ ? tx_->session.user : session_.user; }

std::string Engine::user_of(const Frame& f) const {
  if (!f.we.empty()) {
    auto it = db_.wes().find(f.we);
    if (it != db_.wes().end() && !it->second.user.empty()) return it->second.user;
  }
  return current_user();
}

void Engine::abort(const std::string& message) { throw AbortSignal{message}; }

void Engine::output(const std::string& line) {
  if (tx_) tx_->output.push_back(line);
}

void Engine::trace(const std::string& phase, const std::string& event, int priority,
                   const std::string& source, const std::string& summary) {
  if (!tx_) return;
  tx_->trace.push_back(
      TraceLine{tx_->cascade, tx_->nest, phase, event, priority, source, summarize(summary)});
}

Frame Engine::frame_for(const Item& self) const {
  Frame f;
  f.self = self;
  f.receiver = self;
  f.we = session_.we;
  if (self.kind == Item::Kind::Relation) {
    f.bindings["o"] = {Item::object(self.rel.origin)};
    f.bindings["d"] = {Item::object(self.rel.dest)};
  }
  return f;
}

// ------------------------------------------------------------------ transactions

TxResult Engine::run(const std::string& label, const std::function<void()>& body) {
  if (tx_) {
    body();
    return {};
  }
  TxResult res;
  run_into(res, label, body, 0);
  last_ = res;
  return res;
}

void Engine::run_into(TxResult& res, const std::string& label,
                      const std::function<void()>& body, int cascade) {
  Tx tx;
  tx.label = label;
  tx.session = session_;
  tx.cascade = cascade;
  tx_ = &tx;
  db_.set_log(&tx.log);
  int id = ++tx_counter_;

  bool ok = true;
  std::string message;
  try {
    body();
  } catch (const AbortSignal& a) {
    ok = false;
    message = a.message.empty() ? "aborted" : a.message;
  } catch (const Error& e) {
    ok = false;
    message = e.what();
  } catch (const std::exception& e) {
    ok = false;
    message = e.what();
  }
  tx.nest = 0;
  tx.cmds.clear();

  std::vector<Pending> decoupled;
  if (ok) {
    trace("COMMIT", label, 0, "tx", std::to_string(tx.writes.size()) + " writes");
    decoupled = std::move(tx.after);
  } else {
    // ERROR events see the failed write-set, so evaluate them before rollback.
    for (auto& p : tx.errors) {
      bool hit = false;
      try {
        hit = event_true(p.cand.trig->def, p.frame);
      } catch (const AbortSignal&) {
      } catch (const Error&) {
      }
      if (hit) decoupled.push_back(p);
    }
    trace("ABORT", label, 0, "tx", message);
    std::size_t n = tx.log.size();
    for (auto it = tx.log.rbegin(); it != tx.log.rend(); ++it) it->undo();
    tx.log.clear();
    trace("ROLLBACK", label, 0, "tx", std::to_string(n) + " changes undone");
  }

  if (ok && journal_) {
    std::vector<Fields> ops;
    for (auto& e : tx.log) {
      auto* op = e.op.find("op");
      if (op && *op != "file") ops.push_back(e.op);
    }
    if (!ops.empty()) journal_(ops, tx.session, now());
  }
  db_.set_log(nullptr);
  tx_ = nullptr;

  for (auto& e : tx.events) {
    std::string line = std::to_string(id) + "|" + e + "|" + (ok ? "committed" : "aborted");
    event_log_.push_back(line);
    if (event_sink_) event_sink_(line);
  }
  res.trace.insert(res.trace.end(), tx.trace.begin(), tx.trace.end());
  res.output.insert(res.output.end(), tx.output.begin(), tx.output.end());
  res.diagnostics.insert(res.diagnostics.end(), tx.diagnostics.begin(), tx.diagnostics.end());
  if (cascade == 0) {
    res.committed = ok;
    res.message = message;
  }

  const char* phase = ok ? "AFTER" : "ERROR";
  for (auto& p : decoupled) {
    if (cascade + 1 > cascade_limit_) {
      res.diagnostics.push_back("cascade depth limit " + std::to_string(cascade_limit_) +
                                " exceeded: " + phase + " program on " + p.cand.event +
                                " dropped");
      continue;
    }
    const StmtPtr& action = p.cand.trig->def.action;
    res.trace.push_back(TraceLine{cascade, 0, phase, p.cand.event, p.cand.priority,
                                  source_of(p.cand),
                                  summarize(action ? print_stmt(*action) : "")});
    if (!action) continue;
    Frame f = p.frame;
    f.writes = nullptr;
    run_into(res, p.cand.event, [&] { exec(*action, f); }, cascade + 1);
  }

  if (ok && !hooks_.empty()) {
    CommitInfo info{label, tx.session, tx.writes};
    Schedule schedule = [&](const std::string& l, const std::function<void()>& fn) {
      if (cascade + 1 > cascade_limit_) {
        res.diagnostics.push_back("cascade depth limit " + std::to_string(cascade_limit_) +
                                  " exceeded: " + l + " dropped");
        return;
      }
      run_into(res, l, fn, cascade + 1);
    };
    auto hooks = hooks_;
    for (auto& h : hooks) h(info, schedule);
  }
}

// ------------------------------------------------------------------ commands

LoadReport Engine::load(std::string_view text, const std::string& partition) {
  LoadReport report;
  std::string src(text);
  auto res = run("load", [&] {
    Schema before = db_.schema();
    report = load_dsl(db_.schema(), src, partition);
    if (!report.empty())
      db_.record_schema(partition, src, [this, before] { db_.schema() = before; });
  });
  process_type_cache_.clear();
  if (!res.committed) throw Error(res.message);
  return report;
}

TxResult Engine::create_object(const std::string& name, const std::string& type,
                               const std::string& partition) {
  return run("new " + name, [&] { do_create_object(name, type, partition); });
}

TxResult Engine::create_relation(const std::string& origin, const std::string& rel,
                                 const std::string& dest) {
  return run("mkrel " + rel, [&] { do_create_relation(RelKey{origin, rel, dest}); });
}

TxResult Engine::set_attribute(const std::string& target, const std::string& attr,
                               const std::string& value) {
  return run("set " + attr, [&] { do_write_text(resolve(target), attr, value, session_.we); });
}

TxResult Engine::invoke(const std::string& target, const std::string& method,
                        const std::vector<std::string>& args) {
  return run(method, [&] {
    auto as_item = [&](const std::string& w) {
      if (db_.object(w)) return Item::object(w);
      return Item::of_value(Value::string(w));
    };
    std::vector<CallArg> call_args;
    for (std::size_t i = 0; i < args.size(); ++i) {
      CallArg a;
      if (is_flag_word(args[i])) {
        a.flag = args[i].substr(1);
        if (i + 1 < args.size() && !is_flag_word(args[i + 1])) a.value = {as_item(args[++i])};
      } else {
        a.value = {as_item(args[i])};
      }
      call_args.push_back(std::move(a));
    }
    do_invoke(resolve(target), method, std::move(call_args), nullptr);
  });
}

// ------------------------------------------------------------------ reads

Item Engine::resolve(const std::string& target) const {
  if (db_.object(target)) return Item::object(target);
  if (auto k = RelKey::parse(target)) {
    if (db_.relation(*k)) return Item::relation(*k);
    throw Error("unknown relation " + target);
  }
  throw Error("unknown object " + target);
}

std::shared_ptr<const ResolvedType> Engine::rtype(const RelKey& key) const {
  std::string part = Schema::kRoot;
  if (auto* o = db_.any_object(key.origin)) part = o->partition;
  if (!schema().visible(key.rel, part)) {
    if (!schema().visible(key.rel)) return nullptr;
    part = Schema::kRoot;
  }
  return schema().effective(key.rel, part);
}

std::shared_ptr<const ResolvedType> Engine::type_of(const Item& target) const {
  if (target.kind == Item::Kind::Relation) return rtype(target.rel);
  if (target.kind != Item::Kind::Object) return nullptr;
  auto* rec = db_.any_object(target.name);
  if (!rec) return nullptr;
  if (schema().visible(rec->type, rec->partition))
    return schema().effective(rec->type, rec->partition);
  return schema().effective(rec->type);
}

std::optional<std::string> Engine::attribute_name(const Item& target,
                                                  const std::string& attr) const {
  auto t = type_of(target);
  if (!t) return std::nullopt;
  if (auto* a = find_attr(*t, attr)) return a->name;
  return std::nullopt;
}

Engine::Slot Engine::slot(const Item& target, const std::string& attr,
                          const std::string& we) const {
  Slot s;
  if (target.kind == Item::Kind::Object) {
    std::optional<RelKey> overlay = target.via;
    if (!overlay && !we.empty() && !iequals(attr, "content")) overlay = role_binding(we, target.name);
    if (overlay) {
      auto rt = rtype(*overlay);
      if (rt) {
        if (auto* a = find_attr(*rt, attr)) {
          s.overlay = overlay;
          s.type = rt;
          s.def = a;
          return s;
        }
      }
    }
  }
  s.type = type_of(target);
  if (s.type) s.def = find_attr(*s.type, attr);
  return s;
}

Value Engine::read(const Item& target, const std::string& attr, const std::string& we,
                   bool strict) const {
  if (target.kind == Item::Kind::Value) {
    if (strict) throw Error("attribute " + attr + " read on a plain value");
    return {};
  }
  if (target.kind == Item::Kind::Relation) {
    auto it = db_.relations().find(target.rel);
    if (it == db_.relations().end()) throw Error("unknown relation " + target.rel.str());
    const RelationRec& rec = it->second;
    auto t = rtype(target.rel);
    const AttributeDef* def = t ? find_attr(*t, attr) : nullptr;
    if (!def) {
      std::string l = to_lower(attr);
      if (l == "name") return Value::string(target.rel.str());
      if (l == "type") return Value::string(target.rel.rel);
      if (l == "origin") return Value::string(target.rel.origin);
      if (l == "dest") return Value::string(target.rel.dest);
      if (auto* v = find_value(rec.attrs, attr)) return *v;
      if (strict) throw Error("unknown attribute " + attr + " of " + target.rel.rel);
      return {};
    }
    if (auto* v = find_value(rec.attrs, def->name)) return *v;
    if (iequals(def->name, "author")) return Value::string(rec.creator);
    if (def->default_value) return *def->default_value;
    if (def->computed) return computed(*def->computed);
    return {};
  }

  const ObjectRec* rec = db_.any_object(target.name);
  if (!rec) throw Error("unknown object " + target.name);
  Slot s = slot(target, attr, we);
  if (s.overlay) {
    if (auto* rr = db_.relation(*s.overlay))
      if (auto* v = find_value(rr->attrs, s.def->name)) return *v;
    s.type = type_of(target);
    s.def = s.type ? find_attr(*s.type, attr) : nullptr;
  }
  if (!s.def) {
    std::string l = to_lower(attr);
    if (l == "name") return Value::string(rec->name);
    if (l == "type") return Value::string(rec->type);
    if (auto* v = find_value(rec->attrs, attr)) return *v;
    if (strict) throw Error("unknown attribute " + attr + " of " + rec->type);
    return {};
  }
  const std::string& name = s.def->name;
  if (auto* v = find_value(rec->attrs, name)) return *v;
  if (s.def->builtin && name == "author") return Value::string(rec->creator);
  if (s.def->builtin && name == "date") return Value::date(rec->created);

  // Nearest composition ancestor carrying the attribute; ties broken by name.
  std::set<std::string> seen{rec->name};
  std::vector<std::string> level{rec->name};
  while (!level.empty()) {
    std::set<std::string> next;
    for (auto& o : level)
      for (auto& k : db_.incoming(o)) {
        auto rt = rtype(k);
        if (rt && rt->composition && !seen.count(k.origin)) next.insert(k.origin);
      }
    for (auto& p : next) {
      seen.insert(p);
      if (auto* pr = db_.object(p))
        if (auto* v = find_value(pr->attrs, name)) return *v;
    }
    level.assign(next.begin(), next.end());
  }
  if (s.def->default_value) return *s.def->default_value;
  if (s.def->computed) return computed(*s.def->computed);
  return {};
}

Value Engine::get(const Item& target, const std::string& attr, const std::string& we) const {
  return read(target, attr, we, true);
}

Value Engine::get(const std::string& target, const std::string& attr) const {
  return read(resolve(target), attr, session_.we, true);
}

Value Engine::computed(const std::string& command) const {
  auto it = computed_cache_.find(command);
  if (it != computed_cache_.end()) return it->second;
  Value v;
  std::string cmd = command + " 2>/dev/null";
  if (FILE* p = popen(cmd.c_str(), "r")) {
    std::string out;
    char buf[256];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) out.append(buf, n);
    int status = pclose(p);
    if (status == 0) v = Value::string(trim(out));
  }
  computed_cache_[command] = v;
  return v;
}

bool Engine::history_query(const Item& target, const std::string& attr, CmpOp op,
                           const Value& v) const {
  const std::vector<HistoryRecord>* history = nullptr;
  if (target.kind == Item::Kind::Object) {
    if (auto* rec = db_.any_object(target.name)) history = &rec->history;
  } else if (target.kind == Item::Kind::Relation) {
    auto it = db_.relations().find(target.rel);
    if (it != db_.relations().end()) history = &it->second.history;
  }
  if (!history) return false;
  for (auto& h : *history)
    if (iequals(h.attr, attr) && value_match(h.new_value, op, v)) return true;
  return value_match(read(target, attr, "", false), op, v);
}

std::set<std::string> Engine::composition_closure(const std::vector<std::string>& roots) const {
  std::set<std::string> out;
  std::deque<std::string> todo;
  for (auto& r : roots)
    if (db_.object(r) && out.insert(r).second) todo.push_back(r);
  while (!todo.empty()) {
    std::string o = todo.front();
    todo.pop_front();
    for (auto& k : db_.outgoing(o)) {
      auto rt = rtype(k);
      if (rt && rt->composition && db_.object(k.dest) && out.insert(k.dest).second)
        todo.push_back(k.dest);
    }
  }
  return out;
}

std::set<std::string> Engine::context_members(const std::string& context) const {
  auto it = db_.contexts().find(context);
  if (it == db_.contexts().end()) return {};
  return composition_closure(it->second.roots);
}

bool Engine::is_process_instance(const std::string& obj) const {
  auto* rec = db_.any_object(obj);
  if (!rec) return false;
  auto it = process_type_cache_.find(rec->type);
  if (it != process_type_cache_.end()) return it->second;
  bool p = schema().is_subtype(rec->type, "process", rec->partition);
  process_type_cache_[rec->type] = p;
  return p;
}

bool Engine::relation_visible(const RelKey& key, const std::string& we) const {
  const Session& s = tx_ ? tx_->session : session_;
  if (!s.context.empty() && we.empty()) {
    auto members = context_members(s.context);
    return members.count(key.origin) && members.count(key.dest);
  }
  bool po = is_process_instance(key.origin), pd = is_process_instance(key.dest);
  if (!we.empty()) {
    if (key.origin == we) return true;
    return !(po && key.origin != we) && !(pd && key.dest != we);
  }
  return !po && !pd;
}

std::optional<RelKey> Engine::role_binding(const std::string& we, const std::string& obj) const {
  for (auto& k : db_.incoming(obj))
    if (k.origin == we && schema().role_of(k.rel)) return k;
  return std::nullopt;
}

std::string Engine::content_of(const std::string& obj, const std::string& branch, int rev) const {
  if (rev == 0) return read(Item::object(obj), "content", "", false).display();
  auto* rec = db_.any_object(obj);
  if (!rec) throw Error("unknown object " + obj);
  auto* b = rec->branch(branch);
  if (!b) throw Error("unknown branch " + branch + " of " + obj);
  for (auto& r : b->revisions)
    if (r.number == rev) {
      auto it = r.snapshot.find("content");
      return it == r.snapshot.end() ? std::string() : it->second.display();
    }
  throw Error("unknown revision " + std::to_string(rev) + " of " + obj);
}

int Engine::latest_revision(const std::string& obj, const std::string& branch) const {
  auto* rec = db_.any_object(obj);
  if (!rec) throw Error("unknown object " + obj);
  auto* b = rec->branch(branch);
  if (!b || b->revisions.empty()) return 0;
  return b->revisions.back().number;
}

// ------------------------------------------------------------------ mutations

void Engine::do_create_object(const std::string& name, const std::string& type,
                              const std::string& partition) {
  if (!tx_) throw Error("no open transaction");
  if (!schema().has_partition(partition)) throw Error("unknown partition " + partition);
  if (name.empty() || name.find_first_of("| \t\n") != std::string::npos)
    throw Error("invalid object name '" + name + "'");
  auto t = schema().resolve_name(type, partition);
  if (!t) throw Error("unknown type " + type);
  auto rt = schema().effective(*t, partition);
  if (rt->kind != TypeKind::Object) throw Error(*t + " is a relation type");
  Date when = now();
  db_.create_object(name, *t, partition, when, current_user());
  for (auto& [n, a] : rt->attributes)
    if (a.initial) {
      db_.write_object_attr(name, n, *a.initial, when, current_user(), "create");
      tx_->writes.push_back(Write{name, std::nullopt, n, *a.initial, ""});
    }
  db_.add_revision(name, "main", when, current_user());
}

bool Engine::domain_ok(const Constraint& c, const ObjectRec& obj) const {
  switch (c.kind) {
    case Constraint::Kind::True: return true;
    case Constraint::Kind::Atom: {
      if (iequals(c.attr, "type")) {
        auto t = schema().resolve_name(c.literal.text, obj.partition);
        bool sub = t && schema().is_subtype(obj.type, *t, obj.partition);
        if (c.op == CmpOp::Eq) return sub;
        if (c.op == CmpOp::Ne) return !sub;
        return false;
      }
      return compare_literal(read(Item::object(obj.name), c.attr, "", false), c.op, c.literal);
    }
    case Constraint::Kind::And:
      for (auto& ch : c.children)
        if (!domain_ok(*ch, obj)) return false;
      return true;
    case Constraint::Kind::Or:
      for (auto& ch : c.children)
        if (domain_ok(*ch, obj)) return true;
      return false;
    case Constraint::Kind::Not: return !domain_ok(*c.children[0], obj);
    case Constraint::Kind::Implies:
      return !domain_ok(*c.children[0], obj) || domain_ok(*c.children[1], obj);
  }
  return false;
}

void Engine::check_relation(RelKey& key) const {
  const ObjectRec* o = db_.object(key.origin);
  if (!o) throw Error("unknown object " + key.origin);
  const ObjectRec* d = db_.object(key.dest);
  if (!d) throw Error("unknown object " + key.dest);
  auto name = schema().resolve_name(key.rel, o->partition);
  if (!name) throw Error("unknown relation type " + key.rel);
  auto t = schema().effective(*name, o->partition);
  if (t->kind != TypeKind::Relation) throw Error(*name + " is not a relation type");
  key.rel = *name;

  if (!t->domain.empty()) {
    bool ok = std::any_of(t->domain.begin(), t->domain.end(), [&](const DomainPair& p) {
      return domain_ok(*p.origin, *o) && domain_ok(*p.dest, *d);
    });
    if (!ok)
      throw Error("DOMAIN violation: " + key.origin + " -> " + key.dest + " not allowed by " +
                  key.rel);
  }
  auto count = [&](const std::vector<RelKey>& ks) {
    return std::count_if(ks.begin(), ks.end(), [&](const RelKey& k) { return k.rel == key.rel; });
  };
  bool one_parent = t->card == Cardinality::OneMany || t->card == Cardinality::OneOne ||
                    t->structure == Structure::Tree;
  if (one_parent && count(db_.incoming(key.dest)) > 0)
    throw Error("cardinality violation: " + key.dest + " already has a " + key.rel + " origin");
  bool one_child = t->card == Cardinality::ManyOne || t->card == Cardinality::OneOne;
  if (one_child && count(db_.outgoing(key.origin)) > 0)
    throw Error("cardinality violation: " + key.origin + " already has a " + key.rel +
                " destination");
  if (t->structure != Structure::None) {
    bool cycle = key.origin == key.dest;
    std::set<std::string> seen{key.dest};
    std::deque<std::string> todo{key.dest};
    while (!cycle && !todo.empty()) {
      std::string n = todo.front();
      todo.pop_front();
      for (auto& k : db_.outgoing(n)) {
        if (k.rel != key.rel) continue;
        if (k.dest == key.origin) {
          cycle = true;
          break;
        }
        if (seen.insert(k.dest).second) todo.push_back(k.dest);
      }
    }
    if (cycle) throw Error("cycle in DAG relation " + key.rel);
  }
}

void Engine::do_create_relation(const RelKey& key) {
  if (!tx_) throw Error("no open transaction");
  RelKey k = key;
  check_relation(k);
  db_.create_relation(k, now(), current_user());
}

void Engine::do_delete_relation(const RelKey& key) {
  if (!tx_) throw Error("no open transaction");
  db_.tombstone_relation(key);
}

void Engine::do_write(const Item& target, const std::string& attr, const Value& v,
                      const std::string& we) {
  if (!tx_) throw Error("no open transaction");
  if (target.kind == Item::Kind::Value) throw Error("cannot set " + attr + " on a plain value");
  std::string cmd = tx_->cmds.empty() ? tx_->label : tx_->cmds.back();
  Slot s = slot(target, attr, we);
  std::string tname = target.kind == Item::Kind::Object ? target.name : target.rel.str();
  if (!s.def) throw Error("unknown attribute " + attr + " of " + tname);
  if (!v.is_unset() && !s.def->domain.contains(v))
    throw Error("domain violation: " + v.display() + " is not in " + s.def->domain.describe() +
                " for " + s.def->name);
  if (s.overlay) {
    if (!db_.relation(*s.overlay)) throw Error("unknown relation " + s.overlay->str());
    db_.write_relation_attr(*s.overlay, s.def->name, v, now(), current_user(), cmd);
    tx_->writes.push_back(Write{target.name, s.overlay, s.def->name, v, s.overlay->origin});
    return;
  }
  if (target.kind == Item::Kind::Object) {
    if (!db_.object(target.name)) throw Error("unknown object " + target.name);
    db_.write_object_attr(target.name, s.def->name, v, now(), current_user(), cmd);
    tx_->writes.push_back(Write{target.name, std::nullopt, s.def->name, v, we});
  } else {
    if (!db_.relation(target.rel)) throw Error("unknown relation " + target.rel.str());
    db_.write_relation_attr(target.rel, s.def->name, v, now(), current_user(), cmd);
    tx_->writes.push_back(Write{"", target.rel, s.def->name, v, we});
  }
}

void Engine::do_write_text(const Item& target, const std::string& attr, const std::string& text,
                           const std::string& we) {
  Slot s = slot(target, attr, we);
  if (!s.def) throw Error("unknown attribute " + attr + " of " + target.text());
  auto v = s.def->domain.parse(text);
  if (!v)
    throw Error("domain violation: " + text + " is not in " + s.def->domain.describe() +
                " for " + s.def->name);
  do_write(target, attr, *v, we);
}

Value Engine::coerce(const Item& target, const std::string& attr, const Items& values,
                     const std::string& we) const {
  Slot s = slot(target, attr, we);
  if (!s.def) throw Error("unknown attribute " + attr + " of " + target.text());
  const Domain& dom = s.def->domain;
  if (dom.kind == DomainKind::SetOf) {
    std::vector<std::string> members;
    for (auto& i : values)
      for (auto& e : item_value(i).elements()) members.push_back(e);
    return Value::set(members);
  }
  if (values.empty()) return {};
  if (values.size() > 1)
    throw Error("attribute " + s.def->name + " takes one value, got " +
                std::to_string(values.size()));
  Value v = item_value(values[0]);
  if (dom.contains(v)) return v;
  if (auto p = dom.parse(v.display())) return *p;
  throw Error("domain violation: " + v.display() + " is not in " + dom.describe() + " for " +
              s.def->name);
}

int Engine::do_new_revision(const std::string& obj, const std::string& branch) {
  if (!tx_) throw Error("no open transaction");
  if (!db_.object(obj)) throw Error("unknown object " + obj);
  return db_.add_revision(obj, branch, now(), current_user()).number;
}

void Engine::do_write_file(const fs::path& path, const std::string& content) {
  if (!tx_) throw Error("no open transaction");
  std::optional<std::string> before;
  if (fs::is_regular_file(path)) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    before = ss.str();
  }
  std::vector<fs::path> made;
  for (auto p = path.parent_path(); !p.empty() && !fs::exists(p); p = p.parent_path())
    made.push_back(p);
  std::error_code ec;
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string(), ErrorKind::Io);
  out << content;
  out.close();
  tx_->log.push_back(UndoEntry{Fields{}.add("op", "file").add("path", escape(path.string())),
                               [path, before, made] {
                                 std::error_code e;
                                 if (before) {
                                   std::ofstream o(path, std::ios::binary | std::ios::trunc);
                                   o << *before;
                                 } else {
                                   fs::remove(path, e);
                                 }
                                 for (auto& d : made) fs::remove(d, e);
                               }});
}

void Engine::do_remove_file(const fs::path& path) {
  if (!tx_) throw Error("no open transaction");
  if (!fs::is_regular_file(path)) return;
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string before = ss.str();
  in.close();
  fs::remove(path);
  tx_->log.push_back(UndoEntry{Fields{}.add("op", "file").add("path", escape(path.string())),
                               [path, before] {
                                 std::error_code e;
                                 fs::create_directories(path.parent_path(), e);
                                 std::ofstream o(path, std::ios::binary | std::ios::trunc);
                                 o << before;
                               }});
}

void Engine::do_mail(const std::string& user, const std::string& message) {
  if (!tx_) throw Error("no open transaction");
  db_.mail(user, message);
}

// ------------------------------------------------------------------ triggers

int Engine::event_priority(const TriggerDef& t) const {
  if (t.inline_event || t.event.empty()) return 0;
  if (auto* rule = schema().event(t.event)) return rule->priority;
  return 0;
}

bool Engine::event_true(const TriggerDef& t, Frame& f) {
  if (t.inline_event) return eval_cond(*t.inline_event, f);
  if (auto* rule = schema().event(t.event)) {
    if (ref_guard_.count(rule->name)) return false;
    ref_guard_.insert(rule->name);
    bool r = false;
    try {
      r = eval_cond(*rule->expr, f);
    } catch (...) {
      ref_guard_.erase(rule->name);
      throw;
    }
    ref_guard_.erase(rule->name);
    return r;
  }
  return canonical_command(t.event) == canonical_command(f.cmd);
}

std::string Engine::source_of(const Candidate& c) {
  if (c.rel) return c.rel->rel + "(" + c.rel->origin + "->" + c.rel->dest + ")";
  return c.trig->owner;
}

std::vector<Engine::Candidate> Engine::gather(const Frame& ev, Coupling coupling) const {
  std::vector<Candidate> out;
  std::size_t seq = 0;
  auto add = [&](const std::shared_ptr<const ResolvedType>& t, const ResolvedTrigger& rt,
                 std::optional<RelKey> rel, bool global) {
    Candidate c;
    c.type = t;
    c.trig = &rt;
    c.rel = std::move(rel);
    c.global = global;
    c.priority = event_priority(rt.def);
    c.event = rt.def.event.empty() && rt.def.inline_event ? print_cond(*rt.def.inline_event)
                                                          : rt.def.event;
    c.seq = seq++;
    out.push_back(std::move(c));
  };
  if (auto t = type_of(ev.receiver))
    for (auto& rt : t->triggers)
      if (rt.def.coupling == coupling && rt.def.scope == Scope::Entity)
        add(t, rt, std::nullopt, false);
  if (ev.receiver.kind == Item::Kind::Object) {
    for (auto& k : ev.incident) {
      auto t = rtype(k);
      if (!t) continue;
      bool is_origin = k.origin == ev.receiver.name, is_dest = k.dest == ev.receiver.name;
      for (auto& rt : t->triggers) {
        if (rt.def.coupling != coupling) continue;
        bool match = (rt.def.scope == Scope::Origin && is_origin) ||
                     (rt.def.scope == Scope::Dest && is_dest);
        if (!match) continue;
        bool global = rt.def.visibility == Visibility::Global;
        if (!global && !relation_visible(k, ev.we)) continue;
        add(t, rt, k, global);
      }
    }
  }
  return out;
}

Frame Engine::trigger_frame(const Candidate& c, const Frame& ev) const {
  Frame f;
  f.receiver = ev.receiver;
  f.cmd = ev.cmd;
  f.params = ev.params;
  f.incident = ev.incident;
  f.writes = ev.writes;
  f.we = ev.we;
  f.admin = ev.admin || c.global;
  if (c.rel) {
    const RelKey& k = *c.rel;
    f.bindings["o"] = {Item::object(k.origin)};
    f.bindings["d"] = {Item::object(k.dest)};
    bool recv_origin = ev.receiver.kind == Item::Kind::Object && ev.receiver.name == k.origin;
    f.bindings["s"] = {Item::object(recv_origin ? k.dest : k.origin)};
    f.bindings["reltype"] = {Item::of_value(Value::string(k.rel))};
    f.bindings["realttype"] = f.bindings["reltype"];
    if (c.trig->def.self_is_receiver) {
      f.self = ev.receiver;
      f.self.via = k;
      f.we = k.origin;
    } else {
      f.self = Item::relation(k);
    }
  } else {
    f.self = ev.receiver;
    if (ev.receiver.kind == Item::Kind::Relation) {
      f.bindings["o"] = {Item::object(ev.receiver.rel.origin)};
      f.bindings["d"] = {Item::object(ev.receiver.rel.dest)};
    }
  }
  return f;
}

std::vector<Engine::Pending> Engine::collect(const Frame& ev, Coupling coupling) {
  std::vector<Pending> out;
  for (auto& c : gather(ev, coupling)) {
    Frame f = trigger_frame(c, ev);
    if (event_true(c.trig->def, f)) out.push_back(Pending{c, std::move(f)});
  }
  std::stable_sort(out.begin(), out.end(), [](const Pending& x, const Pending& y) {
    const Candidate& a = x.cand;
    const Candidate& b = y.cand;
    if (a.priority != b.priority) return a.priority > b.priority;
    if (a.trig->depth != b.trig->depth) return a.trig->depth < b.trig->depth;
    if (a.rel.has_value() != b.rel.has_value()) return !a.rel.has_value();
    if (a.rel && *a.rel != *b.rel) return *a.rel < *b.rel;
    if (a.trig->order != b.trig->order) return a.trig->order < b.trig->order;
    return a.seq < b.seq;
  });
  return out;
}

void Engine::fire(std::vector<Pending>& batch, const char* phase) {
  for (auto& p : batch) {
    const StmtPtr& action = p.cand.trig->def.action;
    trace(phase, p.cand.event, p.cand.priority, source_of(p.cand),
          action ? print_stmt(*action) : "");
    if (!action) continue;
    int level = tx_->nest;
    tx_->nest = level + 1;
    exec(*action, p.frame);
    tx_->nest = level;
  }
}

// ------------------------------------------------------------------ invocation

void Engine::do_invoke(const Item& receiver, const std::string& method, std::vector<CallArg> args,
                       const Frame* caller) {
  if (!tx_) throw Error("no open transaction");
  if (receiver.kind == Item::Kind::Object) {
    if (!db_.object(receiver.name)) abort("unknown object " + receiver.name);
  } else if (receiver.kind == Item::Kind::Relation) {
    if (!db_.relation(receiver.rel)) abort("unknown relation " + receiver.rel.str());
  } else {
    abort("method " + method + " needs an object or relation receiver, got '" +
          receiver.text() + "'");
  }
  const Session& ses = tx_->session;
  std::string we = caller ? caller->we : ses.we;
  if (!caller && !ses.we.empty() && tx_->nest == 0) {
    auto it = db_.wes().find(ses.we);
    if (it != db_.wes().end() && !it->second.tools.empty()) {
      bool permitted = std::any_of(it->second.tools.begin(), it->second.tools.end(),
                                   [&](const std::string& t) { return iequals(t, method); });
      if (!permitted) abort("tool not permitted: " + method);
    }
  }

  Frame ev;
  ev.self = receiver;
  ev.receiver = receiver;
  ev.cmd = method;
  ev.we = we;
  ev.admin = caller && caller->admin;
  if (receiver.kind == Item::Kind::Object) {
    std::set<RelKey> inc;
    for (auto& k : db_.outgoing(receiver.name)) inc.insert(k);
    for (auto& k : db_.incoming(receiver.name)) inc.insert(k);
    ev.incident.assign(inc.begin(), inc.end());
  }

  // Method resolution: relation overloads, entity, free, builtin, implicit.
  const MethodDef* def = nullptr;
  std::string source;
  std::optional<RelKey> via_rel;
  std::shared_ptr<const ResolvedType> def_owner;  // keeps `def` alive
  if (receiver.kind == Item::Kind::Object) {
    std::set<std::string> rel_types;
    for (auto& k : ev.incident) {
      if (!relation_visible(k, we)) continue;
      auto t = rtype(k);
      if (!t) continue;
      for (auto& [n, m] : t->methods) {
        if (!iequals(n, method) || m.def.scope == Scope::Entity) continue;
        bool match = (m.def.scope == Scope::Origin && k.origin == receiver.name) ||
                     (m.def.scope == Scope::Dest && k.dest == receiver.name);
        if (!match) continue;
        rel_types.insert(m.owner);
        if (!def) {
          def = &m.def;
          def_owner = t;
          via_rel = k;
          source = k.rel + "(" + k.origin + "->" + k.dest + ")";
        }
      }
    }
    if (rel_types.size() > 1)
      abort("ambiguous method " + method + ": defined by relation types " + *rel_types.begin() +
            " and " + *std::next(rel_types.begin()));
  }
  if (!def) {
    if (auto t = type_of(receiver)) {
      for (auto& [n, m] : t->methods)
        if (iequals(n, method) && m.def.scope == Scope::Entity) {
          def = &m.def;
          def_owner = t;
          source = m.owner;
          break;
        }
    }
  }
  if (!def) {
    if (auto* m = schema().free_method(method)) {
      def = m;
      source = "free";
    }
  }
  std::string canon = canonical_command(method);
  bool is_builtin = !def && kReceiverBuiltins.count(canon);
  bool implicit = false;
  if (!def && !is_builtin) {
    for (auto c : {Coupling::Pre, Coupling::Post, Coupling::After, Coupling::Error}) {
      for (auto& cand : gather(ev, c)) {
        const auto& d = cand.trig->def;
        if (!d.inline_event && canonical_command(d.event) == canon) implicit = true;
        if (implicit) break;
      }
      if (implicit) break;
    }
    if (!implicit) abort("unknown method " + method + " on " + receiver.text());
  }

  // Parameters: declared names, flag letters, positions.
  std::size_t pos = 0;
  for (auto& a : args) {
    if (!a.flag.empty()) {
      ev.params[a.flag] = a.value;
      if (def)
        for (auto& [fl, pn] : def->flag_params)
          if (strip_marks(fl) == a.flag) ev.params[strip_marks(pn)] = a.value;
      if (is_builtin) {
        if (canon == "copy" && a.flag == "d") ev.params["new"] = a.value;
        if (canon == "makerel" && a.flag == "r") ev.params["reltype"] = a.value;
        if (canon == "makerel" && a.flag == "d") ev.params["dest"] = a.value;
        if ((canon == "mda" || canon == "set") && a.flag == "a") ev.params["attr"] = a.value;
      }
    } else {
      ev.params["#" + std::to_string(pos)] = a.value;
      if (def && pos < def->params.size()) ev.params[strip_marks(def->params[pos])] = a.value;
      ++pos;
    }
  }

  tx_->events.push_back(user_of(ev) + "|" + receiver.text() + "|" + method);
  tx_->cmds.push_back(method);
  int level = tx_->nest;

  for (auto& c : gather(ev, Coupling::Error))
    tx_->errors.push_back(Pending{c, trigger_frame(c, ev)});

  auto pre = collect(ev, Coupling::Pre);
  fire(pre, "PRE");

  Frame mf;
  mf.self = receiver;
  mf.receiver = receiver;
  mf.cmd = method;
  mf.params = ev.params;
  mf.incident = ev.incident;
  mf.we = we;
  mf.admin = ev.admin;
  if (via_rel) {
    mf.bindings["o"] = {Item::object(via_rel->origin)};
    mf.bindings["d"] = {Item::object(via_rel->dest)};
    mf.bindings["s"] = {Item::object(via_rel->origin == receiver.name ? via_rel->dest
                                                                      : via_rel->origin)};
    mf.bindings["reltype"] = {Item::of_value(Value::string(via_rel->rel))};
    mf.bindings["realttype"] = mf.bindings["reltype"];
    if (schema().role_of(via_rel->rel)) {
      mf.self.via = via_rel;
      mf.we = via_rel->origin;
    }
  } else if (receiver.kind == Item::Kind::Relation) {
    mf.bindings["o"] = {Item::object(receiver.rel.origin)};
    mf.bindings["d"] = {Item::object(receiver.rel.dest)};
  }

  if (def) {
    trace("METHOD", method, 0, source, def->body ? print_stmt(*def->body) : "");
    if (def->body) {
      tx_->nest = level + 1;
      exec(*def->body, mf);
      tx_->nest = level;
    }
  } else if (is_builtin) {
    trace("METHOD", method, 0, "builtin", canon);
    tx_->nest = level + 1;
    builtin(canon, mf);
    tx_->nest = level;
  } else {
    trace("METHOD", method, 0, "event", "");
  }

  auto post = collect(ev, Coupling::Post);
  fire(post, "POST");
  for (auto& p : collect(ev, Coupling::After)) {
    p.frame.writes = nullptr;
    tx_->after.push_back(std::move(p));
  }
  tx_->cmds.pop_back();
}

void Engine::builtin(const std::string& name, Frame& f) {
  const Item& target = f.self;
  auto param = [&](const std::string& key) -> const Items* {
    auto it = f.params.find(key);
    return it == f.params.end() ? nullptr : &it->second;
  };
  auto param_text = [&](const std::string& key) -> std::string {
    auto* p = param(key);
    if (!p || p->empty()) abort(name + ": missing -" + key + " argument");
    return (*p)[0].text();
  };
  if (name == "newstate") {
    auto* v = param("#0");
    if (!v) abort("newstate: missing state value");
    std::string attr = "status";
    if (target.kind == Item::Kind::Object) {
      if (target.via) {
        auto rt = rtype(*target.via);
        auto ot = type_of(Item::object(target.name));
        attr = ot ? ot->state_attribute() : "state";
        if (rt && !find_attr(*rt, attr)) attr = rt->state_attribute();
      } else {
        auto t = type_of(target);
        attr = t ? t->state_attribute() : "state";
      }
    }
    do_write(target, attr, coerce(target, attr, *v, f.we), f.we);
  } else if (name == "mda" || name == "set") {
    std::string attr = param_text("a");
    auto* v = param("#0");
    do_write(target, attr, coerce(target, attr, v ? *v : Items{}, f.we), f.we);
  } else if (name == "delete") {
    if (target.kind == Item::Kind::Relation) {
      do_delete_relation(target.rel);
    } else {
      for (auto& k : db_.outgoing(target.name)) do_delete_relation(k);
      for (auto& k : db_.incoming(target.name)) do_delete_relation(k);
      db_.tombstone_object(target.name);
    }
  } else if (name == "copy") {
    if (target.kind != Item::Kind::Object) abort("copy needs an object");
    std::string dest = param_text("d");
    const ObjectRec* rec = db_.object(target.name);
    do_create_object(dest, rec->type, rec->partition);
    auto attrs = db_.object(target.name)->attrs;
    for (auto& [a, v] : attrs) do_write(Item::object(dest), a, v, "");
  } else if (name == "makerel") {
    if (target.kind != Item::Kind::Object) abort("makerel needs an origin object");
    do_create_relation(RelKey{target.name, param_text("r"), param_text("d")});
  } else if (name == "replace") {
    if (target.kind != Item::Kind::Object) abort("replace needs an object");
    if (auto* c = param("c"))
      do_write(target, "content", Value::string(join_texts(*c)), "");
    do_new_revision(target.name);
  }
}

void Engine::free_builtin(const std::string& name, const std::vector<CallArg>& args, Frame& f) {
  std::vector<std::string> words;
  std::string to;
  for (auto& a : args) {
    if (!a.flag.empty() && (a.flag == "u" || a.flag == "to")) {
      to = join_texts(a.value);
      continue;
    }
    if (!a.flag.empty()) words.push_back("-" + a.flag);
    if (!a.value.empty()) words.push_back(join_texts(a.value));
  }
  std::string text;
  for (std::size_t i = 0; i < words.size(); ++i) text += (i ? " " : "") + words[i];
  text = trim(substitute(text, f));
  if (name == "print" || name == "echo") {
    output(text);
  } else if (name == "mail") {
    if (to.empty()) {
      Item who = f.receiver;
      auto b = f.bindings.find("o");
      if (b != f.bindings.end() && !b->second.empty()) who = b->second[0];
      if (who.kind == Item::Kind::Object) {
        for (auto* a : {"owner", "author"}) {
          Value v = read(who, a, "", false);
          if (!v.is_unset() && !v.display().empty()) {
            to = v.display();
            break;
          }
        }
        if (to.empty())
          if (auto* rec = db_.any_object(who.name)) to = rec->creator;
      }
      if (to.empty()) to = user_of(f);
    }
    if (text.empty()) text = f.cmd + " " + f.receiver.text() + " by " + user_of(f);
    do_mail(to, text);
    trace("MAIL", f.cmd, 0, to, text);
  } else if (name == "sh") {
    std::string cmd = text + " 2>&1";
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) abort("cannot run " + text);
    std::string out;
    char buf[256];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) out.append(buf, n);
    int status = pclose(p);
    std::istringstream lines(out);
    for (std::string l; std::getline(lines, l);) output(l);
    if (status != 0) {
      if (abort_on_command_failure_) abort("command failed: " + text);
      tx_->diagnostics.push_back("command failed: " + text);
    }
  }
}

// ------------------------------------------------------------------ interpreter

void Engine::exec(const Stmt& s, Frame& f) {
  switch (s.kind) {
    case Stmt::Kind::Block:
      for (auto& st : s.body) exec(*st, f);
      break;
    case Stmt::Kind::If:
      if (eval_cond(*s.cond, f))
        exec(*s.then_branch, f);
      else if (s.else_branch)
        exec(*s.else_branch, f);
      break;
    case Stmt::Kind::Abort: {
      std::string msg;
      if (s.value) msg = trim(substitute(join_texts(eval(*s.value, f)), f));
      if (msg.empty()) msg = f.cmd + " on " + f.receiver.text() + " aborted";
      abort(msg);
    }
    case Stmt::Kind::Assign: assign(s, f); break;
    case Stmt::Kind::New: make_we(s.name, f); break;
    case Stmt::Kind::Call: call(s, f); break;
  }
}

void Engine::call(const Stmt& s, Frame& f) {
  std::string canon = canonical_command(s.name);
  bool free = kFreeBuiltins.count(canon) > 0;
  std::vector<CallArg> args;
  std::optional<Items> receivers;
  bool first = true;
  for (auto& a : s.args) {
    CallArg ca;
    ca.flag = a.flag;
    if (a.value) ca.value = eval(*a.value, f);
    if (!free && first && a.flag.empty() && a.value) {
      first = false;
      auto k = a.value->kind;
      bool entity_expr = k == Expr::Kind::Self || k == Expr::Kind::Binding ||
                         k == Expr::Kind::RelPattern || k == Expr::Kind::Collect;
      bool all_entities = std::all_of(ca.value.begin(), ca.value.end(),
                                      [](const Item& i) { return i.is_entity(); });
      if (entity_expr && all_entities && (!ca.value.empty() || k != Expr::Kind::Binding)) {
        receivers = ca.value;
        continue;
      }
      if ((k == Expr::Kind::Param || k == Expr::Kind::Word) && ca.value.size() == 1) {
        const Item& i = ca.value[0];
        if (i.is_entity()) {
          receivers = ca.value;
          continue;
        }
        if (db_.object(i.text())) {
          receivers = Items{Item::object(i.text())};
          continue;
        }
      }
    }
    args.push_back(std::move(ca));
  }
  if (free) {
    free_builtin(canon, args, f);
    return;
  }
  Items targets = receivers ? *receivers : Items{f.self};
  for (auto& t : targets) do_invoke(t, s.name, args, &f);
}

void Engine::assign(const Stmt& s, Frame& f) {
  const Expr& t = *s.target;
  Items targets;
  std::string attr;
  if (!t.steps.empty() && t.steps.back().kind == Step::Kind::Attr) {
    Expr base = t;
    base.steps.pop_back();
    targets = eval(base, f);
    attr = t.steps.back().name;
  } else if (t.kind == Expr::Kind::Word && t.steps.empty()) {
    auto segs = split(t.name, '.');
    if (segs.size() > 1 && is_role_path(segs, f)) {
      attr = segs.back();
      segs.pop_back();
      targets = role_path(segs, f);
    } else {
      targets = {f.self};
      attr = t.name;
    }
  } else {
    abort("invalid assignment target " + print_expr(t));
  }
  Items values = eval(*s.value, f);
  for (auto& tg : targets) {
    if (!tg.is_entity()) abort("cannot assign " + attr + " on value " + tg.text());
    std::string we = tg.via ? tg.via->origin : f.we;
    do_write(tg, attr, coerce(tg, attr, values, we), we);
  }
}

void Engine::make_we(const std::string& role, Frame& f) {
  std::string parent = process_context(f);
  if (parent.empty()) abort("new " + role + " outside a process");
  std::string key = "new:" + parent + ":" + role;
  if (db_.guards().count(key)) {
    trace("NEW", role, 0, parent, "already created");
    return;
  }
  if (!role_factory_) abort("no process layer to create role " + role);
  db_.add_guard(key);
  trace("NEW", role, 0, parent, "create");
  role_factory_(parent, role);
}

std::string Engine::process_context(const Frame& f) const {
  if (f.self.kind == Item::Kind::Object && is_process_instance(f.self.name)) return f.self.name;
  if (!f.we.empty()) return f.we;
  return {};
}

namespace {

const ProcessDef* process_of_instance(const Schema& schema, const ObjectRec* rec) {
  if (!rec) return nullptr;
  if (auto* p = schema.process(rec->type)) return p;
  for (auto& t : schema.linearize(rec->type, rec->partition))
    if (auto* p = schema.process(t)) return p;
  return nullptr;
}

}  // namespace

bool Engine::is_role_path(const std::vector<std::string>& segs, const Frame& f) const {
  std::string inst = process_context(f);
  if (inst.empty() || segs.empty()) return false;
  auto* p = process_of_instance(schema(), db_.any_object(inst));
  return p && p->role(segs[0]);
}

Items Engine::role_path(const std::vector<std::string>& segs, Frame& f) {
  std::string inst = process_context(f);
  if (inst.empty()) abort("role path outside a process");
  Items cur{Item::object(inst)};
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const std::string& seg = segs[i];
    if (!seg.empty() && seg[0] == '%') {
      auto v = lookup_param(seg.substr(1), f);
      if (!v) abort("unbound %" + seg.substr(1));
      std::set<std::string> names;
      for (auto& x : *v) names.insert(x.text());
      Items kept;
      for (auto& c : cur)
        if (names.count(c.text())) kept.push_back(c);
      cur = std::move(kept);
      continue;
    }
    bool roles = !cur.empty();
    Items next;
    for (auto& c : cur) {
      const RoleDef* r = nullptr;
      if (c.kind == Item::Kind::Object)
        if (auto* p = process_of_instance(schema(), db_.any_object(c.name))) r = p->role(seg);
      if (!r) {
        roles = false;
        break;
      }
      for (auto& k : db_.outgoing(c.name))
        if (k.rel == r->relation) next.push_back(Item::object(k.dest, k));
    }
    if (roles) {
      cur = std::move(next);
      continue;
    }
    if (cur.empty()) return {};
    if (i + 1 != segs.size()) {
      std::string path;
      for (std::size_t j = 0; j < segs.size(); ++j) path += (j ? "." : "") + segs[j];
      abort("unresolved role path " + path);
    }
    // A copy with no value still counts, so `== v` needs every copy at v.
    return attr_step(cur, seg, f, true);
  }
  return cur;
}

Items Engine::attr_step(const Items& in, const std::string& attr, Frame& f, bool keep_unset) {
  Items out;
  for (auto& i : in) {
    if (!i.is_entity()) continue;
    std::string we = i.via ? i.via->origin : f.we;
    Value v = read(i, attr, we, false);
    // Inside `~` an unset member stays visible so `== v` fails on it.
    if (!v.is_unset() || collecting_ || keep_unset) out.push_back(Item::of_value(std::move(v)));
  }
  return out;
}

Items Engine::apply_steps(Items in, const std::vector<Step>& steps, Frame& f) {
  for (auto& st : steps) {
    if (st.kind == Step::Kind::Attr) {
      in = attr_step(in, st.name, f);
      continue;
    }
    auto rname = schema().resolve_name(st.name);
    std::string rel = rname ? *rname : st.name;
    Items out;
    std::set<std::string> seen;
    for (auto& i : in) {
      if (i.kind != Item::Kind::Object) continue;
      for (auto& k : db_.incoming(i.name))
        if ((k.rel == rel || schema().is_subtype(k.rel, rel)) && relation_visible(k, f.we) &&
            seen.insert(k.origin).second)
          out.push_back(Item::object(k.origin));
    }
    in = std::move(out);
  }
  return in;
}

std::optional<Items> Engine::lookup_param(const std::string& name, const Frame& f) const {
  auto it = f.params.find(name);
  if (it != f.params.end()) return it->second;
  for (auto& [k, v] : f.params)
    if (iequals(k, name)) return v;
  auto b = f.bindings.find(to_lower(name));
  if (b != f.bindings.end()) return b->second;
  if (f.self.is_entity()) {
    Value v = read(f.self, name, f.self.via ? f.self.via->origin : f.we, false);
    if (!v.is_unset()) return Items{Item::of_value(v)};
  }
  return std::nullopt;
}

std::optional<Items> Engine::lookup_binding(const std::string& name, const Frame& f) const {
  std::string l = to_lower(name);
  if (l == "cmd") return Items{Item::of_value(Value::string(f.cmd))};
  if (l == "object") return Items{f.receiver};
  if (l == "username" || l == "curentuser" || l == "currentuser" || l == "user")
    return Items{Item::of_value(Value::string(user_of(f)))};
  if (l == "type") {
    if (auto t = type_of(f.receiver)) return Items{Item::of_value(Value::string(t->name))};
    return Items{};
  }
  if (l == "modified") {
    bool m = false;
    const std::vector<Write>* ws = f.writes ? f.writes : (tx_ ? &tx_->writes : nullptr);
    if (ws)
      for (auto& w : *ws) {
        if (f.receiver.kind == Item::Kind::Object && w.object == f.receiver.name) m = true;
        if (f.receiver.kind == Item::Kind::Relation && w.relation && w.object.empty() &&
            *w.relation == f.receiver.rel)
          m = true;
      }
    return Items{Item::of_value(Value::boolean(m))};
  }
  auto it = f.bindings.find(l);
  if (it != f.bindings.end()) return it->second;
  return std::nullopt;
}

std::string Engine::substitute(const std::string& text, const Frame& f) const {
  std::string out;
  for (std::size_t i = 0; i < text.size();) {
    char c = text[i];
    bool mark = (c == '%' || c == '!') && i + 1 < text.size() &&
                (std::isalpha(static_cast<unsigned char>(text[i + 1])) || text[i + 1] == '_');
    if (!mark) {
      out += c;
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_'))
      ++j;
    std::string name = text.substr(i + 1, j - i - 1);
    std::optional<Items> v;
    try {
      v = c == '%' ? lookup_param(name, f) : lookup_binding(name, f);
    } catch (const Error&) {
    }
    if (v)
      out += join_texts(*v, ",");
    else
      out += text.substr(i, j - i);
    i = j;
  }
  return out;
}

Items Engine::eval_word(const std::string& word, Frame& f, bool lhs) {
  auto segs = split(word, '.');
  if (segs.size() > 1 && is_role_path(segs, f)) return role_path(segs, f);
  if (lhs && f.self.is_entity()) {
    std::string we = f.self.via ? f.self.via->origin : f.we;
    Slot s = slot(f.self, word, we);
    if (s.def) {
      Value v = read(f.self, word, we, false);
      if (v.is_unset()) return {};
      return {Item::of_value(std::move(v))};
    }
  }
  auto it = f.params.find(word);
  if (it != f.params.end()) return it->second;
  return {Item::of_value(Value::string(word))};
}

Items Engine::eval(const Expr& e, Frame& f, bool lhs) {
  Items base;
  switch (e.kind) {
    case Expr::Kind::Literal: base = {Item::of_value(e.literal.value())}; break;
    case Expr::Kind::Word: base = eval_word(e.name, f, lhs && e.steps.empty()); break;
    case Expr::Kind::Self: base = {f.self}; break;
    case Expr::Kind::Wildcard: base = {Item::of_value(Value::string("**"))}; break;
    case Expr::Kind::Binding: {
      auto v = lookup_binding(e.name, f);
      if (!v) abort("unbound !" + e.name);
      base = *v;
      break;
    }
    case Expr::Kind::Param: {
      auto v = lookup_param(e.name, f);
      if (!v) abort("unbound %" + e.name);
      base = *v;
      break;
    }
    case Expr::Kind::Collect: {
      bool outer = collecting_;
      collecting_ = true;
      Items inner;
      try {
        inner = eval(*e.a, f);
      } catch (...) {
        collecting_ = outer;
        throw;
      }
      collecting_ = outer;
      std::set<std::string> seen;
      for (auto& i : inner)
        if (seen.insert(i.text()).second) base.push_back(i);
      break;
    }
    case Expr::Kind::RelPattern: {
      auto side = [&](const ExprPtr& x) -> std::optional<std::set<std::string>> {
        if (x->kind == Expr::Kind::Wildcard && x->steps.empty()) return std::nullopt;
        std::set<std::string> names;
        for (auto& i : eval(*x, f)) names.insert(i.text());
        return names;
      };
      auto a = side(e.a), b = side(e.b);
      auto rname = schema().resolve_name(e.name);
      std::string rel = rname ? *rname : e.name;
      auto type_ok = [&](const RelKey& k) {
        return (k.rel == rel || schema().is_subtype(k.rel, rel)) && relation_visible(k, f.we);
      };
      auto scan = [&](const std::optional<std::set<std::string>>& from,
                      const std::optional<std::set<std::string>>& to) {
        Items out;
        std::set<RelKey> keys;
        if (from) {
          for (auto& o : *from)
            for (auto& k : db_.outgoing(o))
              if (type_ok(k) && (!to || to->count(k.dest))) keys.insert(k);
        } else if (to) {
          for (auto& d : *to)
            for (auto& k : db_.incoming(d))
              if (type_ok(k)) keys.insert(k);
        } else {
          for (auto& [k, r] : db_.relations())
            if (!r.deleted && type_ok(k)) keys.insert(k);
        }
        for (auto& k : keys) out.push_back(Item::relation(k));
        return out;
      };
      base = scan(a, b);
      if (base.empty() && a.has_value() != b.has_value()) base = scan(b, a);
      break;
    }
  }
  if (e.kind == Expr::Kind::Collect) return base;
  return apply_steps(std::move(base), e.steps, f);
}

bool Engine::eval_cond(const Cond& c, Frame& f) {
  switch (c.kind) {
    case Cond::Kind::True: return true;
    case Cond::Kind::And:
      for (auto& ch : c.children)
        if (!eval_cond(*ch, f)) return false;
      return true;
    case Cond::Kind::Or:
      for (auto& ch : c.children)
        if (eval_cond(*ch, f)) return true;
      return false;
    case Cond::Kind::Not: return !eval_cond(*c.children[0], f);
    case Cond::Kind::Compare: {
      Items l = eval(*c.lhs, f, true);
      Items r = eval(*c.rhs, f, false);
      auto is_cmd = [](const Expr& e) {
        return e.kind == Expr::Kind::Binding && iequals(e.name, "cmd");
      };
      if (is_cmd(*c.lhs) || is_cmd(*c.rhs)) {
        for (auto* side : {&l, &r})
          for (auto& i : *side) i = Item::of_value(Value::string(canonical_command(i.text())));
      }
      return compare_items(l, c.op, r);
    }
    case Cond::Kind::Transition: {
      Items r = eval(*c.rhs, f, false);
      const std::vector<Write>* ws = f.writes ? f.writes : (tx_ ? &tx_->writes : nullptr);
      if (!ws) return false;
      for (auto& w : *ws) {
        bool target = false;
        if (f.receiver.kind == Item::Kind::Object) target = w.object == f.receiver.name;
        if (f.receiver.kind == Item::Kind::Relation)
          target = w.object.empty() && w.relation && *w.relation == f.receiver.rel;
        if (!target || !iequals(w.attr, c.name)) continue;
        for (auto& v : r)
          if (value_match(w.value, CmpOp::Eq, item_value(v))) return true;
      }
      return false;
    }
    case Cond::Kind::History: {
      Items l = eval(*c.lhs, f, false);
      Items r = eval(*c.rhs, f, false);
      for (auto& i : l)
        for (auto& v : r)
          if (i.is_entity() && history_query(i, c.name, c.op, item_value(v))) return true;
      return false;
    }
    case Cond::Kind::Ref: {
      if (auto* rule = schema().event(c.name)) {
        if (ref_guard_.count(rule->name)) return false;
        ref_guard_.insert(rule->name);
        bool r = false;
        try {
          r = eval_cond(*rule->expr, f);
        } catch (...) {
          ref_guard_.erase(rule->name);
          throw;
        }
        ref_guard_.erase(rule->name);
        return r;
      }
      return canonical_command(c.name) == canonical_command(f.cmd);
    }
    case Cond::Kind::Truthy: {
      Items v = eval(*c.lhs, f, true);
      return std::any_of(v.begin(), v.end(), truthy);
    }
  }
  return false;
}

}  // namespace adl
