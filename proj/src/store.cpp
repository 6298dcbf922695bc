#include "adl/store.hpp"

#include <algorithm>

namespace adl {

std::optional<RelKey> RelKey::parse(std::string_view text) {
  auto parts = split(text, '|');
  if (parts.size() != 3) return std::nullopt;
  for (auto& p : parts) p = trim(p);
  if (parts[0].empty() || parts[1].empty() || parts[2].empty()) return std::nullopt;
  return RelKey{parts[0], parts[1], parts[2]};
}

const Branch* ObjectRec::branch(const std::string& n) const {
  for (const auto& b : branches)
    if (b.name == n) return &b;
  return nullptr;
}

Branch* ObjectRec::branch(const std::string& n) {
  for (auto& b : branches)
    if (b.name == n) return &b;
  return nullptr;
}

const char* mode_name(LinkMode m) {
  switch (m) {
    case LinkMode::Copy: return "copy";
    case LinkMode::Static: return "static";
    case LinkMode::Dynamic: return "dynamic";
  }
  return "copy";
}

std::optional<LinkMode> parse_mode(std::string_view s) {
  if (iequals(s, "copy")) return LinkMode::Copy;
  if (iequals(s, "static")) return LinkMode::Static;
  if (iequals(s, "dynamic")) return LinkMode::Dynamic;
  return std::nullopt;
}

std::string snapshot_digest(const std::map<std::string, Value>& snapshot) {
  Digest d;
  for (const auto& [k, v] : snapshot) {
    d.add_field(k);
    d.add_field(v.encode());
  }
  return d.hex();
}

// ---------------------------------------------------------------- lookups

const ObjectRec* Database::object(const std::string& name) const {
  auto it = objects_.find(name);
  if (it == objects_.end() || it->second.deleted) return nullptr;
  return &it->second;
}

const ObjectRec* Database::any_object(const std::string& name) const {
  auto it = objects_.find(name);
  return it == objects_.end() ? nullptr : &it->second;
}

const RelationRec* Database::relation(const RelKey& key) const {
  auto it = relations_.find(key);
  if (it == relations_.end() || it->second.deleted) return nullptr;
  return &it->second;
}

std::vector<RelKey> Database::outgoing(const std::string& obj) const {
  auto it = out_.find(obj);
  if (it == out_.end()) return {};
  return {it->second.begin(), it->second.end()};
}

std::vector<RelKey> Database::incoming(const std::string& obj) const {
  auto it = in_.find(obj);
  if (it == in_.end()) return {};
  return {it->second.begin(), it->second.end()};
}

ObjectRec& Database::obj_mut(const std::string& name) {
  auto it = objects_.find(name);
  if (it == objects_.end()) throw Error("unknown object " + name);
  return it->second;
}

RelationRec& Database::rel_mut(const RelKey& key) {
  auto it = relations_.find(key);
  if (it == relations_.end()) throw Error("unknown relation " + key.str());
  return it->second;
}

void Database::emit(Fields op, std::function<void()> undo) {
  if (log_) log_->push_back({std::move(op), std::move(undo)});
}

// ---------------------------------------------------------------- mutations

void Database::create_object(const std::string& name, const std::string& type,
                             const std::string& partition, Date when, const std::string& user) {
  // Tombstoned names stay reserved so their history remains answerable.
  if (objects_.count(name)) throw Error("duplicate name " + name);
  ObjectRec rec;
  rec.name = name;
  rec.type = type;
  rec.partition = partition;
  rec.created = when;
  rec.creator = user;
  rec.branches.push_back(Branch{"main", {}});
  objects_[name] = std::move(rec);
  emit(Fields{}
           .add("op", "obj")
           .add("name", escape(name))
           .add("type", escape(type))
           .add("part", escape(partition))
           .add("when", std::to_string(when.seconds))
           .add("user", escape(user)),
       [this, name] { objects_.erase(name); });
}

void Database::tombstone_object(const std::string& name) {
  auto& rec = obj_mut(name);
  if (rec.deleted) return;
  rec.deleted = true;
  emit(Fields{}.add("op", "del").add("name", escape(name)),
       [this, name] { objects_[name].deleted = false; });
}

void Database::create_relation(const RelKey& key, Date when, const std::string& user) {
  std::optional<RelationRec> before;
  if (auto it = relations_.find(key); it != relations_.end()) {
    if (!it->second.deleted) throw Error("duplicate relation " + key.str());
    before = it->second;
  }
  RelationRec rec;
  rec.key = key;
  rec.created = when;
  rec.creator = user;
  relations_[key] = std::move(rec);
  out_[key.origin].insert(key);
  in_[key.dest].insert(key);
  emit(Fields{}
           .add("op", "rel")
           .add("o", escape(key.origin))
           .add("r", escape(key.rel))
           .add("d", escape(key.dest))
           .add("when", std::to_string(when.seconds))
           .add("user", escape(user)),
       [this, key, before] {
         out_[key.origin].erase(key);
         in_[key.dest].erase(key);
         if (before)
           relations_[key] = *before;
         else
           relations_.erase(key);
       });
}

void Database::tombstone_relation(const RelKey& key) {
  auto& rec = rel_mut(key);
  if (rec.deleted) return;
  rec.deleted = true;
  out_[key.origin].erase(key);
  in_[key.dest].erase(key);
  emit(Fields{}
           .add("op", "unrel")
           .add("o", escape(key.origin))
           .add("r", escape(key.rel))
           .add("d", escape(key.dest)),
       [this, key] {
         relations_[key].deleted = false;
         out_[key.origin].insert(key);
         in_[key.dest].insert(key);
       });
}

namespace {

void write_with_history(std::map<std::string, Value>& attrs, std::vector<HistoryRecord>& history,
                        const std::string& attr, const Value& v, Date when,
                        const std::string& user, const std::string& cmd) {
  auto it = attrs.find(attr);
  Value old = it == attrs.end() ? Value{} : it->second;
  if (v.is_unset())
    attrs.erase(attr);
  else
    attrs[attr] = v;
  history.push_back(HistoryRecord{when, attr, old, v, cmd, user});
}

}  // namespace

void Database::write_object_attr(const std::string& obj, const std::string& attr, const Value& v,
                                 Date when, const std::string& user, const std::string& cmd) {
  auto& rec = obj_mut(obj);
  auto it = rec.attrs.find(attr);
  std::optional<Value> old = it == rec.attrs.end() ? std::nullopt : std::optional(it->second);
  write_with_history(rec.attrs, rec.history, attr, v, when, user, cmd);
  emit(Fields{}
           .add("op", "set")
           .add("name", escape(obj))
           .add("attr", escape(attr))
           .add("value", v.encode())
           .add("when", std::to_string(when.seconds))
           .add("user", escape(user))
           .add("cmd", escape(cmd)),
       [this, obj, attr, old] {
         auto& r = objects_[obj];
         if (old)
           r.attrs[attr] = *old;
         else
           r.attrs.erase(attr);
         r.history.pop_back();
       });
}

void Database::write_relation_attr(const RelKey& key, const std::string& attr, const Value& v,
                                   Date when, const std::string& user, const std::string& cmd) {
  auto& rec = rel_mut(key);
  auto it = rec.attrs.find(attr);
  std::optional<Value> old = it == rec.attrs.end() ? std::nullopt : std::optional(it->second);
  write_with_history(rec.attrs, rec.history, attr, v, when, user, cmd);
  emit(Fields{}
           .add("op", "rset")
           .add("o", escape(key.origin))
           .add("r", escape(key.rel))
           .add("d", escape(key.dest))
           .add("attr", escape(attr))
           .add("value", v.encode())
           .add("when", std::to_string(when.seconds))
           .add("user", escape(user))
           .add("cmd", escape(cmd)),
       [this, key, attr, old] {
         auto& r = relations_[key];
         if (old)
           r.attrs[attr] = *old;
         else
           r.attrs.erase(attr);
         r.history.pop_back();
       });
}

const Revision& Database::add_revision(const std::string& obj, const std::string& branch,
                                       Date when, const std::string& user) {
  auto& rec = obj_mut(obj);
  Branch* b = rec.branch(branch);
  if (!b) throw Error("unknown branch " + branch + " of " + obj);
  Revision rev;
  rev.number = b->revisions.empty() ? 1 : b->revisions.back().number + 1;
  rev.snapshot = rec.attrs;
  rev.timestamp = when;
  rev.author = user;
  rev.digest = snapshot_digest(rev.snapshot);
  b->revisions.push_back(rev);
  emit(Fields{}
           .add("op", "rev")
           .add("name", escape(obj))
           .add("branch", escape(branch))
           .add("when", std::to_string(when.seconds))
           .add("user", escape(user)),
       [this, obj, branch] { objects_[obj].branch(branch)->revisions.pop_back(); });
  return b->revisions.back();
}

void Database::add_branch(const std::string& obj, const std::string& branch) {
  auto& rec = obj_mut(obj);
  if (rec.branch(branch)) throw Error("duplicate branch " + branch + " of " + obj);
  rec.branches.push_back(Branch{branch, {}});
  emit(Fields{}.add("op", "branch").add("name", escape(obj)).add("branch", escape(branch)),
       [this, obj] { objects_[obj].branches.pop_back(); });
}

void Database::record_schema(const std::string& partition, const std::string& text,
                             std::function<void()> restore) {
  schema_sources_.emplace_back(partition, text);
  emit(Fields{}.add("op", "schema").add("part", escape(partition)).add("text", escape(text)),
       [this, restore] {
         schema_sources_.pop_back();
         restore();
       });
}

// ---------------------------------------------------------------- workspace tables

void Database::put_context(const ContextRec& c) {
  auto it = contexts_.find(c.name);
  std::optional<ContextRec> before =
      it == contexts_.end() ? std::nullopt : std::optional(it->second);
  contexts_[c.name] = c;
  std::string roots;
  for (const auto& r : c.roots) roots += (roots.empty() ? "" : ",") + escape(r);
  emit(Fields{}.add("op", "ctx").add("name", escape(c.name)).add("roots", roots),
       [this, name = c.name, before] {
         if (before)
           contexts_[name] = *before;
         else
           contexts_.erase(name);
       });
}

void Database::put_workspace(const WorkspaceRec& w) {
  auto it = workspaces_.find(w.name);
  std::optional<WorkspaceRec> before =
      it == workspaces_.end() ? std::nullopt : std::optional(it->second);
  WorkspaceRec rec = w;
  if (before) rec.mapping = before->mapping;
  workspaces_[w.name] = rec;
  emit(Fields{}
           .add("op", "ws")
           .add("name", escape(w.name))
           .add("dir", escape(w.dir))
           .add("ctx", escape(w.context))
           .add("owner", escape(w.owner)),
       [this, name = w.name, before] {
         if (before)
           workspaces_[name] = *before;
         else
           workspaces_.erase(name);
       });
}

void Database::put_mapping(const std::string& ws, const std::string& path,
                           const std::optional<MapEntry>& entry) {
  auto wit = workspaces_.find(ws);
  if (wit == workspaces_.end()) throw Error("unknown workspace " + ws);
  auto& mapping = wit->second.mapping;
  auto it = mapping.find(path);
  std::optional<MapEntry> before = it == mapping.end() ? std::nullopt : std::optional(it->second);
  if (entry)
    mapping[path] = *entry;
  else
    mapping.erase(path);
  Fields f;
  f.add("op", "map").add("ws", escape(ws)).add("path", escape(path));
  if (entry)
    f.add("obj", escape(entry->object))
        .add("branch", escape(entry->branch))
        .add("rev", std::to_string(entry->revision))
        .add("mode", mode_name(entry->mode));
  emit(std::move(f), [this, ws, path, before] {
    auto& m = workspaces_[ws].mapping;
    if (before)
      m[path] = *before;
    else
      m.erase(path);
  });
}

void Database::put_we(const WeRec& w) {
  auto it = wes_.find(w.name);
  std::optional<WeRec> before = it == wes_.end() ? std::nullopt : std::optional(it->second);
  wes_[w.name] = w;
  std::string tools;
  for (const auto& t : w.tools) tools += (tools.empty() ? "" : ",") + escape(t);
  emit(Fields{}
           .add("op", "we")
           .add("name", escape(w.name))
           .add("proc", escape(w.process))
           .add("user", escape(w.user))
           .add("ws", escape(w.workspace))
           .add("parent", escape(w.parent))
           .add("tools", tools),
       [this, name = w.name, before] {
         if (before)
           wes_[name] = *before;
         else
           wes_.erase(name);
       });
}

void Database::put_connection(const ConnectionRec& c) {
  auto it = connections_.find(c.id);
  std::optional<ConnectionRec> before =
      it == connections_.end() ? std::nullopt : std::optional(it->second);
  connections_[c.id] = c;
  emit(Fields{}
           .add("op", "conn")
           .add("id", escape(c.id))
           .add("type", escape(c.type))
           .add("parent", escape(c.parent))
           .add("twe", escape(c.target_we))
           .add("trole", escape(c.target_role))
           .add("tobj", escape(c.target_object))
           .add("swe", escape(c.source_we))
           .add("srole", escape(c.source_role))
           .add("sobj", escape(c.source_object))
           .add("status", escape(c.status)),
       [this, id = c.id, before] {
         if (before)
           connections_[id] = *before;
         else
           connections_.erase(id);
       });
}

void Database::mail(const std::string& user, const std::string& message) {
  inboxes_[user].push_back(message);
  emit(Fields{}.add("op", "mail").add("user", escape(user)).add("msg", escape(message)),
       [this, user] {
         auto& box = inboxes_[user];
         box.pop_back();
         if (box.empty()) inboxes_.erase(user);
       });
}

void Database::add_guard(const std::string& key) {
  if (!guards_.insert(key).second) return;
  emit(Fields{}.add("op", "guard").add("key", escape(key)),
       [this, key] { guards_.erase(key); });
}

// ---------------------------------------------------------------- dump / load

namespace {

std::string join_escaped(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + escape(s);
  return out;
}

std::vector<std::string> split_escaped(const std::string& text) {
  std::vector<std::string> out;
  if (text.empty()) return out;
  for (const auto& s : split(text, ',')) out.push_back(unescape(s));
  return out;
}

Date when_of(const Fields& f) {
  const std::string* w = f.find("when");
  return Date{w ? std::stoll(*w) : 0};
}

void dump_history(std::vector<Fields>& out, const char* op, const Fields& key,
                  const std::vector<HistoryRecord>& history) {
  for (const auto& h : history) {
    Fields f;
    f.add("op", op);
    for (const auto& kv : key.items) f.items.push_back(kv);
    f.add("attr", escape(h.attr))
        .add("old", h.old_value.encode())
        .add("value", h.new_value.encode())
        .add("when", std::to_string(h.when.seconds))
        .add("user", escape(h.user))
        .add("cmd", escape(h.command));
    out.push_back(std::move(f));
  }
}

HistoryRecord history_of(const Fields& f) {
  return HistoryRecord{when_of(f), unescape(f.get("attr")), Value::decode(f.get("old")),
                       Value::decode(f.get("value")), unescape(f.get("cmd")),
                       unescape(f.get("user"))};
}

}  // namespace

std::vector<Fields> Database::dump() const {
  std::vector<Fields> out;
  for (const auto& [part, text] : schema_sources_)
    out.push_back(Fields{}.add("op", "schema").add("part", escape(part)).add("text", escape(text)));
  for (const auto& [name, o] : objects_) {
    out.push_back(Fields{}
                      .add("op", "O")
                      .add("name", escape(name))
                      .add("type", escape(o.type))
                      .add("part", escape(o.partition))
                      .add("when", std::to_string(o.created.seconds))
                      .add("user", escape(o.creator))
                      .add("deleted", o.deleted ? "1" : "0"));
    for (const auto& [a, v] : o.attrs)
      out.push_back(Fields{}
                        .add("op", "A")
                        .add("name", escape(name))
                        .add("attr", escape(a))
                        .add("value", v.encode()));
    dump_history(out, "H", Fields{}.add("name", escape(name)), o.history);
    for (const auto& b : o.branches) {
      out.push_back(Fields{}.add("op", "B").add("name", escape(name)).add("branch", escape(b.name)));
      for (const auto& r : b.revisions) {
        out.push_back(Fields{}
                          .add("op", "V")
                          .add("name", escape(name))
                          .add("branch", escape(b.name))
                          .add("rev", std::to_string(r.number))
                          .add("when", std::to_string(r.timestamp.seconds))
                          .add("user", escape(r.author))
                          .add("digest", r.digest));
        for (const auto& [a, v] : r.snapshot)
          out.push_back(Fields{}
                            .add("op", "VA")
                            .add("name", escape(name))
                            .add("branch", escape(b.name))
                            .add("attr", escape(a))
                            .add("value", v.encode()));
      }
    }
  }
  for (const auto& [key, r] : relations_) {
    Fields k;
    k.add("o", escape(key.origin)).add("r", escape(key.rel)).add("d", escape(key.dest));
    Fields head;
    head.add("op", "L");
    for (const auto& kv : k.items) head.items.push_back(kv);
    head.add("when", std::to_string(r.created.seconds))
        .add("user", escape(r.creator))
        .add("deleted", r.deleted ? "1" : "0");
    out.push_back(std::move(head));
    for (const auto& [a, v] : r.attrs) {
      Fields f;
      f.add("op", "LA");
      for (const auto& kv : k.items) f.items.push_back(kv);
      f.add("attr", escape(a)).add("value", v.encode());
      out.push_back(std::move(f));
    }
    dump_history(out, "LH", k, r.history);
  }
  for (const auto& [name, c] : contexts_)
    out.push_back(Fields{}.add("op", "ctx").add("name", escape(name)).add("roots", join_escaped(c.roots)));
  for (const auto& [name, w] : workspaces_) {
    out.push_back(Fields{}
                      .add("op", "ws")
                      .add("name", escape(name))
                      .add("dir", escape(w.dir))
                      .add("ctx", escape(w.context))
                      .add("owner", escape(w.owner)));
    for (const auto& [path, e] : w.mapping)
      out.push_back(Fields{}
                        .add("op", "map")
                        .add("ws", escape(name))
                        .add("path", escape(path))
                        .add("obj", escape(e.object))
                        .add("branch", escape(e.branch))
                        .add("rev", std::to_string(e.revision))
                        .add("mode", mode_name(e.mode)));
  }
  for (const auto& [name, w] : wes_)
    out.push_back(Fields{}
                      .add("op", "we")
                      .add("name", escape(name))
                      .add("proc", escape(w.process))
                      .add("user", escape(w.user))
                      .add("ws", escape(w.workspace))
                      .add("parent", escape(w.parent))
                      .add("tools", join_escaped(w.tools)));
  for (const auto& [id, c] : connections_)
    out.push_back(Fields{}
                      .add("op", "conn")
                      .add("id", escape(id))
                      .add("type", escape(c.type))
                      .add("parent", escape(c.parent))
                      .add("twe", escape(c.target_we))
                      .add("trole", escape(c.target_role))
                      .add("tobj", escape(c.target_object))
                      .add("swe", escape(c.source_we))
                      .add("srole", escape(c.source_role))
                      .add("sobj", escape(c.source_object))
                      .add("status", escape(c.status)));
  for (const auto& [user, box] : inboxes_)
    for (const auto& m : box)
      out.push_back(Fields{}.add("op", "mail").add("user", escape(user)).add("msg", escape(m)));
  for (const auto& g : guards_) out.push_back(Fields{}.add("op", "guard").add("key", escape(g)));
  return out;
}

void Database::load_record(
    const Fields& f,
    const std::function<void(const std::string&, const std::string&)>& schema_loader) {
  auto saved = log_;
  log_ = nullptr;
  struct Restore {
    Database* db;
    std::vector<UndoEntry>* log;
    ~Restore() { db->log_ = log; }
  } restore{this, saved};

  const std::string& op = f.get("op");
  auto s = [&](const char* k) { return unescape(f.get(k)); };
  auto rel_key = [&] { return RelKey{s("o"), s("r"), s("d")}; };

  if (op == "schema") {
    std::string part = s("part"), text = s("text");
    schema_loader(part, text);
    schema_sources_.emplace_back(part, text);
  } else if (op == "obj") {
    create_object(s("name"), s("type"), s("part"), when_of(f), s("user"));
  } else if (op == "del") {
    tombstone_object(s("name"));
  } else if (op == "rel") {
    create_relation(rel_key(), when_of(f), s("user"));
  } else if (op == "unrel") {
    tombstone_relation(rel_key());
  } else if (op == "set") {
    write_object_attr(s("name"), s("attr"), Value::decode(f.get("value")), when_of(f), s("user"),
                      s("cmd"));
  } else if (op == "rset") {
    write_relation_attr(rel_key(), s("attr"), Value::decode(f.get("value")), when_of(f),
                        s("user"), s("cmd"));
  } else if (op == "rev") {
    add_revision(s("name"), s("branch"), when_of(f), s("user"));
  } else if (op == "branch") {
    add_branch(s("name"), s("branch"));
  } else if (op == "ctx") {
    put_context(ContextRec{s("name"), split_escaped(f.get("roots"))});
  } else if (op == "ws") {
    put_workspace(WorkspaceRec{s("name"), s("dir"), s("ctx"), s("owner"), {}});
  } else if (op == "map") {
    std::optional<MapEntry> e;
    if (f.find("obj"))
      e = MapEntry{s("obj"), s("branch"), std::stoi(f.get("rev")),
                   parse_mode(f.get("mode")).value_or(LinkMode::Copy)};
    put_mapping(s("ws"), s("path"), e);
  } else if (op == "we") {
    put_we(WeRec{s("name"), s("proc"), s("user"), s("ws"), s("parent"),
                 split_escaped(f.get("tools"))});
  } else if (op == "conn") {
    put_connection(ConnectionRec{s("id"), s("type"), s("parent"), s("twe"), s("trole"),
                                 s("tobj"), s("swe"), s("srole"), s("sobj"), s("status")});
  } else if (op == "mail") {
    mail(s("user"), s("msg"));
  } else if (op == "guard") {
    add_guard(s("key"));
  } else if (op == "O") {
    ObjectRec rec;
    rec.name = s("name");
    rec.type = s("type");
    rec.partition = s("part");
    rec.created = when_of(f);
    rec.creator = s("user");
    rec.deleted = f.get("deleted") == "1";
    objects_[rec.name] = std::move(rec);
  } else if (op == "A") {
    obj_mut(s("name")).attrs[s("attr")] = Value::decode(f.get("value"));
  } else if (op == "H") {
    obj_mut(s("name")).history.push_back(history_of(f));
  } else if (op == "B") {
    obj_mut(s("name")).branches.push_back(Branch{s("branch"), {}});
  } else if (op == "V") {
    Branch* b = obj_mut(s("name")).branch(s("branch"));
    if (!b) throw Error("snapshot names unknown branch", ErrorKind::Io);
    Revision r;
    r.number = std::stoi(f.get("rev"));
    r.timestamp = when_of(f);
    r.author = s("user");
    r.digest = f.get("digest");
    b->revisions.push_back(std::move(r));
  } else if (op == "VA") {
    Branch* b = obj_mut(s("name")).branch(s("branch"));
    if (!b || b->revisions.empty()) throw Error("snapshot names unknown revision", ErrorKind::Io);
    b->revisions.back().snapshot[s("attr")] = Value::decode(f.get("value"));
  } else if (op == "L") {
    RelationRec rec;
    rec.key = rel_key();
    rec.created = when_of(f);
    rec.creator = s("user");
    rec.deleted = f.get("deleted") == "1";
    if (!rec.deleted) {
      out_[rec.key.origin].insert(rec.key);
      in_[rec.key.dest].insert(rec.key);
    }
    relations_[rec.key] = std::move(rec);
  } else if (op == "LA") {
    rel_mut(rel_key()).attrs[s("attr")] = Value::decode(f.get("value"));
  } else if (op == "LH") {
    rel_mut(rel_key()).history.push_back(history_of(f));
  } else {
    throw Error("unknown store record " + op, ErrorKind::Io);
  }
}

std::string Database::digest() const {
  Digest d;
  for (const auto& f : dump()) d.add_field(f.render());
  return d.hex();
}

}  // namespace adl
