#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "adl/schema.hpp"
#include "adl/text.hpp"
#include "adl/value.hpp"

namespace adl {

/// Identity of a relation instance: (Origin | RelType | Destination).
struct RelKey {
  std::string origin, rel, dest;
  auto operator<=>(const RelKey&) const = default;
  std::string str() const { return origin + "|" + rel + "|" + dest; }
  static std::optional<RelKey> parse(std::string_view text);
};

struct HistoryRecord {
  Date when;
  std::string attr;
  Value old_value, new_value;
  std::string command, user;
};

struct Revision {
  int number = 0;
  std::map<std::string, Value> snapshot;
  Date timestamp;
  std::string author;
  std::string digest;  // digest of the snapshot at creation
};

struct Branch {
  std::string name;
  std::vector<Revision> revisions;
};

struct ObjectRec {
  std::string name, type, partition;
  std::map<std::string, Value> attrs;
  std::vector<Branch> branches;
  std::vector<HistoryRecord> history;
  Date created;
  std::string creator;
  bool deleted = false;

  const Branch* branch(const std::string& n) const;
  Branch* branch(const std::string& n);
};

struct RelationRec {
  RelKey key;
  std::map<std::string, Value> attrs;
  std::vector<HistoryRecord> history;
  Date created;
  std::string creator;
  bool deleted = false;
};

struct ContextRec {
  std::string name;
  std::vector<std::string> roots;
};

enum class LinkMode { Copy, Static, Dynamic };
const char* mode_name(LinkMode m);
std::optional<LinkMode> parse_mode(std::string_view s);

struct MapEntry {
  std::string object;
  std::string branch = "main";
  int revision = 0;  // 0 for dynamic links
  LinkMode mode = LinkMode::Copy;
  bool operator==(const MapEntry&) const = default;
};

struct WorkspaceRec {
  std::string name, dir, context, owner;
  std::map<std::string, MapEntry> mapping;
};

struct WeRec {
  std::string name;  // process instance object
  std::string process, user, workspace, parent;
  std::vector<std::string> tools;
};

struct ConnectionRec {
  std::string id;  // type:target_we>source_we:object pair
  std::string type, parent;
  std::string target_we, target_role, target_object;
  std::string source_we, source_role, source_object;
  std::string status = "idle";
};

/// A mutation already applied to the tables, with its journal record and the
/// closure that reverts it.
struct UndoEntry {
  Fields op;
  std::function<void()> undo;
};

/// Value-level tables of one store. Every mutation goes through a method
/// here so it can be journalled and undone.
class Database {
 public:
  Database() = default;
  Database(const Database&) = delete;
  Database& operator=(const Database&) = delete;

  Schema& schema() { return schema_; }
  const Schema& schema() const { return schema_; }

  /// Mutations are appended here while a transaction is open.
  void set_log(std::vector<UndoEntry>* log) { log_ = log; }
  std::vector<UndoEntry>* log() const { return log_; }

  // ---- lookups
  const ObjectRec* object(const std::string& name) const;  // live only
  const ObjectRec* any_object(const std::string& name) const;  // including tombstones
  const RelationRec* relation(const RelKey& key) const;       // live only
  const std::map<std::string, ObjectRec>& objects() const { return objects_; }
  const std::map<RelKey, RelationRec>& relations() const { return relations_; }
  /// Live relations leaving / entering an object, ordered by key.
  std::vector<RelKey> outgoing(const std::string& obj) const;
  std::vector<RelKey> incoming(const std::string& obj) const;

  // ---- mutations
  void create_object(const std::string& name, const std::string& type,
                     const std::string& partition, Date when, const std::string& user);
  void tombstone_object(const std::string& name);
  void create_relation(const RelKey& key, Date when, const std::string& user);
  void tombstone_relation(const RelKey& key);
  void write_object_attr(const std::string& obj, const std::string& attr, const Value& v,
                         Date when, const std::string& user, const std::string& cmd);
  void write_relation_attr(const RelKey& key, const std::string& attr, const Value& v, Date when,
                           const std::string& user, const std::string& cmd);
  const Revision& add_revision(const std::string& obj, const std::string& branch, Date when,
                               const std::string& user);
  void add_branch(const std::string& obj, const std::string& branch);

  void record_schema(const std::string& partition, const std::string& text,
                     std::function<void()> restore);
  const std::vector<std::pair<std::string, std::string>>& schema_sources() const {
    return schema_sources_;
  }

  // ---- workspace / process tables
  const std::map<std::string, ContextRec>& contexts() const { return contexts_; }
  const std::map<std::string, WorkspaceRec>& workspaces() const { return workspaces_; }
  const std::map<std::string, WeRec>& wes() const { return wes_; }
  const std::map<std::string, ConnectionRec>& connections() const { return connections_; }
  const std::map<std::string, std::vector<std::string>>& inboxes() const { return inboxes_; }
  const std::set<std::string>& guards() const { return guards_; }

  void put_context(const ContextRec& c);
  void put_workspace(const WorkspaceRec& w);  // mapping of an existing record is kept
  void put_mapping(const std::string& ws, const std::string& path,
                   const std::optional<MapEntry>& entry);
  void put_we(const WeRec& w);
  void put_connection(const ConnectionRec& c);
  void mail(const std::string& user, const std::string& message);
  void add_guard(const std::string& key);

  /// Canonical state dump: one record per line; replaying it through
  /// `load_record` rebuilds identical tables.
  std::vector<Fields> dump() const;
  /// Applies one snapshot record or journal op without journalling.
  /// Schema records are passed to `schema_loader`.
  void load_record(const Fields& f,
                   const std::function<void(const std::string&, const std::string&)>& schema_loader);

  /// Digest over the canonical dump.
  std::string digest() const;

 private:
  void emit(Fields op, std::function<void()> undo);
  ObjectRec& obj_mut(const std::string& name);
  RelationRec& rel_mut(const RelKey& key);

  Schema schema_;
  std::vector<std::pair<std::string, std::string>> schema_sources_;  // (partition, text)
  std::map<std::string, ObjectRec> objects_;
  std::map<RelKey, RelationRec> relations_;
  std::map<std::string, std::set<RelKey>> out_, in_;  // live relation indexes
  std::map<std::string, ContextRec> contexts_;
  std::map<std::string, WorkspaceRec> workspaces_;
  std::map<std::string, WeRec> wes_;
  std::map<std::string, ConnectionRec> connections_;
  std::map<std::string, std::vector<std::string>> inboxes_;
  std::set<std::string> guards_;
  std::vector<UndoEntry>* log_ = nullptr;
};

std::string snapshot_digest(const std::map<std::string, Value>& snapshot);

}  // namespace adl
