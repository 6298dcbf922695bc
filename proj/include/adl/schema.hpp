#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "adl/action.hpp"
#include "adl/constraint.hpp"
#include "adl/value.hpp"

namespace adl {

enum class TypeKind { Object, Relation };
enum class Coupling { Pre, Post, After, Error };
enum class Scope { Entity, Origin, Dest };
enum class Visibility { Local, Global };
enum class Cardinality { OneOne, OneMany, ManyOne, ManyMany };
enum class Structure { None, Dag, Tree };

const char* coupling_name(Coupling c);
const char* scope_name(Scope s);
const char* card_name(Cardinality c);

struct AttributeDef {
  std::string name;
  Domain domain;
  std::optional<Value> default_value;
  std::optional<Value> initial;
  std::optional<std::string> computed;  // COMP command text
  bool builtin = false;

  bool multi() const { return domain.kind == DomainKind::SetOf; }
  std::string describe() const;
};

struct MethodDef {
  std::string name;
  std::vector<std::string> params;                                // positional
  std::vector<std::pair<std::string, std::string>> flag_params;  // -d %new
  Scope scope = Scope::Entity;  // relation methods: receiving endpoint
  StmtPtr body;                 // null: implicit event only
  std::string owner;            // declaring type, empty for free methods
};

struct TriggerDef {
  Coupling coupling = Coupling::Post;
  Scope scope = Scope::Entity;
  Visibility visibility = Visibility::Local;
  std::string event;    // named event or method name; empty with inline_event
  CondPtr inline_event;
  StmtPtr action;
  bool self_is_receiver = false;  // role triggers act on the bound object
  std::string summary() const;
};

struct EventRule {
  std::string name;
  CondPtr expr;
  int priority = 0;
};

struct DomainPair {
  ConstraintPtr origin;
  ConstraintPtr dest;
  std::string text;
};

struct TypeDef {
  std::string name;
  TypeKind kind = TypeKind::Object;
  std::vector<std::string> supertypes;
  std::vector<AttributeDef> attributes;
  std::vector<MethodDef> methods;
  std::vector<TriggerDef> triggers;
  std::vector<std::string> events;
  // relation only
  std::vector<DomainPair> domain;
  std::optional<Cardinality> card;
  Structure structure = Structure::None;
  bool composition = false;
  bool builtin = false;
};

struct ResolvedTrigger {
  TriggerDef def;
  std::string owner;  // declaring type
  int depth = 0;      // position of owner in the linearization
  int order = 0;      // declaration order within the owner
};

struct ResolvedMethod {
  MethodDef def;
  std::string owner;
};

struct ResolvedType {
  std::string name;
  TypeKind kind = TypeKind::Object;
  std::vector<std::string> linearization;  // most specific first
  std::map<std::string, AttributeDef> attributes;
  std::map<std::string, ResolvedMethod> methods;
  std::vector<ResolvedTrigger> triggers;  // most specific first
  std::vector<DomainPair> domain;
  std::optional<Cardinality> card;
  Structure structure = Structure::None;
  bool composition = false;

  const AttributeDef* attribute(const std::string& name) const;
  const ResolvedMethod* method(const std::string& name) const;
  /// The user attribute spelled like `state` in any case, else the builtin.
  std::string state_attribute() const;
  /// Canonical text; equal resolved types print identically.
  std::string describe() const;
};

/// A role of a process type. Bound objects are the destinations of the
/// role's relation type, whose origin is the process instance.
struct RoleDef {
  std::string name;
  std::string base;      // object type, process type or another role of the process
  std::string relation;  // generated relation type, `process.role`
  CondPtr filter;        // e.g. responsible = !username
  std::string filter_text;
};

struct ConnectionDef {
  std::string name;
  std::vector<std::string> kinds;  // notify, resynch, merge
  std::string left_role, right_role;
  std::string left_path, right_path;  // WHEN to_consult.name = to_change.name
  std::map<std::string, CondPtr> events;  // notify_when -> ready
};

struct ProcessDef {
  std::string name;
  std::string user;  // ROLE USER = ...
  std::vector<RoleDef> roles;
  std::vector<ConnectionDef> connections;

  const RoleDef* role(const std::string& n) const;
};

class Schema {
 public:
  static constexpr const char* kRoot = "project";

  Schema();

  void add_partition(const std::string& name, const std::string& parent);
  bool has_partition(const std::string& name) const { return partitions_.count(name) > 0; }
  std::vector<std::string> partitions() const;
  /// Partition chain from the root down to `name`.
  std::vector<std::string> chain(const std::string& partition) const;

  std::string define_type(TypeDef def, const std::string& partition = kRoot);
  void define_event(EventRule rule);
  void define_method(MethodDef m);
  void define_process(ProcessDef p);
  const ProcessDef* process(const std::string& name) const;
  const std::map<std::string, ProcessDef>& processes() const { return processes_; }
  /// The role owning a generated role relation type, if any.
  std::optional<std::pair<std::string, std::string>> role_of(const std::string& relation) const;

  const EventRule* event(const std::string& name) const;
  const MethodDef* free_method(const std::string& name) const;
  const std::map<std::string, EventRule>& events() const { return events_; }
  const std::map<std::string, MethodDef>& free_methods() const { return free_methods_; }

  bool visible(const std::string& type, const std::string& partition = kRoot) const;
  /// Exact name, else the unique case-insensitive match.
  std::optional<std::string> resolve_name(const std::string& name,
                                          const std::string& partition = kRoot) const;
  std::shared_ptr<const ResolvedType> effective(const std::string& type,
                                                const std::string& partition = kRoot) const;
  bool is_subtype(const std::string& a, const std::string& b,
                  const std::string& partition = kRoot) const;
  std::vector<std::string> linearize(const std::string& type,
                                     const std::string& partition = kRoot) const;
  std::vector<std::string> type_names(const std::string& partition = kRoot) const;
  /// Supertypes declared for `type` along the partition chain.
  std::vector<std::string> supertypes(const std::string& type,
                                      const std::string& partition = kRoot) const;
  /// Definitions registered in a partition's own overlay.
  const std::map<std::string, TypeDef>& overlay(const std::string& partition) const;

 private:
  struct Partition {
    std::string name;
    std::optional<std::string> parent;
    std::map<std::string, TypeDef> overlay;
  };

  const Partition& partition(const std::string& name) const;
  void check_acyclic(const std::string& partition) const;
  void install_builtins();

  std::map<std::string, Partition> partitions_;
  std::map<std::string, EventRule> events_;
  std::map<std::string, MethodDef> free_methods_;
  std::map<std::string, ProcessDef> processes_;
  std::map<std::string, std::string> role_bases_;  // role relation type -> base type
  mutable std::map<std::pair<std::string, std::string>, std::shared_ptr<const ResolvedType>>
      cache_;
};

}  // namespace adl
