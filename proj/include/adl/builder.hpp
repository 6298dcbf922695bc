#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "adl/constraint.hpp"
#include "adl/engine.hpp"

namespace adl {

enum class NodeKind { Family, Interface, Realization };

struct PmNode {
  std::string name;
  NodeKind kind = NodeKind::Realization;
  std::string owner;  // family of an interface, interface of a realization
  std::map<std::string, Value> attrs;
  ConstraintPtr constraint;  // requirement on graph descendants; null when absent
  std::vector<std::string> depends_on;  // sorted
};

/// Families, interfaces and realizations with their depends_on edges.
struct ProductModel {
  std::map<std::string, PmNode> nodes;

  void add(PmNode n);
  const PmNode& node(const std::string& name) const;
  /// Interfaces of a family / realizations of an interface, sorted by name.
  std::vector<std::string> members(const std::string& owner) const;
  /// Invariant violations: ownership, endpoint kinds, depends_on cycles.
  std::vector<std::string> problems() const;

  /// Reads every live family, interface and realization of the store.
  static ProductModel from_store(const Engine& e);
};

/// A generic configuration: the chosen interfaces and one realization each.
struct SystemModel {
  std::string root;
  ConstraintPtr where;
  std::vector<std::string> interfaces;               // sorted
  std::map<std::string, std::string> realization;    // interface -> realization

  std::vector<std::string> nodes() const;  // interfaces and realizations, sorted
  bool operator==(const SystemModel& o) const {
    return root == o.root && interfaces == o.interfaces && realization == o.realization;
  }
};

struct Violation {
  int rule = 0;  // 0 closure, 1 one interface per family, 2 global, 3 ancestors
  std::string node;
  std::string detail;  // failing atom or reason
  std::string render() const;
};

/// Edges of the selected graph: family->interface, interface->realization and
/// depends_on among selected nodes.
std::map<std::string, std::vector<std::string>> selected_graph(const ProductModel& pm,
                                                               const SystemModel& sm);

std::vector<Violation> check_model_consistency(const ProductModel& pm, const SystemModel& sm);

/// Depth-first search over realization choices in name order; the first
/// consistent selection wins. Throws Error naming the deepest failure.
SystemModel build_system_model(const ProductModel& pm, const std::string& root,
                               ConstraintPtr where);

struct BoundConfiguration {
  std::string model;
  ConstraintPtr select;
  std::map<std::string, int> revisions;  // realization -> revision number
};

/// Attribute view of one revision: its snapshot, plus date, author and
/// revision from the revision record.
std::map<std::string, Value> revision_view(const Revision& r);

/// Filter-then-max per realization over its main branch.
BoundConfiguration instantiate_configuration(const Engine& e, const SystemModel& sm,
                                             ConstraintPtr select, const std::string& model = "");

/// Reachability from `root` over the named relations, keeping nodes whose own
/// attributes satisfy `filter`. {depends_on, is_realized} builds a system model.
std::set<std::string> build_object_closure(const Engine& e, const std::string& root,
                                           const std::vector<std::string>& relations,
                                           ConstraintPtr filter);

/// `family/interface/realization[@rev]` lines, sorted.
std::vector<std::string> component_listing(const ProductModel& pm, const SystemModel& sm,
                                           const BoundConfiguration* bound = nullptr);

// ---- persistence as configuration objects composed of their components

/// Creates configuration object `name` composed of the model's nodes.
void do_store_system_model(Engine& e, const std::string& name, const SystemModel& sm);
SystemModel load_system_model(const Engine& e, const std::string& name);
/// Creates `name` recording the chosen revisions and snapshots it.
void do_store_bound(Engine& e, const std::string& name, const SystemModel& sm,
                    const BoundConfiguration& b);

}  // namespace adl
