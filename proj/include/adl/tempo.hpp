#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adl/engine.hpp"
#include "adl/workspace.hpp"

namespace adl {

struct ProcessRequest {
  std::string type;
  std::string user;
  std::vector<std::string> objects;
  std::string name;    // generated when empty
  std::string parent;  // enclosing process instance
  std::string role;    // role of `parent` this instance plays
  std::vector<std::string> tools;
};

struct WeStatus {
  std::string name, process, user, parent, workspace;
  std::vector<std::string> tools;
  std::map<std::string, std::vector<std::string>> bindings;  // role -> objects
  /// role-local values: `role/object/attr` -> value
  std::map<std::string, std::string> overlays;
  std::vector<ConnectionRec> connections;
};

/// The process layer over one engine: process instances as work
/// environments, role binding, role-local attributes, connections, and the
/// post-commit rule evaluation and deliveries. Construct once per engine;
/// it installs the engine's role factory and a commit hook.
class Tempo {
 public:
  explicit Tempo(Engine& e);
  Tempo(const Tempo&) = delete;
  Tempo& operator=(const Tempo&) = delete;

  Workspaces& workspaces() { return ws_; }

  /// Returns the instance name; throws Error when the transaction aborts.
  std::string instantiate(const ProcessRequest& req, TxResult* result = nullptr);
  void do_instantiate(const ProcessRequest& req, std::string& name);

  /// Instantiates connections for every matching pair of role instances.
  void do_connect_roles(const std::string& parent);

  /// Role binding relation of `object` in `we`, checked against `role` when given.
  RelKey binding(const std::string& we, const std::string& object,
                 const std::string& role = "") const;
  Value role_attr(const std::string& we, const std::string& role, const std::string& object,
                  const std::string& attr) const;
  TxResult set_role_attr(const std::string& we, const std::string& role,
                         const std::string& object, const std::string& attr,
                         const std::string& value);
  TxResult invoke_in_we(const std::string& we, const std::string& role, const std::string& object,
                        const std::string& method, const std::vector<std::string>& args = {});
  /// Runs `body` as one transaction issued from inside `we`.
  TxResult run_in_we(const std::string& we, const std::string& label,
                     const std::function<void()>& body);

  WeStatus status(const std::string& we) const;
  /// Path of `object` inside the workspace of `we`.
  std::filesystem::path file_of(const std::string& we, const std::string& object) const;

  static bool supported_kind(const std::string& kind);

 private:
  const ProcessDef& process_of(const std::string& instance) const;
  std::vector<std::string> bound(const std::string& we, const std::string& role) const;
  std::string role_name(const std::string& we, const RelKey& k) const;
  void bind_objects(const ProcessDef& p, const std::string& inst,
                    const std::vector<std::string>& objects);
  void on_commit(const Engine::CommitInfo& info, const Engine::Schedule& schedule);
  void deliver(const ConnectionRec& c, const std::string& kind);

  Engine& e_;
  Workspaces ws_;
};

}  // namespace adl
