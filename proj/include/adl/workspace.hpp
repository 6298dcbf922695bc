#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "adl/engine.hpp"

namespace adl {

/// Recursive digest of a directory: relative paths and file bytes.
std::string dir_digest(const std::filesystem::path& dir);

/// Pointer-file format for link-mode entries.
std::string link_text(const std::string& object, int revision);
/// Parses `adl-link:<object>[@rev]`; revision 0 means dynamic.
std::optional<std::pair<std::string, int>> parse_link(const std::string& text);

enum class SyncDirection { ToWs, ToDb };

/// Contexts, workspaces and their file trees. Every mutating call is one
/// engine transaction (or joins the open one), so file changes roll back
/// with the database.
class Workspaces {
 public:
  explicit Workspaces(Engine& e) : e_(e) {}

  TxResult make_context(const std::string& name, const std::vector<std::string>& roots);
  void do_make_context(const std::string& name, const std::vector<std::string>& roots);
  std::set<std::string> members(const std::string& context) const;
  /// Relative file path of every leaf member, and the directory path of every
  /// member that has components.
  std::map<std::string, std::string> layout(const std::string& context) const;

  TxResult checkout(const std::string& ws, const std::string& context,
                    const std::filesystem::path& dir, const std::string& owner,
                    const std::map<std::string, LinkMode>& modes = {});
  void do_checkout(const std::string& ws, const std::string& context,
                   const std::filesystem::path& dir, const std::string& owner,
                   const std::map<std::string, LinkMode>& modes = {});

  /// Workspace and relative path of a file, by directory prefix.
  std::optional<std::pair<std::string, std::string>> locate(
      const std::filesystem::path& file) const;
  MapEntry resolve_path(const std::string& ws, const std::string& rel) const;
  /// Content seen through the workspace: file bytes for copies, the linked
  /// revision (latest for dynamic links) for pointer files.
  std::string read(const std::string& ws, const std::string& rel) const;
  std::filesystem::path path_of(const std::string& ws, const std::string& rel) const;
  /// Relative path of `object` in the workspace, if mapped.
  std::optional<std::string> path_for(const std::string& ws, const std::string& object) const;

  /// One new revision per changed path, all in one transaction.
  TxResult checkin(const std::string& ws, const std::vector<std::string>& rels, bool force = false,
                   std::vector<std::pair<std::string, int>>* created = nullptr);
  void do_checkin(const std::string& ws, const std::vector<std::string>& rels, bool force,
                  std::vector<std::pair<std::string, int>>* created);

  /// Report lines: `+ path`, `- path`, `~ path`, `! path: reason`.
  TxResult sync(const std::string& ws, SyncDirection dir, std::vector<std::string>* report);

  /// Overwrites the workspace copy of `rel` (file and mapping) inside the
  /// current transaction.
  void do_put_copy(const std::string& ws, const std::string& rel, const std::string& content,
                   const MapEntry& entry);

 private:
  const WorkspaceRec& ws_rec(const std::string& ws) const;
  std::string file_text(const std::filesystem::path& p) const;
  std::vector<std::string> ignore_globs(const std::filesystem::path& root) const;
  bool ignored(const std::vector<std::string>& globs, const std::string& rel) const;
  std::string materialize(const MapEntry& m) const;

  Engine& e_;
};

}  // namespace adl
