#include "adl/workspace.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>

namespace adl {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kLinkPrefix = "adl-link:";

bool composition(const Engine& e, const RelKey& k) {
  auto t = e.type_of(Item::relation(k));
  return t && t->composition;
}

}  // namespace

std::string dir_digest(const fs::path& dir) {
  Digest d;
  if (!fs::exists(dir)) return "absent";
  std::vector<fs::path> entries;
  for (auto& e : fs::recursive_directory_iterator(dir)) entries.push_back(e.path());
  std::sort(entries.begin(), entries.end());
  for (auto& p : entries) {
    d.add_field(fs::relative(p, dir).generic_string());
    if (fs::is_regular_file(p)) {
      std::ifstream in(p, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      d.add_field(ss.str());
    } else {
      d.add_field("/");
    }
  }
  return d.hex();
}

std::string link_text(const std::string& object, int revision) {
  std::string s(kLinkPrefix);
  s += object;
  if (revision > 0) s += "@" + std::to_string(revision);
  return s + "\n";
}

std::optional<std::pair<std::string, int>> parse_link(const std::string& text) {
  if (text.rfind(kLinkPrefix, 0) != 0) return std::nullopt;
  std::string body = trim(text.substr(kLinkPrefix.size()));
  if (body.find('\n') != std::string::npos || body.empty()) return std::nullopt;
  auto at = body.rfind('@');
  if (at == std::string::npos) return std::pair{body, 0};
  try {
    return std::pair{body.substr(0, at), std::stoi(body.substr(at + 1))};
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// ------------------------------------------------------------------ contexts

TxResult Workspaces::make_context(const std::string& name, const std::vector<std::string>& roots) {
  return e_.run("ctx new " + name, [&] { do_make_context(name, roots); });
}

void Workspaces::do_make_context(const std::string& name, const std::vector<std::string>& roots) {
  if (name.empty()) throw Error("context name is empty");
  for (auto& r : roots)
    if (!e_.db().object(r)) throw Error("unknown root " + r);
  e_.db().put_context(ContextRec{name, roots});
}

std::set<std::string> Workspaces::members(const std::string& context) const {
  auto it = e_.db().contexts().find(context);
  if (it == e_.db().contexts().end()) throw Error("unknown context " + context);
  return e_.composition_closure(it->second.roots);
}

std::map<std::string, std::string> Workspaces::layout(const std::string& context) const {
  auto it = e_.db().contexts().find(context);
  if (it == e_.db().contexts().end()) throw Error("unknown context " + context);
  // Breadth-first from the roots; an object shared by two aggregates takes
  // the first path found, which keeps one version per workspace.
  std::map<std::string, std::string> path_of;
  std::deque<std::string> todo;
  std::vector<std::string> roots = it->second.roots;
  std::sort(roots.begin(), roots.end());
  for (auto& r : roots)
    if (e_.db().object(r) && !path_of.count(r)) {
      path_of[r] = r;
      todo.push_back(r);
    }
  while (!todo.empty()) {
    std::string o = todo.front();
    todo.pop_front();
    for (auto& k : e_.db().outgoing(o))
      if (composition(e_, k) && e_.db().object(k.dest) && !path_of.count(k.dest)) {
        path_of[k.dest] = path_of[o] + "/" + k.dest;
        todo.push_back(k.dest);
      }
  }
  std::map<std::string, std::string> out;
  for (auto& [obj, path] : path_of) out[path] = obj;
  return out;
}

// ------------------------------------------------------------------ checkout

const WorkspaceRec& Workspaces::ws_rec(const std::string& ws) const {
  auto it = e_.db().workspaces().find(ws);
  if (it == e_.db().workspaces().end()) throw Error("unknown workspace " + ws);
  return it->second;
}

std::string Workspaces::file_text(const fs::path& p) const {
  std::ifstream in(p, std::ios::binary);
  if (!in) return {};
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string Workspaces::materialize(const MapEntry& m) const {
  if (m.mode == LinkMode::Copy) return e_.content_of(m.object, m.branch, m.revision);
  return link_text(m.object, m.mode == LinkMode::Static ? m.revision : 0);
}

TxResult Workspaces::checkout(const std::string& ws, const std::string& context,
                              const fs::path& dir, const std::string& owner,
                              const std::map<std::string, LinkMode>& modes) {
  return e_.run("co " + ws, [&] { do_checkout(ws, context, dir, owner, modes); });
}

void Workspaces::do_checkout(const std::string& ws, const std::string& context,
                             const fs::path& dir, const std::string& owner,
                             const std::map<std::string, LinkMode>& modes) {
  if (e_.db().workspaces().count(ws)) throw Error("workspace " + ws + " already exists");
  if (fs::exists(dir) && !fs::is_empty(dir))
    throw Error("checkout directory is not empty: " + dir.string());
  auto lay = layout(context);
  for (auto& [obj, mode] : modes) {
    bool member = std::any_of(lay.begin(), lay.end(), [&](auto& p) { return p.second == obj; });
    if (!member) throw Error(obj + " is not in context " + context);
  }
  fs::path abs = fs::absolute(dir).lexically_normal();
  e_.db().put_workspace(WorkspaceRec{ws, abs.string(), context, owner, {}});
  std::set<std::string> dirs;
  for (auto& [path, obj] : lay) {
    auto slash = path.rfind('/');
    if (slash != std::string::npos) dirs.insert(path.substr(0, slash));
  }
  for (auto& [path, obj] : lay) {
    if (dirs.count(path)) continue;  // aggregates become directories
    auto it = modes.find(obj);
    MapEntry m{obj, "main", e_.latest_revision(obj), it == modes.end() ? LinkMode::Copy : it->second};
    if (m.mode == LinkMode::Dynamic) m.revision = 0;
    do_put_copy(ws, path, materialize(m), m);
  }
  // An empty tree still gets its root so later syncs have a place to write.
  if (!fs::exists(abs)) e_.do_write_file(abs / ".adlignore", "");
}

void Workspaces::do_put_copy(const std::string& ws, const std::string& rel,
                             const std::string& content, const MapEntry& entry) {
  e_.do_write_file(path_of(ws, rel), content);
  e_.db().put_mapping(ws, rel, entry);
}

fs::path Workspaces::path_of(const std::string& ws, const std::string& rel) const {
  return fs::path(ws_rec(ws).dir) / rel;
}

std::optional<std::pair<std::string, std::string>> Workspaces::locate(const fs::path& file) const {
  fs::path abs = fs::absolute(file).lexically_normal();
  std::optional<std::pair<std::string, std::string>> best;
  std::size_t best_len = 0;
  for (auto& [name, w] : e_.db().workspaces()) {
    fs::path rel = abs.lexically_relative(w.dir);
    std::string r = rel.generic_string();
    if (r.empty() || r == "." || r.rfind("..", 0) == 0) continue;
    if (w.dir.size() > best_len) {
      best = std::pair{name, r};
      best_len = w.dir.size();
    }
  }
  return best;
}

MapEntry Workspaces::resolve_path(const std::string& ws, const std::string& rel) const {
  const auto& w = ws_rec(ws);
  auto it = w.mapping.find(rel);
  if (it == w.mapping.end()) throw Error("unmapped path " + rel);
  return it->second;
}

std::optional<std::string> Workspaces::path_for(const std::string& ws,
                                                const std::string& object) const {
  for (auto& [p, m] : ws_rec(ws).mapping)
    if (m.object == object) return p;
  return std::nullopt;
}

std::string Workspaces::read(const std::string& ws, const std::string& rel) const {
  MapEntry m = resolve_path(ws, rel);
  std::string text = file_text(path_of(ws, rel));
  if (m.mode == LinkMode::Copy) return text;
  auto link = parse_link(text);
  if (!link) return text;  // written through by a reserving owner
  return e_.content_of(link->first, m.branch, link->second);
}

// ------------------------------------------------------------------ checkin

TxResult Workspaces::checkin(const std::string& ws, const std::vector<std::string>& rels,
                             bool force, std::vector<std::pair<std::string, int>>* created) {
  return e_.run("ci", [&] { do_checkin(ws, rels, force, created); });
}

void Workspaces::do_checkin(const std::string& ws, const std::vector<std::string>& rels,
                            bool force, std::vector<std::pair<std::string, int>>* created) {
  const WorkspaceRec& w = ws_rec(ws);
  std::string owner = w.owner;
  for (auto& rel : rels) {
    MapEntry m = resolve_path(ws, rel);
    fs::path p = path_of(ws, rel);
    if (!fs::is_regular_file(p)) throw Error("missing workspace file " + rel);
    std::string text = file_text(p);
    if (m.mode != LinkMode::Copy) {
      if (parse_link(text)) throw Error("cannot check in link-mode path " + rel);
      // Writes through a link reach the shared object: only its reserver may.
      std::string reserved = e_.get(Item::object(m.object), "reserved").display();
      if (reserved != owner)
        throw Error("protected: " + m.object + " is not reserved by " + owner);
    } else if (!force && text == e_.content_of(m.object, m.branch, m.revision)) {
      continue;
    }
    int before = e_.latest_revision(m.object, m.branch);
    std::vector<CallArg> args{CallArg{"c", {Item::of_value(Value::string(text))}}};
    e_.do_invoke(Item::object(m.object), "replace", std::move(args));
    if (e_.get(Item::object(m.object), "content").display() != text)
      e_.do_write(Item::object(m.object), "content", Value::string(text));
    int rev = e_.latest_revision(m.object, m.branch);
    if (rev == before) rev = e_.do_new_revision(m.object, m.branch);
    MapEntry next = m;
    if (m.mode != LinkMode::Dynamic) next.revision = rev;
    if (m.mode == LinkMode::Copy)
      e_.db().put_mapping(ws, rel, next);
    else
      do_put_copy(ws, rel, materialize(next), next);
    if (created) created->emplace_back(m.object, rev);
  }
}

// ------------------------------------------------------------------ sync

std::vector<std::string> Workspaces::ignore_globs(const fs::path& root) const {
  std::vector<std::string> out{".adlignore"};
  std::ifstream in(root / ".adlignore");
  for (std::string l; std::getline(in, l);) {
    l = trim(l);
    if (!l.empty() && l[0] != '#') out.push_back(l);
  }
  return out;
}

bool Workspaces::ignored(const std::vector<std::string>& globs, const std::string& rel) const {
  std::string base = fs::path(rel).filename().string();
  for (auto& g : globs)
    if (fnmatch(g.c_str(), rel.c_str(), 0) == 0 || fnmatch(g.c_str(), base.c_str(), 0) == 0)
      return true;
  return false;
}

TxResult Workspaces::sync(const std::string& ws, SyncDirection direction,
                          std::vector<std::string>* report) {
  std::vector<std::string> lines;
  auto res = e_.run(direction == SyncDirection::ToWs ? "sync --to-ws" : "sync --to-db", [&] {
    const WorkspaceRec w = ws_rec(ws);
    fs::path root = w.dir;
    auto lay = layout(w.context);
    std::set<std::string> dirs;
    for (auto& [path, obj] : lay) {
      auto slash = path.rfind('/');
      if (slash != std::string::npos) dirs.insert(path.substr(0, slash));
    }
    auto local_unchanged = [&](const std::string& rel, const MapEntry& m) {
      if (m.mode != LinkMode::Copy) return true;
      return file_text(root / rel) == e_.content_of(m.object, m.branch, m.revision);
    };

    if (direction == SyncDirection::ToWs) {
      for (auto& [rel, m] : w.mapping) {
        auto it = lay.find(rel);
        bool member = it != lay.end() && it->second == m.object && !dirs.count(rel);
        if (member) continue;
        if (!local_unchanged(rel, m)) {
          lines.push_back("! " + rel + ": removed from context but modified locally");
          continue;
        }
        e_.do_remove_file(root / rel);
        e_.db().put_mapping(ws, rel, std::nullopt);
        lines.push_back("- " + rel);
      }
      for (auto& [rel, obj] : lay) {
        if (dirs.count(rel)) continue;
        auto mit = w.mapping.find(rel);
        if (mit == w.mapping.end()) {
          if (fs::exists(root / rel)) {
            lines.push_back("! " + rel + ": unmapped local file in the way");
            continue;
          }
          MapEntry m{obj, "main", e_.latest_revision(obj), LinkMode::Copy};
          do_put_copy(ws, rel, materialize(m), m);
          lines.push_back("+ " + rel);
          continue;
        }
        const MapEntry& m = mit->second;
        if (m.mode != LinkMode::Copy || m.object != obj) continue;
        int latest = e_.latest_revision(obj, m.branch);
        if (latest <= m.revision) continue;
        if (!local_unchanged(rel, m)) {
          lines.push_back("! " + rel + ": both sides changed");
          continue;
        }
        MapEntry next = m;
        next.revision = latest;
        do_put_copy(ws, rel, materialize(next), next);
        lines.push_back("~ " + rel);
      }
    } else {
      auto globs = ignore_globs(root);
      std::vector<std::string> files;
      if (fs::exists(root))
        for (auto& entry : fs::recursive_directory_iterator(root))
          if (entry.is_regular_file()) {
            std::string rel = fs::relative(entry.path(), root).generic_string();
            if (!ignored(globs, rel)) files.push_back(rel);
          }
      std::sort(files.begin(), files.end());
      const auto& ctx = e_.db().contexts().at(w.context);
      for (auto& rel : files) {
        if (w.mapping.count(rel)) continue;
        fs::path rp(rel);
        std::string name = rp.filename().string();
        if (e_.db().any_object(name)) {
          lines.push_back("! " + rel + ": object " + name + " already exists");
          continue;
        }
        std::string parent;
        std::string pdir = rp.parent_path().generic_string();
        if (!pdir.empty()) {
          auto it = lay.find(pdir);
          if (it != lay.end()) parent = it->second;
        } else if (!ctx.roots.empty()) {
          parent = *std::min_element(ctx.roots.begin(), ctx.roots.end());
        }
        if (parent.empty()) {
          lines.push_back("! " + rel + ": no aggregate for directory " + pdir);
          continue;
        }
        e_.do_create_object(name, "file");
        e_.do_write(Item::object(name), "content", Value::string(file_text(root / rel)));
        int rev = e_.do_new_revision(name);
        e_.do_create_relation(RelKey{parent, "composed_of", name});
        e_.db().put_mapping(ws, rel, MapEntry{name, "main", rev, LinkMode::Copy});
        lines.push_back("+ " + rel);
      }
      for (auto& [rel, m] : w.mapping) {
        if (fs::exists(root / rel)) continue;
        for (auto& k : e_.db().incoming(m.object))
          if (composition(e_, k) && members(w.context).count(k.origin)) e_.do_delete_relation(k);
        e_.db().put_mapping(ws, rel, std::nullopt);
        lines.push_back("- " + rel);
      }
    }
  });
  if (report) *report = res.committed ? lines : std::vector<std::string>{};
  return res;
}

}  // namespace adl
