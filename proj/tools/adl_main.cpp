// adl: command-line front end over the adelite C interface.
#include <cstdlib>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adl/adl.h"

namespace {

struct Options {
  std::string store, user, format = "text";
  bool verbose = false;
  unsigned seed = 0;
};

std::vector<const char*> cstrs(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  for (auto& s : v) out.push_back(s.c_str());
  return out;
}

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

// Prints a result and maps its status to the exit code.
int finish(const Options& o, adl_result* r) {
  if (!r) return 1;
  bool json = o.format == "json-lines";
  for (size_t i = 0; i < adl_result_count(r); ++i)
    std::cout << (json ? adl_result_json(r, i) : adl_result_line(r, i)) << '\n';
  if (o.verbose)
    for (size_t i = 0; i < adl_result_trace_count(r); ++i)
      std::cerr << adl_result_trace(r, i) << '\n';
  adl_status s = adl_result_status(r);
  if (s != ADL_OK) std::cerr << "adl: " << adl_result_message(r) << '\n';
  adl_result_free(r);
  switch (s) {
    case ADL_OK: return 0;
    case ADL_ERR_USAGE: return 2;
    default: return 1;
  }
}

// Opens the store, runs `call` against it and prints the result.
int with_store(const Options& o, const std::function<adl_status(adl_store*, adl_result**)>& call) {
  if (o.store.empty()) {
    std::cerr << "adl: no store (use --store or ADL_STORE)\n";
    return 2;
  }
  adl_store* s = nullptr;
  adl_result* err = nullptr;
  if (adl_open(o.store.c_str(), opt(o.user), &s, &err) != ADL_OK) return finish(o, err);
  adl_result_free(err);
  adl_result* r = nullptr;
  call(s, &r);
  int code = finish(o, r);
  adl_close(s);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adelite software-engineering database"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  if (const char* u = std::getenv("USER")) o.user = u;
  app.add_option("--store", o.store, "store directory")->envname("ADL_STORE");
  app.add_option("--user", o.user, "acting user")->envname("ADL_USER");
  app.add_option("--format", o.format, "output format")
      ->check(CLI::IsMember({"text", "json-lines"}));
  app.add_flag("--verbose,-v", o.verbose, "print the side-effect trace and timestamps");
  app.add_option("--seed", o.seed, "seed for randomized harness ordering");

  std::function<int()> action;
  auto on = [&](CLI::App* sub, std::function<int()> f) {
    sub->callback([&action, f] { action = f; });
  };

  auto* init = app.add_subcommand("init", "create a store");
  on(init, [&] {
    if (o.store.empty()) {
      std::cerr << "adl: no store (use --store or ADL_STORE)\n";
      return 2;
    }
    adl_result* r = nullptr;
    adl_init(o.store.c_str(), &r);
    return finish(o, r);
  });

  std::string file;
  auto* load = app.add_subcommand("load", "load a DSL file");
  load->add_option("file", file)->required();
  on(load, [&] { return with_store(o, [&](auto s, auto r) { return adl_load_file(s, file.c_str(), r); }); });

  std::string name, type, partition;
  auto* mk = app.add_subcommand("new", "create an object");
  mk->add_option("name", name)->required();
  mk->add_option("type", type)->required();
  mk->add_option("--partition", partition);
  on(mk, [&] {
    return with_store(o, [&](auto s, auto r) {
      return adl_new(s, name.c_str(), type.c_str(), opt(partition), r);
    });
  });

  std::string origin, rel, dest;
  auto* mkrel = app.add_subcommand("mkrel", "create a relation instance");
  mkrel->add_option("origin", origin)->required();
  mkrel->add_option("relation", rel)->required();
  mkrel->add_option("dest", dest)->required();
  on(mkrel, [&] {
    return with_store(o, [&](auto s, auto r) {
      return adl_mkrel(s, origin.c_str(), rel.c_str(), dest.c_str(), r);
    });
  });

  std::string target, attr, value;
  auto* set = app.add_subcommand("set", "write an attribute");
  set->add_option("target", target)->required();
  set->add_option("attr", attr)->required();
  set->add_option("value", value)->required();
  on(set, [&] {
    return with_store(o, [&](auto s, auto r) {
      return adl_set(s, target.c_str(), attr.c_str(), value.c_str(), r);
    });
  });

  auto* get = app.add_subcommand("get", "read an attribute");
  get->add_option("target", target)->required();
  get->add_option("attr", attr)->required();
  on(get, [&] {
    return with_store(o, [&](auto s, auto r) {
      return adl_get(s, target.c_str(), attr.c_str(), r);
    });
  });

  std::string method;
  auto* invoke = app.add_subcommand("invoke", "invoke a method: invoke <target> <method> [args]");
  invoke->add_option("target", target)->required();
  invoke->add_option("method", method)->required();
  invoke->allow_extras();
  on(invoke, [&] {
    auto args = invoke->remaining();
    return with_store(o, [&](auto s, auto r) {
      auto a = cstrs(args);
      return adl_invoke(s, target.c_str(), method.c_str(), a.size(), a.data(), r);
    });
  });

  auto* history = app.add_subcommand("history", "attribute history of an object or relation");
  history->add_option("target", target)->required();
  history->add_option("attr", attr);
  on(history, [&] {
    return with_store(o, [&](auto s, auto r) {
      return adl_history(s, target.c_str(), opt(attr), o.verbose, r);
    });
  });

  std::string root, where, sm, select;
  auto* build = app.add_subcommand("build-sm", "build a system model");
  build->add_option("--root", root)->required();
  build->add_option("--where", where);
  build->add_option("--name", name);
  on(build, [&] {
    return with_store(o, [&](auto s, auto r) {
      return adl_build_sm(s, opt(name), root.c_str(), opt(where), r);
    });
  });

  auto* bind = app.add_subcommand("bind", "select revisions for a system model");
  bind->add_option("--sm", sm)->required();
  bind->add_option("--select", select);
  bind->add_option("--name", name);
  on(bind, [&] {
    return with_store(o, [&](auto s, auto r) {
      return adl_bind(s, sm.c_str(), opt(name), opt(select), r);
    });
  });

  auto* check = app.add_subcommand("sm-check", "check a system model");
  check->add_option("name", sm)->required();
  on(check, [&] { return with_store(o, [&](auto s, auto r) { return adl_sm_check(s, sm.c_str(), r); }); });

  std::vector<std::string> items;
  auto* ctx = app.add_subcommand("ctx", "contexts");
  ctx->require_subcommand(1);
  auto* ctx_new = ctx->add_subcommand("new", "create a context from root objects");
  ctx_new->add_option("name", name)->required();
  ctx_new->add_option("roots", items);
  on(ctx_new, [&] {
    return with_store(o, [&](auto s, auto r) {
      auto v = cstrs(items);
      return adl_ctx_new(s, name.c_str(), v.size(), v.data(), r);
    });
  });
  auto* ctx_show = ctx->add_subcommand("show", "show a context's file layout");
  ctx_show->add_option("name", name)->required();
  on(ctx_show, [&] { return with_store(o, [&](auto s, auto r) { return adl_ctx_show(s, name.c_str(), r); }); });

  std::string dir, wsname;
  std::vector<std::string> link;
  auto* co = app.add_subcommand("co", "check out a context into a directory");
  co->add_option("--ctx", name)->required();
  co->add_option("--dir", dir)->required();
  co->add_option("--ws", wsname, "workspace name (default: directory name)");
  co->add_option("--link", link, "static|dynamic followed by objects")->expected(2, -1);
  on(co, [&] {
    std::string mode = link.empty() ? "" : link.front();
    std::vector<std::string> objs(link.empty() ? link.end() : link.begin() + 1, link.end());
    return with_store(o, [&](auto s, auto r) {
      auto v = cstrs(objs);
      return adl_checkout(s, opt(wsname), name.c_str(), dir.c_str(), opt(mode), v.size(),
                          v.data(), r);
    });
  });

  bool force = false;
  auto* ci = app.add_subcommand("ci", "check in workspace files");
  ci->add_option("paths", items)->required();
  ci->add_flag("--force", force, "check in even when a trigger would skip unchanged files");
  on(ci, [&] {
    return with_store(o, [&](auto s, auto r) {
      auto v = cstrs(items);
      return adl_checkin(s, v.size(), v.data(), force, r);
    });
  });

  bool to_ws = false, to_db = false;
  auto* sync = app.add_subcommand("sync", "synchronize a workspace");
  auto* f_ws = sync->add_flag("--to-ws", to_ws, "refresh files from the database");
  auto* f_db = sync->add_flag("--to-db", to_db, "record new and removed files");
  f_ws->excludes(f_db);
  sync->add_option("--dir", dir, "workspace directory (default: current)");
  on(sync, [&] {
    if (to_ws == to_db) {
      std::cerr << "adl: sync needs exactly one of --to-ws and --to-db\n";
      return 2;
    }
    return with_store(o, [&](auto s, auto r) { return adl_sync(s, opt(dir), to_db, r); });
  });

  auto* resolve = app.add_subcommand("resolve", "object and revision behind a workspace path");
  resolve->add_option("path", target)->required();
  on(resolve, [&] { return with_store(o, [&](auto s, auto r) { return adl_resolve(s, target.c_str(), r); }); });

  auto* proc = app.add_subcommand("proc", "process definitions and instances");
  proc->require_subcommand(1);
  auto* define = proc->add_subcommand("define", "load process definitions");
  define->add_option("file", file)->required();
  on(define, [&] { return with_store(o, [&](auto s, auto r) { return adl_load_file(s, file.c_str(), r); }); });
  std::string puser, parent, role;
  std::vector<std::string> tools;
  auto* pnew = proc->add_subcommand("new", "instantiate a process");
  pnew->add_option("type", type)->required();
  pnew->add_option("--user", puser);
  pnew->add_option("--objects", items)->delimiter(',');
  pnew->add_option("--name", name);
  pnew->add_option("--parent", parent);
  pnew->add_option("--role", role);
  pnew->add_option("--tools", tools)->delimiter(',');
  on(pnew, [&] {
    return with_store(o, [&](auto s, auto r) {
      auto objs = cstrs(items);
      auto ts = cstrs(tools);
      adl_proc_request q{type.c_str(), opt(puser), objs.data(), objs.size(), opt(name),
                         opt(parent), opt(role), ts.data(), ts.size()};
      return adl_proc_new(s, &q, r);
    });
  });

  std::string we, object;
  auto* wecmd = app.add_subcommand("we", "work environments");
  wecmd->require_subcommand(1);
  auto* we_inv = wecmd->add_subcommand("invoke", "we invoke <we> <role> <object> <method> [args]");
  we_inv->add_option("we", we)->required();
  we_inv->add_option("role", role)->required();
  we_inv->add_option("object", object)->required();
  we_inv->add_option("method", method)->required();
  we_inv->allow_extras();
  on(we_inv, [&] {
    auto args = we_inv->remaining();
    return with_store(o, [&](auto s, auto r) {
      auto a = cstrs(args);
      return adl_we_invoke(s, we.c_str(), role.c_str(), object.c_str(), method.c_str(),
                           a.size(), a.data(), r);
    });
  });
  auto* we_set = wecmd->add_subcommand("set", "write a role-local attribute");
  we_set->add_option("we", we)->required();
  we_set->add_option("role", role)->required();
  we_set->add_option("object", object)->required();
  we_set->add_option("attr", attr)->required();
  we_set->add_option("value", value)->required();
  on(we_set, [&] {
    return with_store(o, [&](auto s, auto r) {
      return adl_we_set(s, we.c_str(), role.c_str(), object.c_str(), attr.c_str(), value.c_str(), r);
    });
  });
  auto* we_get = wecmd->add_subcommand("get", "read a role-local attribute");
  we_get->add_option("we", we)->required();
  we_get->add_option("role", role)->required();
  we_get->add_option("object", object)->required();
  we_get->add_option("attr", attr)->required();
  on(we_get, [&] {
    return with_store(o, [&](auto s, auto r) {
      return adl_we_get(s, we.c_str(), role.c_str(), object.c_str(), attr.c_str(), r);
    });
  });
  auto* we_status = wecmd->add_subcommand("status", "bindings, overlays and connections");
  we_status->add_option("we", we)->required();
  on(we_status, [&] { return with_store(o, [&](auto s, auto r) { return adl_we_status(s, we.c_str(), r); }); });

  auto* inbox = app.add_subcommand("inbox", "mail delivered to a user");
  inbox->add_option("user", puser);
  on(inbox, [&] { return with_store(o, [&](auto s, auto r) { return adl_inbox(s, opt(puser), r); }); });

  size_t tail = 0;
  auto* events = app.add_subcommand("event-log", "fired triggers");
  events->add_option("--tail", tail, "last N lines");
  on(events, [&] { return with_store(o, [&](auto s, auto r) { return adl_event_log(s, tail, r); }); });

  auto* tx = app.add_subcommand("tx", "transactions");
  tx->require_subcommand(1);
  auto* last = tx->add_subcommand("last", "trace of the last transaction");
  on(last, [&] { return with_store(o, [&](auto s, auto r) { return adl_tx_last(s, r); }); });

  auto* digest = app.add_subcommand("digest", "digest of the store state");
  on(digest, [&] { return with_store(o, [&](auto s, auto r) { return adl_digest(s, r); }); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "adl: " << e.what() << "\n" << app.help();
    return 2;
  }
  return action ? action() : 2;
}
