#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "adl/action.hpp"
#include "adl/loader.hpp"
#include "adl/schema.hpp"
#include "adl/store.hpp"

namespace adl {

/// One line of the side-effect log: `phase|event|priority|source|summary`.
/// `nest` counts sub-invocations inside the same transaction (rendered as
/// leading dots), `cascade` counts decoupled programs (leading `>`).
struct TraceLine {
  int cascade = 0;
  int nest = 0;
  std::string phase, event;
  int priority = 0;
  std::string source, summary;
  std::string render() const;
};

struct TxResult {
  bool committed = true;
  std::string message;  // abort reason
  std::vector<std::string> output;
  std::vector<TraceLine> trace;
  std::vector<std::string> diagnostics;
  std::string trace_text() const;
};

/// Who is issuing commands and from where. An empty `we` and `context`
/// means the whole store is visible except process-instance objects.
struct Session {
  std::string user = "admin";
  std::string we;
  std::string context;
};

/// Thrown by ABORT and by any failed statement inside a transaction.
struct AbortSignal {
  std::string message;
};

/// Runtime value of an action-language expression element.
struct Item {
  enum class Kind { Value, Object, Relation };
  Kind kind = Kind::Value;
  Value value;
  std::string name;            // object name
  RelKey rel;                  // relation identity
  std::optional<RelKey> via;   // role relation a role path went through

  static Item of_value(Value v);
  static Item object(std::string n, std::optional<RelKey> via = std::nullopt);
  static Item relation(RelKey k);
  bool is_entity() const { return kind != Kind::Value; }
  std::string text() const;
};
using Items = std::vector<Item>;

/// An attribute write recorded in the transaction write-set.
struct Write {
  std::string object;              // logical object (bound object for overlays)
  std::optional<RelKey> relation;  // set when stored on a relation or overlay
  std::string attr;
  Value value;
  std::string we;
};

/// Bindings of one method activation or trigger program.
struct Frame {
  Item self;
  Item receiver;  // object or relation receiving the event
  std::string cmd;
  std::map<std::string, Items> params;    // declared names, flag letters, #0, #1, ...
  std::map<std::string, Items> bindings;  // lower-cased keys: o, d, s, reltype, ...
  std::vector<RelKey> incident;           // relations touching the receiver at start
  const std::vector<Write>* writes = nullptr;  // write-set for transition atoms; null: current
  std::string we;
  bool admin = false;
};

struct CallArg {
  std::string flag;
  Items value;
};

struct Tx;

class Engine {
 public:
  Engine();
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  Database& db() { return db_; }
  const Database& db() const { return db_; }
  const Schema& schema() const { return db_.schema(); }

  Session& session() { return session_; }
  void set_clock(std::function<Date()> clock) { clock_ = std::move(clock); }
  Date now() const;
  void set_cascade_limit(int n) { cascade_limit_ = n; }
  /// External commands failing with a nonzero status abort (default) or warn.
  void set_abort_on_command_failure(bool v) { abort_on_command_failure_ = v; }
  void set_work_root(std::filesystem::path p) { work_root_ = std::move(p); }
  const std::filesystem::path& work_root() const { return work_root_; }

  /// Called with the journal records of every committed transaction.
  using JournalSink = std::function<void(const std::vector<Fields>&, const Session&, Date)>;
  void set_journal(JournalSink sink) { journal_ = std::move(sink); }
  using EventSink = std::function<void(const std::string&)>;
  void set_event_sink(EventSink sink) { event_sink_ = std::move(sink); }

  /// Post-commit hooks schedule follow-up transactions through `schedule`.
  struct CommitInfo {
    std::string label;
    Session session;
    std::vector<Write> writes;
  };
  using Schedule = std::function<void(const std::string&, const std::function<void()>&)>;
  using CommitHook = std::function<void(const CommitInfo&, const Schedule&)>;
  void add_commit_hook(CommitHook hook) { hooks_.push_back(std::move(hook)); }
  /// Creates the sub-process instance for `new <role>` inside process `parent`.
  using RoleFactory = std::function<void(const std::string& parent, const std::string& role)>;
  void set_role_factory(RoleFactory f) { role_factory_ = std::move(f); }

  // ---- transactions
  /// Runs `body` as one transaction, then its AFTER/ERROR programs and hooks.
  TxResult run(const std::string& label, const std::function<void()>& body);
  bool in_transaction() const { return tx_ != nullptr; }
  const TxResult& last() const { return last_; }
  const std::vector<std::string>& event_log() const { return event_log_; }

  // ---- commands (each a transaction)
  LoadReport load(std::string_view text, const std::string& partition = Schema::kRoot);
  TxResult create_object(const std::string& name, const std::string& type,
                         const std::string& partition = Schema::kRoot);
  TxResult create_relation(const std::string& origin, const std::string& rel,
                           const std::string& dest);
  TxResult set_attribute(const std::string& target, const std::string& attr,
                         const std::string& value);
  /// `args` use CLI conventions: `-x value` flags and positional words.
  TxResult invoke(const std::string& target, const std::string& method,
                  const std::vector<std::string>& args = {});

  // ---- operations usable inside a transaction
  void do_create_object(const std::string& name, const std::string& type,
                        const std::string& partition = Schema::kRoot);
  void do_create_relation(const RelKey& key);
  void do_delete_relation(const RelKey& key);
  void do_write(const Item& target, const std::string& attr, const Value& v,
                const std::string& we = "");
  /// Parses text into the attribute's domain and writes it.
  void do_write_text(const Item& target, const std::string& attr, const std::string& text,
                     const std::string& we = "");
  int do_new_revision(const std::string& obj, const std::string& branch = "main");
  void do_invoke(const Item& receiver, const std::string& method, std::vector<CallArg> args,
                 const Frame* caller = nullptr);
  void do_write_file(const std::filesystem::path& path, const std::string& content);
  void do_remove_file(const std::filesystem::path& path);
  void do_mail(const std::string& user, const std::string& message);
  void output(const std::string& line);
  [[noreturn]] void abort(const std::string& message);

  // ---- reads
  Item resolve(const std::string& target) const;  // object name or `o|r|d`
  /// Scoped read: own value, composition ancestors, default, computed.
  Value get(const Item& target, const std::string& attr, const std::string& we = "") const;
  Value get(const std::string& target, const std::string& attr) const;
  /// Attribute name as declared for the target's type (case-insensitive), if any.
  std::optional<std::string> attribute_name(const Item& target, const std::string& attr) const;
  std::shared_ptr<const ResolvedType> type_of(const Item& target) const;
  bool history_query(const Item& target, const std::string& attr, CmpOp op, const Value& v) const;
  /// Objects reachable from `root` through composition relations, root included.
  std::set<std::string> composition_closure(const std::vector<std::string>& roots) const;
  bool is_process_instance(const std::string& obj) const;
  bool relation_visible(const RelKey& key, const std::string& we) const;
  /// Role relation binding `obj` inside process instance `we`, if any.
  std::optional<RelKey> role_binding(const std::string& we, const std::string& obj) const;
  /// Content of the revision, or the current content when `rev` is 0.
  std::string content_of(const std::string& obj, const std::string& branch, int rev) const;
  int latest_revision(const std::string& obj, const std::string& branch = "main") const;

  // ---- action language
  Items eval(const Expr& e, Frame& f, bool lhs = false);
  bool eval_cond(const Cond& c, Frame& f);
  void exec(const Stmt& s, Frame& f);
  /// Whether the event of `t` holds in `f` (named rule, inline expression or
  /// implicit method event).
  bool event_true(const TriggerDef& t, Frame& f);
  int event_priority(const TriggerDef& t) const;
  Frame frame_for(const Item& self) const;
  std::string user_of(const Frame& f) const;

  static std::string canonical_command(const std::string& name);
  /// Drops cached type facts and computed values after the schema changed
  /// outside `load` (journal replay).
  void invalidate_caches() {
    process_type_cache_.clear();
    computed_cache_.clear();
  }

 private:
  friend struct Tx;
  struct Candidate;
  struct Pending;
  struct Slot;

  void run_into(TxResult& res, const std::string& label, const std::function<void()>& body,
                int cascade);
  std::vector<Candidate> gather(const Frame& ev, Coupling coupling) const;
  std::vector<Pending> collect(const Frame& ev, Coupling coupling);
  void fire(std::vector<Pending>& batch, const char* phase);
  Frame trigger_frame(const Candidate& c, const Frame& ev) const;
  static std::string source_of(const Candidate& c);
  void check_relation(RelKey& key) const;
  bool domain_ok(const Constraint& c, const ObjectRec& obj) const;
  void builtin(const std::string& name, Frame& f);
  void free_builtin(const std::string& name, const std::vector<CallArg>& args, Frame& f);
  void call(const Stmt& s, Frame& f);
  void assign(const Stmt& s, Frame& f);
  void make_we(const std::string& role, Frame& f);
  Items eval_word(const std::string& word, Frame& f, bool lhs);
  std::string process_context(const Frame& f) const;
  bool is_role_path(const std::vector<std::string>& segments, const Frame& f) const;
  Items role_path(const std::vector<std::string>& segments, Frame& f);
  Items apply_steps(Items in, const std::vector<Step>& steps, Frame& f);
  Items attr_step(const Items& in, const std::string& attr, Frame& f, bool keep_unset = false);
  std::optional<Items> lookup_param(const std::string& name, const Frame& f) const;
  std::optional<Items> lookup_binding(const std::string& name, const Frame& f) const;
  std::string substitute(const std::string& text, const Frame& f) const;
  Value computed(const std::string& command) const;
  void trace(const std::string& phase, const std::string& event, int priority,
             const std::string& source, const std::string& summary);
  Slot slot(const Item& target, const std::string& attr, const std::string& we) const;
  Value coerce(const Item& target, const std::string& attr, const Items& values,
               const std::string& we) const;
  Value read(const Item& target, const std::string& attr, const std::string& we,
             bool strict) const;
  std::shared_ptr<const ResolvedType> rtype(const RelKey& key) const;
  std::string current_user() const;
  std::set<std::string> context_members(const std::string& context) const;

  Database db_;
  Session session_;
  std::function<Date()> clock_;
  int cascade_limit_ = 100;
  bool abort_on_command_failure_ = true;
  std::filesystem::path work_root_;
  JournalSink journal_;
  EventSink event_sink_;
  std::vector<CommitHook> hooks_;
  RoleFactory role_factory_;
  Tx* tx_ = nullptr;
  int tx_counter_ = 0;
  TxResult last_;
  std::vector<std::string> event_log_;
  mutable std::map<std::string, Value> computed_cache_;
  mutable std::map<std::string, bool> process_type_cache_;
  std::set<std::string> ref_guard_;
  bool collecting_ = false;  // evaluating under `~`
};

}  // namespace adl
