#include "adl/loader.hpp"

#include <algorithm>
#include <charconv>
#include <optional>

#include "adl/lexer.hpp"

namespace adl {

namespace {

bool is_object_kw(const TokenStream& ts) {
  return ts.at_keyword("OBJECT") || ts.at_keyword("TYPEOBJET") || ts.at_keyword("TYPEOBJECT");
}
bool is_relation_kw(const TokenStream& ts) {
  return ts.at_keyword("RELTYPE") || ts.at_keyword("RELATION") || ts.at_keyword("TYPERELATION");
}
bool is_process_kw(const TokenStream& ts) {
  return ts.at_keyword("PROCESS") || ts.at_keyword("TYPEPROCESS");
}
bool is_coupling_kw(const TokenStream& ts) {
  return ts.at_keyword("PRE") || ts.at_keyword("POST") || ts.at_keyword("AFTER") ||
         ts.at_keyword("ERROR");
}
bool is_trigger_start(const TokenStream& ts) {
  return ts.at_keyword("ON") || ts.at_keyword("ORIGIN") || ts.at_keyword("DEST") ||
         ts.at_keyword("GLOBAL") || ts.at_keyword("LOCAL");
}

const std::vector<std::string> kConnectionKinds = {"notify", "resynch", "merge",  "duplicate",
                                                   "share",  "deadline", "protect"};

class Loader {
 public:
  Loader(Schema& schema, std::string_view text, std::string partition)
      : s_(schema),
        src_(text),
        ts_(tokenize(text, LexOptions{true})),
        lang_(ts_, report_.warnings),
        part_(std::move(partition)) {}

  LoadReport run() {
    while (!ts_.at_end()) {
      if (ts_.accept(Tok::Semi) || ts_.accept(Tok::Ellipsis)) continue;
      if (is_object_kw(ts_)) {
        type_decl(TypeKind::Object);
      } else if (is_relation_kw(ts_)) {
        type_decl(TypeKind::Relation);
      } else if (is_process_kw(ts_)) {
        process_decl();
      } else if (ts_.accept_keyword("METHOD")) {
        MethodDef m = method_decl(true);
        s_.define_method(m);
        report_.methods.push_back(m.name);
      } else if (ts_.accept_keyword("DEFEVENT")) {
        while (at_event_def()) event_def(nullptr);
      } else if (ts_.accept_keyword("EVENT")) {
        event_def(nullptr);
      } else if (ts_.accept_keyword("PARTITION")) {
        partition_decl();
      } else {
        ts_.fail("expected a declaration");
      }
    }
    return std::move(report_);
  }

 private:
  // ---- helpers
  bool at_top_level_decl() const {
    return is_object_kw(ts_) || is_relation_kw(ts_) || is_process_kw(ts_) ||
           ts_.at_keyword("DEFEVENT") || ts_.at_keyword("PARTITION");
  }

  void warn(const std::string& msg) {
    report_.warnings.push_back("line " + std::to_string(ts_.peek().line) + ": " + msg);
  }

  std::string ident(const char* what) { return ts_.expect(Tok::Ident, what).text; }

  /// `END [name] ;`
  void end_clause(const std::string& name) {
    ts_.expect_keyword("END");
    if (ts_.at(Tok::Ident) && !LangParser::is_reserved(ts_.peek().text)) {
      std::string closing = ts_.next().text;
      if (!iequals(closing, name)) warn("END " + closing + " closes " + name);
    }
    ts_.accept(Tok::Semi);
  }

  std::string source_between(std::size_t from, std::size_t to) const {
    return trim(src_.substr(from, to - from));
  }

  // ---- declarations
  std::vector<std::string> supertype_list() {
    std::vector<std::string> sup;
    if (!ts_.accept_keyword("IS")) return sup;
    if (ts_.accept(Tok::Ellipsis)) return sup;
    do {
      if (ts_.accept(Tok::Ellipsis)) break;
      sup.push_back(ident("supertype name"));
    } while (ts_.accept(Tok::Comma));
    ts_.accept(Tok::Ellipsis);
    return sup;
  }

  void type_decl(TypeKind kind) {
    ts_.next();
    TypeDef def;
    def.kind = kind;
    def.name = ident("type name");
    def.supertypes = supertype_list();
    ts_.accept(Tok::Semi);
    Body body;
    type_body(def, body, false);
    report_.types.push_back(s_.define_type(def, part_));
  }

  struct Body {
    bool attributes = false;
    bool events = false;
    std::optional<Coupling> coupling;
    int groups = 0;
    std::vector<AttributeDef> process_attrs;
    ProcessDef process;
  };

  /// Parses declarations up to END; in process mode attributes are
  /// collected for the roles and ROLE / TYPECONNECTION are accepted.
  void type_body(TypeDef& def, Body& b, bool process) {
    while (true) {
      if (ts_.accept(Tok::Semi) || ts_.accept(Tok::Ellipsis)) continue;
      if (ts_.at_end() || at_top_level_decl()) {
        warn("missing END " + def.name);
        return;
      }
      if (ts_.at_keyword("END")) {
        end_clause(def.name);
        return;
      }
      if (process && ts_.accept(Tok::LBrace)) {
        ++b.groups;
        continue;
      }
      if (process && b.groups > 0 && ts_.accept(Tok::RBrace)) {
        --b.groups;
        continue;
      }
      if (ts_.accept_keyword("DEFATTRIBUTE") || ts_.accept_keyword("ATTRIBUTE")) {
        b.attributes = true;
        b.events = false;
        continue;
      }
      if (ts_.accept_keyword("DEFEVENT")) {
        b.events = true;
        b.attributes = false;
        continue;
      }
      if (ts_.accept_keyword("EVENT")) {
        b.events = true;
        b.attributes = false;
        event_def(&def);
        continue;
      }
      if (ts_.accept_keyword("METHOD")) {
        MethodDef m = method_decl(false);
        if (def.kind == TypeKind::Relation && m.scope == Scope::Entity) m.scope = Scope::Dest;
        def.methods.push_back(std::move(m));
        continue;
      }
      if (is_coupling_kw(ts_)) {
        const std::string kw = to_lower(ts_.next().text);
        b.coupling = kw == "pre"    ? Coupling::Pre
                     : kw == "post" ? Coupling::Post
                     : kw == "after" ? Coupling::After
                                     : Coupling::Error;
        continue;
      }
      if (is_trigger_start(ts_)) {
        trigger_decl(def, b);
        continue;
      }
      if (ts_.accept_keyword("DOMAIN")) {
        domain_decl(def);
        continue;
      }
      if (ts_.accept_keyword("CARD")) {
        card_decl(def);
        continue;
      }
      if (process && ts_.accept_keyword("ROLE")) {
        role_decl(b);
        continue;
      }
      if (process && (ts_.at_keyword("TYPECONNECTION") || ts_.at_keyword("CONNECTION"))) {
        ts_.next();
        connection_decl(b);
        continue;
      }
      if (ts_.at(Tok::Ident) && ts_.peek(1).kind == Tok::Semi) {
        std::string w = to_lower(ts_.peek().text);
        if (w == "dag" || w == "tree" || w == "composition") {
          ts_.next();
          if (w == "dag") def.structure = Structure::Dag;
          if (w == "tree") def.structure = Structure::Tree;
          if (w == "composition") def.composition = true;
          continue;
        }
      }
      if (b.events && at_event_def()) {
        event_def(&def);
        continue;
      }
      if ((b.attributes || process) && ts_.at(Tok::Ident) &&
          !LangParser::is_reserved(ts_.peek().text)) {
        AttributeDef a = attribute_def();
        if (process)
          b.process_attrs.push_back(std::move(a));
        else
          def.attributes.push_back(std::move(a));
        continue;
      }
      ts_.fail("unexpected token in definition of " + def.name);
    }
  }

  AttributeDef attribute_def() {
    AttributeDef a;
    a.name = ident("attribute name");
    bool comp = ts_.accept_keyword("COMP");
    if (comp) {
      a.domain = Domain::of(DomainKind::String);
      ts_.expect(Tok::Assign, "':='");
      a.computed = ts_.expect(Tok::String, "command text").text;
      ts_.accept(Tok::Semi);
      return a;
    }
    if (!ts_.accept(Tok::Colon)) ts_.expect(Tok::Eq, "':' or '='");

    std::vector<std::string> starred;
    auto value_list = [&](bool parens) {
      std::vector<std::string> vals;
      if (parens) ts_.expect(Tok::LParen, "'('");
      do {
        const Token& t = ts_.next();
        if (t.kind != Tok::Ident && t.kind != Tok::Number && t.kind != Tok::String &&
            t.kind != Tok::DateLit)
          throw SyntaxError("expected a value", t.line, t.column);
        vals.push_back(t.text);
        if (ts_.accept(Tok::Star)) starred.push_back(t.text);
      } while (ts_.accept(Tok::Comma));
      if (parens) ts_.expect(Tok::RParen, "')'");
      return vals;
    };

    if (ts_.at(Tok::LParen)) {
      a.domain = Domain{DomainKind::Enumeration, value_list(true)};
    } else if (ts_.at_keyword("set_of")) {
      ts_.next();
      a.domain = Domain{DomainKind::SetOf, value_list(true)};
    } else {
      std::string w = ts_.at(Tok::Ident) ? to_lower(ts_.peek().text) : "";
      if (ts_.peek(1).kind != Tok::Comma && ts_.peek(1).kind != Tok::Star &&
          (w == "integer" || w == "date" || w == "boolean" || w == "string")) {
        ts_.next();
        a.domain = Domain::of(w == "integer"   ? DomainKind::Integer
                              : w == "date"    ? DomainKind::Date
                              : w == "boolean" ? DomainKind::Boolean
                                               : DomainKind::String);
      } else {
        a.domain = Domain{DomainKind::Enumeration, value_list(false)};
      }
    }

    auto parse_value = [&](const Token& t) {
      auto v = a.domain.parse(t.text);
      if (!v) throw SyntaxError("value '" + t.text + "' is outside the domain of " + a.name,
                                t.line, t.column);
      return *v;
    };
    if (!starred.empty()) {
      if (a.domain.kind == DomainKind::SetOf)
        a.default_value = Value::set(starred);
      else
        a.default_value = Value::string(starred.front());
    }
    while (true) {
      if (ts_.accept(Tok::Assign)) {
        a.default_value = parse_value(ts_.next());
      } else if (ts_.accept_keyword("INITIAL")) {
        ts_.accept(Tok::Assign);
        a.initial = parse_value(ts_.next());
      } else {
        break;
      }
    }
    ts_.accept(Tok::Semi);
    return a;
  }

  /// After METHOD: `name [(params)] [-f %p]... (DO stmt | ; {block} | ; stmts END | ...)`.
  MethodDef method_decl(bool top_level) {
    MethodDef m;
    m.name = ident("method name");
    if (ts_.accept(Tok::LParen)) {
      if (!ts_.at(Tok::RParen)) {
        do {
          const Token& t = ts_.next();
          if (t.kind != Tok::Ident && t.kind != Tok::Percent)
            throw SyntaxError("expected parameter name", t.line, t.column);
          m.params.push_back(t.text);
        } while (ts_.accept(Tok::Comma));
      }
      ts_.expect(Tok::RParen, "')'");
    }
    while (ts_.at(Tok::Flag)) {
      std::string flag = ts_.next().text;
      std::string param = flag;
      if (ts_.at(Tok::Percent) || (ts_.at(Tok::Ident) && !LangParser::is_reserved(ts_.peek().text)))
        param = ts_.next().text;
      m.flag_params.emplace_back(flag, param);
    }
    if (ts_.accept(Tok::Ellipsis)) {
      ts_.accept(Tok::Semi);
      return m;
    }
    if (ts_.accept_keyword("DO")) {
      m.body = lang_.statement();
      ts_.accept(Tok::Semi);
      return m;
    }
    ts_.accept(Tok::Semi);
    if (ts_.at(Tok::LBrace)) {
      m.body = lang_.statement();
      ts_.accept(Tok::Semi);
      return m;
    }
    bool body_follows = top_level ? !at_top_level_decl() && !ts_.at_end()
                                  : ts_.at(Tok::Ident) && !LangParser::is_reserved(ts_.peek().text);
    if (body_follows) {
      m.body = lang_.statements_until_keyword("END");
      end_clause(m.name);
    }
    return m;
  }

  void trigger_decl(TypeDef& def, Body& b) {
    TriggerDef t;
    t.coupling = b.coupling.value_or(Coupling::Post);
    t.scope = def.kind == TypeKind::Relation ? Scope::Dest : Scope::Entity;
    bool scoped = false;
    while (true) {
      if (ts_.accept_keyword("ON")) continue;
      if (ts_.accept_keyword("ORIGIN")) {
        t.scope = Scope::Origin;
        scoped = true;
      } else if (ts_.accept_keyword("DEST")) {
        t.scope = Scope::Dest;
        scoped = true;
      } else if (ts_.accept_keyword("GLOBAL")) {
        t.visibility = Visibility::Global;
      } else if (ts_.accept_keyword("LOCAL")) {
        t.visibility = Visibility::Local;
      } else {
        break;
      }
    }
    if (scoped && def.kind == TypeKind::Object)
      ts_.fail("ORIGIN/DEST triggers belong to relation types");
    if (ts_.accept_keyword("METHOD")) {
      MethodDef m = method_decl(false);
      m.scope = t.scope;
      def.methods.push_back(std::move(m));
      return;
    }
    CondPtr ev = lang_.condition();
    if (ev->kind == Cond::Kind::Ref)
      t.event = ev->name;
    else
      t.inline_event = ev;
    ts_.expect_keyword("DO");
    t.action = lang_.statement();
    ts_.accept(Tok::Semi);
    def.triggers.push_back(std::move(t));
  }

  bool at_event_def() const {
    return ts_.at(Tok::Ident) && !LangParser::is_reserved(ts_.peek().text) &&
           ts_.peek(1).kind == Tok::Eq;
  }

  void event_def(TypeDef* owner) {
    EventRule r;
    r.name = ident("event name");
    ts_.expect(Tok::Eq, "'='");
    r.expr = lang_.condition();
    ts_.accept(Tok::Semi);
    if (ts_.accept_keyword("PRIORITY")) {
      const Token& n = ts_.expect(Tok::Number, "priority");
      std::from_chars(n.text.data(), n.text.data() + n.text.size(), r.priority);
      ts_.accept(Tok::Semi);
    }
    if (owner) owner->events.push_back(r.name);
    report_.events.push_back(r.name);
    s_.define_event(std::move(r));
  }

  void domain_decl(TypeDef& def) {
    // pairs `origin -> dest` separated by OR, up to ';'
    std::vector<std::size_t> arrows, ors;
    std::vector<Token> toks;
    while (!ts_.at(Tok::Semi) && !ts_.at_end()) toks.push_back(ts_.next());
    ts_.accept(Tok::Semi);
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (toks[i].kind == Tok::Arrow) arrows.push_back(i);
      if (toks[i].kind == Tok::Ident && iequals(toks[i].text, "or")) ors.push_back(i);
    }
    if (arrows.empty()) ts_.fail("DOMAIN needs 'origin -> destination'");
    std::size_t start = 0;
    for (std::size_t k = 0; k < arrows.size(); ++k) {
      std::size_t stop = toks.size();
      if (k + 1 < arrows.size()) {
        // the last OR before the next arrow separates the pairs
        for (std::size_t o : ors)
          if (o > arrows[k] && o < arrows[k + 1]) stop = o;
        if (stop == toks.size()) ts_.fail("DOMAIN pairs must be separated by OR");
      }
      if (start >= arrows[k] || arrows[k] + 1 >= stop) ts_.fail("empty DOMAIN predicate");
      std::string origin = source_between(toks[start].offset, toks[arrows[k] - 1].end_offset);
      std::string dest = source_between(toks[arrows[k] + 1].offset, toks[stop - 1].end_offset);
      DomainPair p{parse_constraint(origin), parse_constraint(dest), origin + " -> " + dest};
      def.domain.push_back(std::move(p));
      start = stop + 1;
    }
  }

  void card_decl(TypeDef& def) {
    std::string text;
    while (!ts_.at(Tok::Semi) && !ts_.at_end()) {
      const Token& t = ts_.next();
      text += t.kind == Tok::Colon ? ":" : to_lower(t.text);
    }
    ts_.accept(Tok::Semi);
    if (text == "1:1") def.card = Cardinality::OneOne;
    else if (text == "1:n") def.card = Cardinality::OneMany;
    else if (text == "n:1") def.card = Cardinality::ManyOne;
    else if (text == "n:n") def.card = Cardinality::ManyMany;
    else ts_.fail("unknown cardinality '" + text + "'");
  }

  void partition_decl() {
    std::string name = ident("partition name");
    std::string parent = part_;
    if (ts_.accept_keyword("IS") || ts_.accept_keyword("OF") || ts_.accept_keyword("IN"))
      parent = ident("parent partition");
    ts_.accept(Tok::Semi);
    if (!s_.has_partition(name)) {
      s_.add_partition(name, parent);
      report_.partitions.push_back(name);
    }
    part_ = name;
  }

  // ---- processes
  void role_decl(Body& b) {
    RoleDef r;
    r.name = ident("role name");
    ts_.expect(Tok::Eq, "'='");
    r.base = ident("role base");
    if (ts_.accept(Tok::Slash)) {
      std::size_t from = ts_.peek().offset;
      r.filter = lang_.condition();
      r.filter_text = source_between(from, ts_.prev().end_offset);
    }
    ts_.accept(Tok::Semi);
    if (iequals(r.name, "USER")) {
      b.process.user = r.base;
      return;
    }
    b.process.roles.push_back(std::move(r));
  }

  void connection_decl(Body& b) {
    ConnectionDef c;
    c.name = ident("connection name");
    if (ts_.accept_keyword("IS")) {
      do {
        std::string k = to_lower(ident("connection kind"));
        if (std::find(kConnectionKinds.begin(), kConnectionKinds.end(), k) ==
            kConnectionKinds.end())
          ts_.fail("unknown connection kind '" + k + "'");
        c.kinds.push_back(k);
      } while (ts_.accept(Tok::Comma));
    }
    ts_.accept(Tok::Semi);
    bool events = false;
    while (true) {
      if (ts_.accept(Tok::Semi)) continue;
      if (ts_.at_keyword("END")) {
        end_clause(c.name);
        break;
      }
      if (ts_.at_end()) ts_.fail("missing END of connection " + c.name);
      if (ts_.accept_keyword("CONNECT")) {
        c.left_role = ident("role");
        ts_.expect_keyword("WITH");
        c.right_role = ident("role");
        if (ts_.accept_keyword("WHEN")) {
          c.left_path = ident("role path");
          ts_.expect(Tok::Eq, "'='");
          c.right_path = ident("role path");
        }
        continue;
      }
      if (ts_.accept_keyword("EVENT")) {
        events = true;
        continue;
      }
      if (events && at_event_def()) {
        std::string name = to_lower(ts_.next().text);
        ts_.next();
        c.events[name] = lang_.condition();
        continue;
      }
      ts_.fail("unexpected token in connection " + c.name);
    }
    b.process.connections.push_back(std::move(c));
  }

  void process_decl() {
    ts_.next();
    TypeDef def;
    def.kind = TypeKind::Object;
    def.name = ident("process name");
    def.supertypes = supertype_list();
    ts_.accept(Tok::Semi);
    if (def.supertypes.empty()) def.supertypes.push_back("process");
    Body b;
    b.process.name = def.name;
    type_body(def, b, true);
    if (b.groups != 0) ts_.fail("unbalanced '{' in process " + def.name);

    // rules also live on the process type for the parent-level evaluation
    std::vector<TriggerDef> rules = def.triggers;
    std::vector<MethodDef> methods = def.methods;
    def.methods.clear();
    std::string pname = s_.define_type(def, part_);
    b.process.name = pname;

    ProcessDef& p = b.process;
    for (auto& r : p.roles) r.relation = pname + "." + r.name;
    for (auto& r : p.roles) {
      const RoleDef* parent = p.role(r.base);
      TypeDef rt;
      rt.name = r.relation;
      rt.kind = TypeKind::Relation;
      rt.card = Cardinality::ManyMany;
      if (parent && parent != &r) {
        if (parent->relation.empty() || !s_.visible(parent->relation, part_))
          ts_.fail("role " + r.name + " must follow its base role " + parent->name);
        rt.supertypes = {parent->relation};
      } else {
        auto base = s_.resolve_name(r.base, part_);
        if (!base) ts_.fail("unknown base '" + r.base + "' of role " + r.name);
        r.base = *base;
        rt.supertypes = {"role"};
        auto bt = s_.effective(*base, part_);
        if (bt->kind != TypeKind::Object)
          ts_.fail("role " + r.name + " has a relation type as base");
        bool process_base = s_.is_subtype(*base, "process", part_);
        if (!process_base) {
          for (auto& [n, a] : bt->attributes)
            if (!a.builtin) rt.attributes.push_back(a);
          for (auto& pa : b.process_attrs) {
            auto it = std::find_if(rt.attributes.begin(), rt.attributes.end(),
                                   [&](const AttributeDef& x) { return iequals(x.name, pa.name); });
            if (it == rt.attributes.end()) {
              rt.attributes.push_back(pa);
            } else if (it->domain.kind == DomainKind::Enumeration &&
                       pa.domain.kind == DomainKind::Enumeration) {
              for (auto& v : pa.domain.values)
                if (std::find(it->domain.values.begin(), it->domain.values.end(), v) ==
                    it->domain.values.end())
                  it->domain.values.push_back(v);
            } else {
              *it = pa;
            }
          }
          for (auto m : methods) {
            m.scope = Scope::Dest;
            rt.methods.push_back(std::move(m));
          }
          for (auto t : rules) {
            t.scope = Scope::Dest;
            t.self_is_receiver = true;
            rt.triggers.push_back(std::move(t));
          }
        }
      }
      s_.define_type(rt, part_);
    }
    s_.define_process(p);
    report_.processes.push_back(pname);
    report_.types.push_back(pname);
  }

  Schema& s_;
  std::string_view src_;
  TokenStream ts_;
  LoadReport report_;
  LangParser lang_;
  std::string part_;
};

}  // namespace

LoadReport load_dsl(Schema& schema, std::string_view text, const std::string& partition) {
  Schema scratch = schema;
  Loader loader(scratch, text, partition);
  LoadReport report = loader.run();
  schema = std::move(scratch);
  return report;
}

}  // namespace adl
