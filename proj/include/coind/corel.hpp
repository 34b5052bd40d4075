#pragma once
// Coinductive relations read at finite stages, plus the worked example relations.

#include <coind/coterm.hpp>
#include <coind/ext_nat.hpp>

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace coind::rel {

struct contract_error : std::logic_error {
  using std::logic_error::logic_error;
};
struct rule_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Judgment {
  std::string relation;
  std::vector<Coterm> args;
};

struct StageJudgment {
  Judgment judgment;
  std::size_t stage = 0;
};

// one way to derive the conclusion: all premises must hold one stage lower
using Alternative = std::vector<Judgment>;
using Matcher = std::function<std::vector<Alternative>(const std::vector<Coterm>&)>;

struct Rule {
  std::string name;
  Matcher match;
  std::size_t depth = 1;  // how deep the conclusion inspects its arguments
};

// ---- patterns ---------------------------------------------------------------

struct Pattern {
  bool is_var = true;
  std::string name;
  std::vector<Pattern> kids;

  std::size_t depth() const {
    std::size_t d = 0;
    for (const auto& k : kids) d = std::max(d, k.depth());
    return is_var ? 0 : d + 1;
  }
  void vars(std::set<std::string>& out) const {
    if (is_var) out.insert(name);
    for (const auto& k : kids) k.vars(out);
  }
};

struct SideCondition {
  enum Kind { IsVar, Equal, NotEqual } kind = IsVar;
  std::string a, b;
};

struct PatternRule {
  std::string name;
  std::string relation;
  std::vector<Pattern> conclusion;
  std::vector<std::pair<std::string, std::vector<std::string>>> premises;
  std::vector<SideCondition> conditions;
};

using Bindings = std::map<std::string, Coterm>;

inline std::optional<ConstructorDecl> declared_ctor(const Signature* sig, const std::string& name) {
  if (!sig) return std::nullopt;
  for (const auto& c : sig->constructors())
    if (c.name == name) return c;
  return std::nullopt;
}

inline bool match_pattern(const Pattern& p, const Coterm& t, Bindings& b) {
  if (p.is_var) {
    auto it = b.find(p.name);
    if (it == b.end()) {
      b.emplace(p.name, t);
      return true;
    }
    return it->second.same_node(t) || coterm_equal(it->second, t);
  }
  if (t.label() != p.name || t.arity() != p.kids.size()) return false;
  for (std::size_t i = 0; i < p.kids.size(); ++i)
    if (!match_pattern(p.kids[i], t.child(i), b)) return false;
  return true;
}

// ---- rule sets --------------------------------------------------------------

class RuleSet {
 public:
  using KeyFn = std::function<std::string(const Coterm&)>;

  RuleSet(std::shared_ptr<const Signature> sig = nullptr, std::string sort = "")
      : sig_(std::move(sig)), sort_(std::move(sort)) {}

  const std::shared_ptr<const Signature>& signature() const { return sig_; }
  const std::string& sort() const { return sort_; }

  void declare(const std::string& rel, std::size_t arity) {
    auto it = arity_.find(rel);
    if (it != arity_.end() && it->second != arity)
      throw rule_error("relation " + rel + " redeclared with different arity");
    arity_[rel] = arity;
    rules_[rel];
  }
  bool has_relation(const std::string& rel) const { return arity_.count(rel) > 0; }
  std::size_t arity(const std::string& rel) const {
    auto it = arity_.find(rel);
    if (it == arity_.end()) throw rule_error("unknown relation " + rel);
    return it->second;
  }
  std::vector<std::string> relations() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : arity_) out.push_back(k);
    return out;
  }
  const std::vector<Rule>& rules(const std::string& rel) const {
    auto it = rules_.find(rel);
    if (it == rules_.end()) throw rule_error("unknown relation " + rel);
    return it->second;
  }

  void add_rule(const std::string& rel, Rule r) {
    if (!has_relation(rel)) throw rule_error("unknown relation " + rel);
    if (!r.match) throw rule_error("rule " + r.name + " has no matcher");
    rules_[rel].push_back(std::move(r));
    memo_.clear();
  }

  void add_pattern_rule(const PatternRule& pr) {
    if (!has_relation(pr.relation)) throw rule_error("rule " + pr.name + ": unknown relation " + pr.relation);
    if (pr.conclusion.size() != arity(pr.relation))
      throw rule_error("rule " + pr.name + ": conclusion arity mismatch");
    std::set<std::string> bound;
    std::size_t depth = 0;
    for (const auto& p : pr.conclusion) {
      check_pattern(pr.name, p);
      p.vars(bound);
      depth = std::max(depth, p.depth());
    }
    for (const auto& [rel, vs] : pr.premises) {
      if (!has_relation(rel)) throw rule_error("rule " + pr.name + ": unknown relation " + rel);
      if (vs.size() != arity(rel)) throw rule_error("rule " + pr.name + ": premise arity mismatch");
      for (const auto& v : vs)
        if (!bound.count(v)) throw rule_error("rule " + pr.name + ": premise variable " + v + " not bound by conclusion");
    }
    for (const auto& c : pr.conditions) {
      if (!bound.count(c.a) || (c.kind != SideCondition::IsVar && !bound.count(c.b)))
        throw rule_error("rule " + pr.name + ": side condition on unbound variable");
    }
    auto sig = sig_;
    Matcher m = [pr, sig](const std::vector<Coterm>& args) -> std::vector<Alternative> {
      Bindings b;
      for (std::size_t i = 0; i < args.size(); ++i)
        if (!match_pattern(pr.conclusion[i], args[i], b)) return {};
      for (const auto& c : pr.conditions) {
        const Coterm& x = b.at(c.a);
        switch (c.kind) {
          case SideCondition::IsVar: {
            bool v = x.arity() == 0 && (sig ? sig->is_variable(x.label()) : !x.label().empty());
            if (!v) return {};
            break;
          }
          case SideCondition::Equal:
            if (!coterm_equal(x, b.at(c.b))) return {};
            break;
          case SideCondition::NotEqual:
            if (coterm_equal(x, b.at(c.b))) return {};
            break;
        }
      }
      Alternative alt;
      for (const auto& [rel, vs] : pr.premises) {
        Judgment j{rel, {}};
        for (const auto& v : vs) j.args.push_back(b.at(v));
        alt.push_back(std::move(j));
      }
      return {alt};
    };
    add_rule(pr.relation, Rule{pr.name, std::move(m), std::max<std::size_t>(depth, 1)});
  }

  std::size_t max_pattern_depth() const {
    std::size_t d = 0;
    for (const auto& [k, rs] : rules_)
      for (const auto& r : rs) d = std::max(d, r.depth);
    return d;
  }

  void set_key(KeyFn k) {
    key_ = std::move(k);
    memo_.clear();
  }
  void set_memo_cap(std::size_t cap) { memo_cap_ = cap; }
  std::size_t memo_size() const { return memo_.size(); }
  void clear_memo() const {
    memo_.clear();
    pins_.clear();
  }

  bool holds(const Judgment& j, std::size_t stage) const {
    if (j.args.size() != arity(j.relation))
      throw rule_error("judgment arity mismatch for " + j.relation);
    if (stage == 0) return true;
    std::string k = key(j, stage);
    auto it = memo_.find(k);
    if (it != memo_.end()) return it->second;
    if (memo_.size() >= memo_cap_) throw resource_error("relation memo cap exceeded");
    bool result = false;
    for (const auto& r : rules(j.relation)) {
      for (const auto& alt : r.match(j.args)) {
        bool ok = true;
        for (const auto& p : alt)
          if (!holds(p, stage - 1)) {
            ok = false;
            break;
          }
        if (ok) {
          result = true;
          break;
        }
      }
      if (result) break;
    }
    memo_[k] = result;
    if (!key_) pins_.insert(pins_.end(), j.args.begin(), j.args.end());
    return result;
  }

  bool holds_at_stage(const StageJudgment& sj) const { return holds(sj.judgment, sj.stage); }

  // largest n <= max_stage with the judgment holding at n (stages are antitone)
  std::size_t deepest_stage(const Judgment& j, std::size_t max_stage) const {
    std::size_t lo = 0, hi = max_stage;
    while (lo < hi) {
      std::size_t mid = lo + (hi - lo + 1) / 2;
      if (holds(j, mid))
        lo = mid;
      else
        hi = mid - 1;
    }
    return lo;
  }

 private:
  void check_pattern(const std::string& rule, const Pattern& p) const {
    if (p.is_var) return;
    if (sig_) {
      auto d = declared_ctor(sig_.get(), p.name);
      if (!d) throw rule_error("rule " + rule + ": unknown constructor " + p.name);
      if (d->args.size() != p.kids.size()) throw rule_error("rule " + rule + ": arity mismatch for " + p.name);
    }
    for (const auto& k : p.kids) check_pattern(rule, k);
  }

  std::string key(const Judgment& j, std::size_t stage) const {
    std::string k = j.relation;
    for (const auto& a : j.args) {
      k += '|';
      if (key_) {
        k += key_(a);
      } else {
        auto id = a.identity();
        std::ostringstream os;
        os << id.first << ':' << id.second;
        k += os.str();
      }
    }
    k += '@' + std::to_string(stage);
    return k;
  }

  std::shared_ptr<const Signature> sig_;
  std::string sort_;
  std::map<std::string, std::size_t> arity_;
  std::map<std::string, std::vector<Rule>> rules_;
  KeyFn key_;
  std::size_t memo_cap_ = 2000000;
  mutable std::unordered_map<std::string, bool> memo_;
  mutable std::vector<Coterm> pins_;  // keeps identity-keyed graphs alive
};

// ---- text format ------------------------------------------------------------
//
//   sort T
//   ctor A(T)
//   ctor B(T,T)
//   variables T
//   relation -> 2
//   rule r3: B(s,t) -> B(u,v) <= s -> u, t -> v
//   rule r1: x -> x if var(x)
//   check rec t. A(t) -> rec s. B(s,s)
//
// symbolic binary relations are written infix, others as R(a, b, ...)

struct RuleFile {
  RuleSet rules;
  std::vector<Judgment> checks;
  std::vector<std::string> check_texts;
};

namespace detail {

struct Lex {
  std::string src;
  std::size_t line = 1;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& msg) const { throw parse_error(msg, line, pos + 1); }
  void ws() {
    while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
  }
  bool eof() {
    ws();
    return pos >= src.size();
  }
  static bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\''; }
  static bool sym_char(char c) { return std::string("-<>=!~*+/|&^.:").find(c) != std::string::npos; }
  std::string peek() {
    std::size_t save = pos;
    std::string t = next();
    pos = save;
    return t;
  }
  std::string next() {
    ws();
    if (pos >= src.size()) return "";
    char c = src[pos];
    if (ident_char(c)) {
      std::size_t b = pos;
      while (pos < src.size() && ident_char(src[pos])) ++pos;
      return src.substr(b, pos - b);
    }
    if (c == '(' || c == ')' || c == ',') {
      ++pos;
      return std::string(1, c);
    }
    if (sym_char(c)) {
      std::size_t b = pos;
      while (pos < src.size() && sym_char(src[pos])) ++pos;
      return src.substr(b, pos - b);
    }
    fail(std::string("unexpected character '") + c + "'");
  }
  void expect(const std::string& t) {
    std::string got = next();
    if (got != t) fail("expected '" + t + "' but found '" + got + "'");
  }
};

inline bool symbolic(const std::string& s) { return !s.empty() && !Lex::ident_char(s[0]); }

inline Pattern parse_pattern(Lex& lx, const Signature* sig) {
  std::string id = lx.next();
  if (id.empty() || !Lex::ident_char(id[0])) lx.fail("expected a term, found '" + id + "'");
  Pattern p;
  p.name = id;
  bool ctor = declared_ctor(sig, id).has_value();
  if (lx.peek() == "(") {
    lx.next();
    p.is_var = false;
    if (lx.peek() != ")") {
      p.kids.push_back(parse_pattern(lx, sig));
      while (lx.peek() == ",") {
        lx.next();
        p.kids.push_back(parse_pattern(lx, sig));
      }
    }
    lx.expect(")");
  } else {
    p.is_var = !ctor;
  }
  return p;
}

// R(args) or lhs R rhs; returns relation and argument patterns
inline std::pair<std::string, std::vector<Pattern>> parse_judgment(Lex& lx, const RuleSet& rs) {
  std::string first = lx.peek();
  if (rs.has_relation(first) && !symbolic(first)) {
    std::size_t save = lx.pos;
    lx.next();
    if (lx.peek() == "(") {
      lx.next();
      std::vector<Pattern> args;
      if (lx.peek() != ")") {
        args.push_back(parse_pattern(lx, rs.signature().get()));
        while (lx.peek() == ",") {
          lx.next();
          args.push_back(parse_pattern(lx, rs.signature().get()));
        }
      }
      lx.expect(")");
      return {first, args};
    }
    lx.pos = save;
  }
  Pattern lhs = parse_pattern(lx, rs.signature().get());
  std::string rel = lx.next();
  if (!rs.has_relation(rel)) lx.fail("unknown relation '" + rel + "'");
  Pattern rhs = parse_pattern(lx, rs.signature().get());
  return {rel, {lhs, rhs}};
}

inline std::string var_of(const Pattern& p, Lex& lx) {
  if (!p.is_var) lx.fail("premise arguments must be pattern variables");
  return p.name;
}

// split "lhs REL rhs" or "REL(a, b)" at top level for check lines
inline std::pair<std::string, std::vector<std::string>> split_check(const std::string& text, const RuleSet& rs,
                                                                    std::size_t line) {
  auto trim = [](std::string s) {
    auto b = s.find_first_not_of(" \t");
    auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  std::string t = trim(text);
  for (const auto& rel : rs.relations()) {
    if (symbolic(rel) && rs.arity(rel) == 2) {
      int depth = 0;
      for (std::size_t i = 0; i + rel.size() <= t.size(); ++i) {
        if (t[i] == '(') ++depth;
        if (t[i] == ')') --depth;
        if (depth == 0 && t.compare(i, rel.size(), rel) == 0 &&
            (i == 0 || !Lex::sym_char(t[i - 1])) &&
            (i + rel.size() >= t.size() || !Lex::sym_char(t[i + rel.size()])))
          return {rel, {trim(t.substr(0, i)), trim(t.substr(i + rel.size()))}};
      }
    } else if (t.rfind(rel + "(", 0) == 0 && t.back() == ')') {
      std::string inner = t.substr(rel.size() + 1, t.size() - rel.size() - 2);
      std::vector<std::string> args;
      int depth = 0;
      std::string cur;
      for (char c : inner) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (c == ',' && depth == 0) {
          args.push_back(trim(cur));
          cur.clear();
        } else {
          cur += c;
        }
      }
      args.push_back(trim(cur));
      return {rel, args};
    }
  }
  throw parse_error("check line names no known relation", line, 1);
}

}  // namespace detail

inline RuleFile parse_rule_file(const std::string& text) {
  auto sig = std::make_shared<Signature>();
  std::string sort;
  RuleFile rf;
  bool sig_done = false;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  auto freeze = [&]() {
    if (!sig_done) {
      rf.rules = RuleSet(sig->sorts().empty() ? nullptr : sig, sort);
      sig_done = true;
    }
  };
  while (std::getline(in, raw)) {
    ++lineno;
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    detail::Lex lx{raw, lineno, 0};
    if (lx.eof()) continue;
    std::string kw = lx.next();
    if (kw == "sort" || kw == "ctor" || kw == "variables") {
      if (sig_done) lx.fail("declarations must precede relations and rules");
      if (kw == "sort") {
        std::string s = lx.next();
        sig->add_sort(s);
        if (sort.empty()) sort = s;
      } else if (kw == "variables") {
        sig->set_variable_sort(lx.next());
      } else {
        std::string name = lx.next();
        std::vector<std::string> args;
        if (lx.peek() == "(") {
          lx.next();
          if (lx.peek() != ")") {
            args.push_back(lx.next());
            while (lx.peek() == ",") {
              lx.next();
              args.push_back(lx.next());
            }
          }
          lx.expect(")");
        }
        std::string res = sort;
        if (lx.peek() == ":") {
          lx.next();
          res = lx.next();
        }
        if (res.empty()) lx.fail("ctor before any sort");
        sig->add_constructor(name, args, res);
      }
    } else if (kw == "relation") {
      freeze();
      std::string name = lx.next();
      std::string n = lx.next();
      if (n.empty() || !std::all_of(n.begin(), n.end(), ::isdigit)) lx.fail("expected relation arity");
      rf.rules.declare(name, std::stoul(n));
    } else if (kw == "rule") {
      freeze();
      PatternRule pr;
      pr.name = lx.next();
      lx.expect(":");
      auto [rel, concl] = detail::parse_judgment(lx, rf.rules);
      pr.relation = rel;
      pr.conclusion = concl;
      if (lx.peek() == "<=") {
        lx.next();
        do {
          auto [prel, pargs] = detail::parse_judgment(lx, rf.rules);
          std::vector<std::string> vs;
          for (const auto& p : pargs) vs.push_back(detail::var_of(p, lx));
          pr.premises.push_back({prel, vs});
        } while (lx.peek() == "," && (lx.next(), true));
      }
      if (lx.peek() == "if") {
        lx.next();
        do {
          SideCondition c;
          std::string a = lx.next();
          if (a == "var" && lx.peek() == "(") {
            lx.next();
            c.kind = SideCondition::IsVar;
            c.a = lx.next();
            lx.expect(")");
          } else {
            std::string op = lx.next();
            if (op == "=")
              c.kind = SideCondition::Equal;
            else if (op == "!=")
              c.kind = SideCondition::NotEqual;
            else
              lx.fail("unsupported side condition '" + op + "'");
            c.a = a;
            c.b = lx.next();
          }
          pr.conditions.push_back(c);
        } while (lx.peek() == "," && (lx.next(), true));
      }
      if (!lx.eof()) lx.fail("trailing input in rule");
      try {
        rf.rules.add_pattern_rule(pr);
      } catch (const rule_error& e) {
        throw parse_error(e.what(), lineno, 1);
      }
    } else if (kw == "check") {
      freeze();
      std::string rest = raw.substr(lx.pos);
      auto [rel, parts] = detail::split_check(rest, rf.rules, lineno);
      if (parts.size() != rf.rules.arity(rel)) throw parse_error("check arity mismatch", lineno, 1);
      Judgment j{rel, {}};
      for (const auto& p : parts) {
        try {
          j.args.push_back(parse_regular_coterm(p, rf.rules.sort(), rf.rules.signature()));
        } catch (const parse_error& e) {
          throw parse_error(std::string("in check term: ") + e.what(), lineno, e.column);
        }
      }
      rf.checks.push_back(std::move(j));
      rf.check_texts.push_back(rest.substr(rest.find_first_not_of(" \t")));
    } else {
      lx.fail("unknown declaration '" + kw + "'");
    }
  }
  freeze();
  return rf;
}

// ---- the example relation on T ::= V | A(T) | B(T,T) ------------------------

inline std::shared_ptr<const Signature> signature_T() {
  static auto sig = [] {
    auto s = std::make_shared<Signature>();
    s->add_sort("T");
    s->add_constructor("A", {"T"}, "T");
    s->add_constructor("B", {"T", "T"}, "T");
    s->set_variable_sort("T");
    return std::shared_ptr<const Signature>(s);
  }();
  return sig;
}

inline const char* arrow_T_source() {
  return "sort T\n"
         "ctor A(T)\n"
         "ctor B(T,T)\n"
         "variables T\n"
         "relation -> 2\n"
         "rule refl: x -> x if var(x)\n"
         "rule a: A(t) -> A(u) <= t -> u\n"
         "rule b: B(s,t) -> B(u,v) <= s -> u, t -> v\n"
         "rule ab: A(t) -> B(u,u) <= t -> u\n";
}

inline RuleSet arrow_T() { return parse_rule_file(arrow_T_source()).rules; }

inline Coterm parse_T(const std::string& text) { return parse_regular_coterm(text, "T", signature_T()); }

namespace detail {
struct Triple {
  bool copy = false;  // default clause: continue as t
  Coterm s, t, u;
  bool operator==(const Triple& o) const {
    return copy == o.copy && s.same_node(o.s) && t.same_node(o.t) && u.same_node(o.u);
  }
};
struct TripleHash {
  std::size_t operator()(const Triple& x) const {
    Coterm::Hash h;
    std::size_t r = x.copy ? 7 : 3;
    for (const Coterm* c : {&x.s, &x.t, &x.u})
      if (c->valid()) r = r * 1000003 ^ h(*c);
    return r;
  }
};
}  // namespace detail

inline Coterm skolem_join_T(const Coterm& s, const Coterm& t, const Coterm& u) {
  using detail::Triple;
  auto step = [](const Triple& x) -> std::pair<std::string, std::vector<Triple>> {
    if (x.copy) {
      std::vector<Triple> kids;
      for (auto& c : x.t.children()) kids.push_back(Triple{true, {}, c, {}});
      return {x.t.label(), kids};
    }
    const auto &s = x.s, &t = x.t, &u = x.u;
    auto is = [](const Coterm& c, const char* l) { return c.label() == l && c.arity() == (l[0] == 'A' ? 1u : 2u); };
    if (s.arity() == 0 && t.arity() == 0 && u.arity() == 0 && s.label() == t.label() && t.label() == u.label())
      return {s.label(), {}};
    if (is(s, "A")) {
      Coterm s1 = s.child(0);
      bool tA = is(t, "A"), tB = is(t, "B"), uA = is(u, "A"), uB = is(u, "B");
      if ((tA || tB) && (uA || uB)) {
        Triple k{false, s1, t.child(0), u.child(0)};
        if (tA && uA) return {"A", {k}};
        return {"B", {k, k}};
      }
    }
    if (is(s, "B") && is(t, "B") && is(u, "B"))
      return {"B", {Triple{false, s.child(0), t.child(0), u.child(0)}, Triple{false, s.child(1), t.child(1), u.child(1)}}};
    std::vector<Triple> kids;
    for (auto& c : t.children()) kids.push_back(Triple{true, {}, c, {}});
    return {t.label(), kids};
  };
  return Coterm::unfold<Triple, decltype(step), detail::TripleHash>("T", Triple{false, s, t, u}, step, signature_T());
}

// random regular term over T: `nodes` graph nodes, leaves drawn from `vars`
inline Coterm random_T_term(std::mt19937_64& rng, std::size_t nodes, const std::vector<std::string>& vars = {"x", "y"}) {
  struct N {
    std::string label;
    std::vector<std::size_t> kids;
  };
  auto g = std::make_shared<std::vector<N>>(nodes);
  std::uniform_int_distribution<std::size_t> pick(0, nodes - 1);
  for (auto& n : *g) {
    int k = static_cast<int>(rng() % 5);
    if (k == 0) {
      n.label = vars[rng() % vars.size()];
    } else if (k <= 2) {
      n.label = "A";
      n.kids = {pick(rng)};
    } else {
      n.label = "B";
      n.kids = {pick(rng), pick(rng)};
    }
  }
  auto step = [g](std::size_t i) { return std::make_pair((*g)[i].label, (*g)[i].kids); };
  return Coterm::unfold("T", std::size_t{0}, step, signature_T());
}

// a reduct of s: each node of s independently keeps A or turns A(t) into B(t',t')
inline Coterm random_T_reduct(std::mt19937_64& rng, const Coterm& s) {
  auto seed = std::make_shared<std::uint64_t>(rng());
  auto choice = std::make_shared<std::unordered_map<Coterm, bool, Coterm::Hash>>();
  auto step = [seed, choice](const Coterm& n) -> std::pair<std::string, std::vector<Coterm>> {
    if (n.label() == "A" && n.arity() == 1) {
      auto it = choice->find(n);
      if (it == choice->end()) {
        std::uint64_t h = *seed ^ (Coterm::Hash{}(n) * 0x9e3779b97f4a7c15ULL);
        h ^= h >> 29;
        it = choice->emplace(n, (h * 0xbf58476d1ce4e5b9ULL) >> 63).first;
      }
      if (it->second) return {"B", {n.child(0), n.child(0)}};
      return {"A", {n.child(0)}};
    }
    return {n.label(), n.children()};
  };
  return Coterm::unfold<Coterm, decltype(step), Coterm::Hash>("T", s, step, signature_T());
}

// ---- closure ordinal on the window {0..M, inf} ------------------------------

using Snapshot = std::set<ExtNat>;

struct WindowOperator {
  std::uint64_t window = 0;
  std::function<Snapshot(const Snapshot&)> apply;
};

struct ClosureTrace {
  std::vector<Snapshot> stages;  // stages[n] = R^n, n = 0..M+1
  Snapshot omega;
  std::vector<Snapshot> after;   // R^{omega+1}, ...
};

// R(n+1) <= R(n);  R(inf) <= R(n) for some n
inline WindowOperator omega_plus_one_operator(std::uint64_t M) {
  WindowOperator op;
  op.window = M;
  op.apply = [M](const Snapshot& r) {
    Snapshot out;
    bool some_nat = false;
    for (const auto& e : r) {
      if (e.is_inf()) continue;
      some_nat = true;
      if (e.value() + 1 <= M) out.insert(ExtNat(e.value() + 1));
    }
    if (some_nat) out.insert(ExtNat::inf());
    return out;
  };
  return op;
}

inline Snapshot full_window(std::uint64_t M) {
  Snapshot s;
  for (std::uint64_t i = 0; i <= M; ++i) s.insert(ExtNat(i));
  s.insert(ExtNat::inf());
  return s;
}

inline ClosureTrace closure_ordinal_trace(const WindowOperator& op, std::size_t extra_steps) {
  ClosureTrace tr;
  tr.stages.push_back(full_window(op.window));
  for (std::uint64_t n = 0; n <= op.window; ++n) tr.stages.push_back(op.apply(tr.stages.back()));
  tr.omega = tr.stages[1];
  for (std::size_t n = 2; n < tr.stages.size(); ++n) {
    Snapshot keep;
    std::set_intersection(tr.omega.begin(), tr.omega.end(), tr.stages[n].begin(), tr.stages[n].end(),
                          std::inserter(keep, keep.begin()));
    tr.omega = std::move(keep);
  }
  Snapshot cur = tr.omega;
  for (std::size_t k = 0; k < extra_steps; ++k) {
    cur = op.apply(cur);
    tr.after.push_back(cur);
  }
  return tr;
}

inline std::string snapshot_text(const Snapshot& s) {
  std::string out = "{";
  bool first = true;
  for (const auto& e : s) {
    if (!first) out += ", ";
    out += e.str();
    first = false;
  }
  return out + "}";
}

// ---- erasing function over T ::= A(T) | B(T) --------------------------------

inline std::shared_ptr<const Signature> signature_AB() {
  static auto sig = [] {
    auto s = std::make_shared<Signature>();
    s->add_sort("T");
    s->add_constructor("A", {"T"}, "T");
    s->add_constructor("B", {"T"}, "T");
    return std::shared_ptr<const Signature>(s);
  }();
  return sig;
}

// e(A t) = e(t), e(B t) = B(e(t)); undefined once only A's remain
inline Coterm erase_A(const Coterm& t, std::size_t chain_cap = 1000000) {
  auto step = [chain_cap](const Coterm& n) -> std::pair<std::string, std::vector<Coterm>> {
    Coterm cur = n;
    std::unordered_map<Coterm, bool, Coterm::Hash> seen;
    std::size_t steps = 0;
    while (cur.label() == "A") {
      if (!seen.emplace(cur, true).second) throw malformed_coterm("erase_A: infinite run of A without B");
      if (++steps > chain_cap) throw resource_error("erase_A: A-chain exceeds cap");
      cur = cur.child(0);
    }
    if (cur.label() != "B" || cur.arity() != 1) throw malformed_coterm("erase_A: unexpected label " + cur.label());
    return {"B", {cur.child(0)}};
  };
  return Coterm::unfold<Coterm, decltype(step), Coterm::Hash>("T", t, step, signature_AB());
}

// ---- epsilon-lambda terms ---------------------------------------------------
// finite trees: variable leaves, "@"(f, a), "\x"(body), "eps"(body)

namespace eps {

using Term = ApproxTree;

inline bool is_app(const Term& t) { return t.label == "@" && t.children.size() == 2; }
inline bool is_eps(const Term& t) { return t.label == "eps" && t.children.size() == 1; }
inline bool is_lam(const Term& t) { return t.label.size() > 1 && t.label[0] == '\\' && t.children.size() == 1; }
inline bool is_var(const Term& t) { return !t.bottom && t.children.empty(); }
inline std::string binder(const Term& t) { return t.label.substr(1); }
inline bool is_redex(const Term& t) { return is_app(t) && is_lam(t.children[0]); }

inline Term var(const std::string& x) { return Term::node(x); }
inline Term app(Term f, Term a) { return Term::node("@", {std::move(f), std::move(a)}); }
inline Term lam(const std::string& x, Term b) { return Term::node("\\" + x, {std::move(b)}); }
inline Term mark(Term b) { return Term::node("eps", {std::move(b)}); }

namespace detail {
struct P {
  std::string s;
  std::size_t i = 0;
  [[noreturn]] void fail(const std::string& m) const { throw parse_error(m, 1, i + 1); }
  void ws() {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  }
  bool lit(const std::string& t) {
    ws();
    if (s.compare(i, t.size(), t) == 0) {
      i += t.size();
      return true;
    }
    return false;
  }
  static bool idc(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\''; }
  std::string ident() {
    ws();
    std::size_t b = i;
    while (i < s.size() && idc(s[i])) ++i;
    if (b == i) fail("expected identifier");
    return s.substr(b, i - b);
  }
  bool atom_start() {
    ws();
    if (i >= s.size()) return false;
    char c = s[i];
    return c == '(' || idc(c) || s.compare(i, 2, "\xce\xb5") == 0;
  }
  Term term() {
    if (lit("\\") || lit("\xce\xbb")) {
      std::string x = ident();
      if (!lit(".")) fail("expected '.'");
      return lam(x, term());
    }
    Term t = atom();
    while (atom_start() || (ws(), s.compare(i, 1, "\\") == 0) || s.compare(i, 2, "\xce\xbb") == 0) {
      if (s.compare(i, 1, "\\") == 0 || s.compare(i, 2, "\xce\xbb") == 0) {
        t = app(std::move(t), term());
        break;
      }
      t = app(std::move(t), atom());
    }
    return t;
  }
  Term atom() {
    if (lit("(")) {
      Term t = term();
      if (!lit(")")) fail("expected ')'");
      return t;
    }
    if (lit("\xce\xb5")) return mark(atom());
    std::string x = ident();
    if (x == "eps") return mark(atom());
    return var(x);
  }
};
}  // namespace detail

inline Term parse(const std::string& text) {
  detail::P p{text};
  Term t = p.term();
  p.ws();
  if (p.i != text.size()) p.fail("trailing input");
  return t;
}

inline std::string print(const Term& t) {
  if (t.bottom) return "_|_";
  if (is_lam(t)) return "\\" + binder(t) + ". " + print(t.children[0]);
  if (is_eps(t)) return "eps(" + print(t.children[0]) + ")";
  if (is_app(t)) {
    const Term& f = t.children[0];
    const Term& a = t.children[1];
    std::string fs = is_lam(f) ? "(" + print(f) + ")" : print(f);
    std::string as = (is_app(a) || is_lam(a)) ? "(" + print(a) + ")" : print(a);
    return fs + " " + as;
  }
  return t.label;
}

inline Term subst(const Term& t, const std::string& x, const Term& r) {
  if (is_var(t)) return t.label == x ? r : t;
  if (is_lam(t) && binder(t) == x) return t;
  Term out = t;
  for (auto& c : out.children) c = subst(c, x, r);
  return out;
}

inline void redexes(const Term& t, Position& at, std::vector<Position>& out) {
  if (is_redex(t)) out.push_back(at);
  for (std::size_t i = 0; i < t.children.size(); ++i) {
    at.push_back(i);
    redexes(t.children[i], at, out);
    at.pop_back();
  }
}
inline std::vector<Position> redexes(const Term& t) {
  std::vector<Position> out;
  Position at;
  redexes(t, at, out);
  return out;
}

// complete development of the marked redexes
inline Term develop(const Term& t, const std::set<Position>& marks, Position& at) {
  if (is_redex(t) && marks.count(at)) {
    at.insert(at.end(), {0, 0});
    Term body = develop(t.children[0].children[0], marks, at);
    at.pop_back();
    at.back() = 1;
    Term arg = develop(t.children[1], marks, at);
    at.pop_back();
    return mark(subst(body, binder(t.children[0]), arg));
  }
  Term out = t;
  for (std::size_t i = 0; i < out.children.size(); ++i) {
    at.push_back(i);
    out.children[i] = develop(t.children[i], marks, at);
    at.pop_back();
  }
  return out;
}
inline Term develop(const Term& t, const std::set<Position>& marks) {
  Position at;
  return develop(t, marks, at);
}

inline Coterm to_coterm(const Term& t) { return coterm_from_tree(t, "L"); }

inline Term from_coterm(const Coterm& c, std::size_t node_cap = 100000) {
  std::size_t n = 0;
  std::function<Term(const Coterm&)> go = [&](const Coterm& x) {
    if (++n > node_cap) throw resource_error("term too large or not finite");
    Term t = Term::node(x.label());
    for (auto& k : x.children()) t.children.push_back(go(k));
    return t;
  };
  return go(c);
}

inline std::size_t size(const Term& t) {
  std::size_t n = 1;
  for (const auto& c : t.children) n += size(c);
  return n;
}

namespace detail {
inline void subterms(const Term& t, Position& at, std::map<std::string, std::pair<Term, std::vector<Position>>>& out) {
  auto& slot = out[to_text(t)];
  slot.first = t;
  slot.second.push_back(at);
  for (std::size_t i = 0; i < t.children.size(); ++i) {
    at.push_back(i);
    subterms(t.children[i], at, out);
    at.pop_back();
  }
}
inline void replace_at(Term& t, const Position& p, std::size_t k, const Term& r) {
  if (k == p.size()) {
    t = r;
    return;
  }
  replace_at(t.children[p[k]], p, k + 1, r);
}
}  // namespace detail

// all (body', arg') with body'[arg'/x] == u; arg' = fallback covers bodies without x
inline std::vector<std::pair<Term, Term>> decompositions(const Term& u, const std::string& x, const Term& fallback,
                                                         std::size_t cap = 4096) {
  std::vector<std::pair<Term, Term>> out;
  std::set<std::pair<std::string, std::string>> seen;
  auto push = [&](Term b, Term a) {
    if (!(subst(b, x, a) == u)) return;
    if (seen.insert({to_text(b), to_text(a)}).second) out.emplace_back(std::move(b), std::move(a));
  };
  push(u, fallback);
  std::map<std::string, std::pair<Term, std::vector<Position>>> subs;
  Position at;
  detail::subterms(u, at, subs);
  std::size_t budget = 0;
  for (const auto& [txt, entry] : subs) {
    const auto& [v, occ] = entry;
    if (occ.size() > 12) throw resource_error("too many occurrences to decompose");
    std::size_t total = std::size_t{1} << occ.size();
    budget += total;
    if (budget > cap) throw resource_error("decomposition search exceeds cap");
    for (std::size_t mask = 1; mask < total; ++mask) {
      Term b = u;
      for (std::size_t i = 0; i < occ.size(); ++i)
        if (mask >> i & 1) detail::replace_at(b, occ[i], 0, var(x));
      push(std::move(b), v);
    }
  }
  return out;
}

inline std::string key(const Coterm& c) { return to_text(from_coterm(c)); }

// s ->1 t
inline RuleSet to1() {
  RuleSet rs(nullptr, "L");
  rs.declare("->1", 2);
  rs.set_key(key);
  auto J = [](Coterm a, Coterm b) { return Judgment{"->1", {std::move(a), std::move(b)}}; };
  auto isv = [](const Coterm& c) { return c.arity() == 0; };
  auto isl = [](const Coterm& c) { return c.arity() == 1 && c.label().size() > 1 && c.label()[0] == '\\'; };
  auto isa = [](const Coterm& c) { return c.arity() == 2 && c.label() == "@"; };
  auto ise = [](const Coterm& c) { return c.arity() == 1 && c.label() == "eps"; };
  rs.add_rule("->1", Rule{"var", [=](const std::vector<Coterm>& a) -> std::vector<Alternative> {
                            if (isv(a[0]) && isv(a[1]) && a[0].label() == a[1].label()) return {{}};
                            return {};
                          }});
  rs.add_rule("->1", Rule{"app", [=](const std::vector<Coterm>& a) -> std::vector<Alternative> {
                            if (isa(a[0]) && isa(a[1]))
                              return {{J(a[0].child(0), a[1].child(0)), J(a[0].child(1), a[1].child(1))}};
                            return {};
                          }});
  rs.add_rule("->1", Rule{"lam", [=](const std::vector<Coterm>& a) -> std::vector<Alternative> {
                            if (isl(a[0]) && isl(a[1]) && a[0].label() == a[1].label())
                              return {{J(a[0].child(0), a[1].child(0))}};
                            return {};
                          }});
  rs.add_rule("->1", Rule{"beta",
                          [=](const std::vector<Coterm>& a) -> std::vector<Alternative> {
                            if (!(isa(a[0]) && isl(a[0].child(0)) && ise(a[1]))) return {};
                            Coterm body = a[0].child(0).child(0);
                            Coterm arg = a[0].child(1);
                            std::string x = a[0].child(0).label().substr(1);
                            std::vector<Alternative> alts;
                            for (auto& [b, t] : decompositions(from_coterm(a[1].child(0)), x, from_coterm(arg)))
                              alts.push_back({J(body, to_coterm(b)), J(arg, to_coterm(t))});
                            return alts;
                          },
                          2});
  rs.add_rule("->1", Rule{"eps", [=](const std::vector<Coterm>& a) -> std::vector<Alternative> {
                            if (ise(a[0]) && ise(a[1])) return {{J(a[0].child(0), a[1].child(0))}};
                            return {};
                          }});
  return rs;
}

inline bool step1_at(const RuleSet& rs, const Term& s, const Term& t, std::size_t stage) {
  return rs.holds(Judgment{"->1", {to_coterm(s), to_coterm(t)}}, stage);
}

// marked redexes of a derivation s ->1 t, if any
inline std::optional<std::set<Position>> marks_of(const Term& s, const Term& t, Position& at) {
  auto sub = [&](std::size_t i, const Term& a, const Term& b) {
    at.push_back(i);
    auto r = marks_of(a, b, at);
    at.pop_back();
    return r;
  };
  auto join = [](std::set<Position>& acc, const std::optional<std::set<Position>>& m) {
    if (m) acc.insert(m->begin(), m->end());
    return m.has_value();
  };
  if (is_var(s)) {
    if (is_var(t) && s.label == t.label) return std::set<Position>{};
    return std::nullopt;
  }
  if (is_redex(s) && is_eps(t)) {
    const Term& body = s.children[0].children[0];
    std::string x = binder(s.children[0]);
    for (auto& [b, a] : decompositions(t.children[0], x, s.children[1])) {
      std::set<Position> acc{at};
      at.push_back(0);
      auto m1 = sub(0, body, b);
      at.pop_back();
      if (!join(acc, m1)) continue;
      if (!join(acc, sub(1, s.children[1], a))) continue;
      return acc;
    }
    return std::nullopt;
  }
  if (s.label != t.label || s.children.size() != t.children.size()) return std::nullopt;
  std::set<Position> acc;
  for (std::size_t i = 0; i < s.children.size(); ++i)
    if (!join(acc, sub(i, s.children[i], t.children[i]))) return std::nullopt;
  return acc;
}
inline std::optional<std::set<Position>> marks_of(const Term& s, const Term& t) {
  Position at;
  return marks_of(s, t, at);
}

// s' with t ->1 s' and t2 ->1 s'
inline Term par_join(const Term& s, const Term& t, const Term& t2) {
  auto m1 = marks_of(s, t);
  if (!m1) throw contract_error("first term is not a ->1 reduct of s");
  auto m2 = marks_of(s, t2);
  if (!m2) throw contract_error("second term is not a ->1 reduct of s");
  m1->insert(m2->begin(), m2->end());
  return develop(s, *m1);
}

// random closed-ish term: binders are fresh, free variables from {a, b, c}
inline Term random_term(std::mt19937_64& rng, std::size_t budget, bool marks = false, const std::string& prefix = "x") {
  std::size_t fresh = 0;
  std::vector<std::string> scope;
  std::function<Term(std::size_t)> go = [&](std::size_t n) -> Term {
    if (n <= 1) {
      std::size_t k = rng() % (3 + scope.size());
      return var(k < 3 ? std::string(1, static_cast<char>('a' + k)) : scope[k - 3]);
    }
    int kind = static_cast<int>(rng() % (marks ? 5 : 4));
    if (kind == 0 || kind == 1) {
      std::size_t m = n - 1;
      std::size_t l = 1 + rng() % (m > 1 ? m - 1 : 1);
      if (kind == 0 && m >= 3) {
        std::string x = prefix + std::to_string(++fresh);
        scope.push_back(x);
        Term body = go(std::max<std::size_t>(1, l - 1));
        scope.pop_back();
        return app(lam(x, std::move(body)), go(std::max<std::size_t>(1, m - l)));
      }
      return app(go(l), go(std::max<std::size_t>(1, m - l)));
    }
    if (kind == 4) return mark(go(n - 1));
    std::string x = prefix + std::to_string(++fresh);
    scope.push_back(x);
    Term body = go(n - 1);
    scope.pop_back();
    return lam(x, std::move(body));
  };
  return go(budget);
}

inline std::set<Position> random_marks(std::mt19937_64& rng, const Term& t) {
  std::set<Position> m;
  for (auto& p : redexes(t))
    if (rng() & 1) m.insert(p);
  return m;
}

}  // namespace eps

}  // namespace coind::rel
