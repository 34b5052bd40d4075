#pragma once
// Infinitary lambda calculus over regular terms: nameless kernel with rec binders,
// alpha-equivalence on named terms, head reduction, Bohm trees.

#include <coind/coterm.hpp>

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace coind::ilc {

struct invalid_step : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// ---- named terms ------------------------------------------------------------

struct NamedTerm {
  enum Kind { Var, Const, Bot, App, Lam, Rec, Back } kind = Bot;
  std::string name;
  std::vector<NamedTerm> kids;

  static NamedTerm var(std::string x) { return {Var, std::move(x), {}}; }
  static NamedTerm cnst(std::string c) { return {Const, std::move(c), {}}; }
  static NamedTerm bot() { return {Bot, "", {}}; }
  static NamedTerm app(NamedTerm f, NamedTerm a) { return {App, "", {std::move(f), std::move(a)}}; }
  static NamedTerm lam(std::string x, NamedTerm b) { return {Lam, std::move(x), {std::move(b)}}; }
  static NamedTerm rec(std::string X, NamedTerm b) { return {Rec, std::move(X), {std::move(b)}}; }
  static NamedTerm back(std::string X) { return {Back, std::move(X), {}}; }
  bool operator==(const NamedTerm&) const = default;
};

namespace detail {

struct Parser {
  std::string s;
  std::size_t i = 0;
  std::size_t line = 1, col0 = 0;
  std::vector<std::pair<std::string, bool>> scope = {};  // name, is_rec

  [[noreturn]] void fail(const std::string& m) const { throw parse_error(m, line, i - col0 + 1); }
  void ws() {
    while (i < s.size()) {
      if (s[i] == '\n') {
        ++line;
        col0 = i + 1;
      }
      if (!std::isspace(static_cast<unsigned char>(s[i]))) break;
      ++i;
    }
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
  bool at_lambda() {
    ws();
    return s.compare(i, 1, "\\") == 0 || s.compare(i, 2, "\xce\xbb") == 0;
  }
  bool at_rec() {
    ws();
    return s.compare(i, 3, "rec") == 0 && (i + 3 >= s.size() || !idc(s[i + 3]));
  }
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
    if (at_rec()) return false;
    return c == '(' || c == '#' || idc(c) || s.compare(i, 3, "_|_") == 0;
  }
  NamedTerm term() {
    if (lit("\\") || lit("\xce\xbb")) {
      std::vector<std::string> xs;
      do {
        std::string x = ident();
        if (!std::islower(static_cast<unsigned char>(x[0])) && x[0] != '_') fail("bound variables start lowercase: " + x);
        xs.push_back(x);
        ws();
      } while (i < s.size() && s[i] != '.');
      if (!lit(".")) fail("expected '.'");
      for (auto& x : xs) scope.push_back({x, false});
      NamedTerm b = term();
      for (std::size_t k = 0; k < xs.size(); ++k) scope.pop_back();
      for (auto it = xs.rbegin(); it != xs.rend(); ++it) b = NamedTerm::lam(*it, std::move(b));
      return b;
    }
    if (at_rec()) {
      i += 3;
      std::string X = ident();
      if (!std::isupper(static_cast<unsigned char>(X[0]))) fail("rec binders start uppercase: " + X);
      if (!lit(".")) fail("expected '.'");
      scope.push_back({X, true});
      NamedTerm b = term();
      scope.pop_back();
      return NamedTerm::rec(X, std::move(b));
    }
    NamedTerm t = atom();
    while (true) {
      if (at_lambda() || at_rec()) {
        t = NamedTerm::app(std::move(t), term());
        break;
      }
      if (!atom_start()) break;
      t = NamedTerm::app(std::move(t), atom());
    }
    return t;
  }
  NamedTerm atom() {
    if (lit("(")) {
      NamedTerm t = term();
      if (!lit(")")) fail("expected ')'");
      return t;
    }
    if (lit("_|_")) return NamedTerm::bot();
    if (lit("#")) return NamedTerm::cnst(ident());
    std::string x = ident();
    if (std::isupper(static_cast<unsigned char>(x[0]))) {
      for (auto it = scope.rbegin(); it != scope.rend(); ++it)
        if (it->first == x && it->second) return NamedTerm::back(x);
      fail("unbound reference " + x);
    }
    if (std::isdigit(static_cast<unsigned char>(x[0]))) fail("unexpected number " + x);
    return NamedTerm::var(x);
  }
};

}  // namespace detail

inline NamedTerm parse_term(const std::string& text) {
  detail::Parser p{text};
  p.ws();
  if (p.i >= text.size()) p.fail("empty term");
  NamedTerm t = p.term();
  p.ws();
  if (p.i != text.size()) p.fail("trailing input");
  return t;
}

inline std::string print(const NamedTerm& t) {
  switch (t.kind) {
    case NamedTerm::Var:
    case NamedTerm::Back:
      return t.name;
    case NamedTerm::Const:
      return "#" + t.name;
    case NamedTerm::Bot:
      return "_|_";
    case NamedTerm::Lam: {
      std::string out = "\\" + t.name;
      const NamedTerm* b = &t.kids[0];
      while (b->kind == NamedTerm::Lam) {
        out += " " + b->name;
        b = &b->kids[0];
      }
      return out + ". " + print(*b);
    }
    case NamedTerm::Rec:
      return "rec " + t.name + ". " + print(t.kids[0]);
    case NamedTerm::App: {
      const NamedTerm& f = t.kids[0];
      const NamedTerm& a = t.kids[1];
      bool fb = f.kind == NamedTerm::Lam || f.kind == NamedTerm::Rec;
      bool ab = a.kind == NamedTerm::Lam || a.kind == NamedTerm::Rec || a.kind == NamedTerm::App;
      return (fb ? "(" + print(f) + ")" : print(f)) + " " + (ab ? "(" + print(a) + ")" : print(a));
    }
  }
  return "";
}

inline void free_vars(const NamedTerm& t, std::set<std::string>& bound, std::set<std::string>& out) {
  switch (t.kind) {
    case NamedTerm::Var:
      if (!bound.count(t.name)) out.insert(t.name);
      return;
    case NamedTerm::Lam: {
      bool fresh = bound.insert(t.name).second;
      free_vars(t.kids[0], bound, out);
      if (fresh) bound.erase(t.name);
      return;
    }
    default:
      for (const auto& k : t.kids) free_vars(k, bound, out);
  }
}
inline std::set<std::string> free_vars(const NamedTerm& t) {
  std::set<std::string> b, out;
  free_vars(t, b, out);
  return out;
}

// least variable in x, y, z, w, u, v, x1, y1, ... outside `used`
inline std::string fresh(const std::set<std::string>& used) {
  static const char* base[] = {"x", "y", "z", "w", "u", "v"};
  for (std::size_t n = 0;; ++n)
    for (const char* b : base) {
      std::string c = n == 0 ? std::string(b) : std::string(b) + std::to_string(n);
      if (!used.count(c)) return c;
    }
}

inline NamedTerm rename_free(const NamedTerm& t, const std::string& from, const std::string& to) {
  switch (t.kind) {
    case NamedTerm::Var:
      return t.name == from ? NamedTerm::var(to) : t;
    case NamedTerm::Lam:
      if (t.name == from) return t;
      return NamedTerm::lam(t.name, rename_free(t.kids[0], from, to));
    default: {
      NamedTerm out = t;
      for (auto& k : out.kids) k = rename_free(k, from, to);
      return out;
    }
  }
}

inline bool back_free(const NamedTerm& t, const std::string& X) {
  if (t.kind == NamedTerm::Back) return t.name == X;
  if (t.kind == NamedTerm::Rec && t.name == X) return false;
  for (const auto& k : t.kids)
    if (back_free(k, X)) return true;
  return false;
}

// e[r/X], renaming binders that would capture free variables of r
inline NamedTerm subst_back(const NamedTerm& e, const std::string& X, const NamedTerm& r,
                            const std::set<std::string>& fv_r) {
  switch (e.kind) {
    case NamedTerm::Back:
      return e.name == X ? r : e;
    case NamedTerm::Rec:
      if (e.name == X) return e;
      return NamedTerm::rec(e.name, subst_back(e.kids[0], X, r, fv_r));
    case NamedTerm::Lam: {
      if (fv_r.count(e.name) && back_free(e.kids[0], X)) {
        std::set<std::string> used = fv_r;
        auto fb = free_vars(e.kids[0]);
        used.insert(fb.begin(), fb.end());
        used.insert(e.name);
        std::string w = fresh(used);
        return NamedTerm::lam(w, subst_back(rename_free(e.kids[0], e.name, w), X, r, fv_r));
      }
      return NamedTerm::lam(e.name, subst_back(e.kids[0], X, r, fv_r));
    }
    default: {
      NamedTerm out = e;
      for (auto& k : out.kids) k = subst_back(k, X, r, fv_r);
      return out;
    }
  }
}

inline NamedTerm expose(NamedTerm t, std::size_t cap = 100000) {
  std::size_t n = 0;
  while (t.kind == NamedTerm::Rec) {
    if (++n > cap) throw malformed_coterm("unguarded rec binder");
    NamedTerm body = t.kids[0];
    std::string X = t.name;
    auto fv = free_vars(t);
    t = subst_back(body, X, t, fv);
  }
  return t;
}

// ---- variable relations -----------------------------------------------------

class VarRel {
 public:
  static VarRel identity() {
    VarRel r;
    r.id_ = true;
    return r;
  }
  static VarRel of(std::set<std::pair<std::string, std::string>> pairs) {
    VarRel r;
    r.extra_ = std::move(pairs);
    return r;
  }
  bool contains(const std::string& a, const std::string& b) const {
    if (extra_.count({a, b})) return true;
    return id_ && a == b && !left_.count(a) && !right_.count(b);
  }
  // R<x,y>
  VarRel update(const std::string& x, const std::string& y) const {
    VarRel r = *this;
    for (auto it = r.extra_.begin(); it != r.extra_.end();) {
      if (it->first == x || it->second == y)
        it = r.extra_.erase(it);
      else
        ++it;
    }
    r.left_.insert(x);
    r.right_.insert(y);
    r.extra_.insert({x, y});
    return r;
  }
  VarRel inverse() const {
    VarRel r;
    r.id_ = id_;
    r.left_ = right_;
    r.right_ = left_;
    for (const auto& [a, b] : extra_) r.extra_.insert({b, a});
    return r;
  }
  // R;S for finite relations
  VarRel compose(const VarRel& s) const {
    if (id_ || s.id_) throw std::invalid_argument("compose: only finite relations");
    VarRel r;
    for (const auto& [a, b] : extra_)
      for (const auto& [c, d] : s.extra_)
        if (b == c) r.extra_.insert({a, d});
    return r;
  }
  bool finite() const { return !id_; }
  const std::set<std::pair<std::string, std::string>>& pairs() const { return extra_; }

 private:
  bool id_ = false;
  std::set<std::string> left_, right_;
  std::set<std::pair<std::string, std::string>> extra_;
};

// =_alpha^R on the depth-d approximants
inline bool alpha_eq_to_depth(const NamedTerm& t0, const NamedTerm& s0, const VarRel& R, std::size_t d) {
  if (d == 0) return true;
  NamedTerm t = expose(t0), s = expose(s0);
  if (t.kind != s.kind) return false;
  switch (t.kind) {
    case NamedTerm::Const:
      return t.name == s.name;
    case NamedTerm::Bot:
      return true;
    case NamedTerm::Var:
      return R.contains(t.name, s.name);
    case NamedTerm::App:
      return alpha_eq_to_depth(t.kids[0], s.kids[0], R, d - 1) && alpha_eq_to_depth(t.kids[1], s.kids[1], R, d - 1);
    case NamedTerm::Lam:
      return alpha_eq_to_depth(t.kids[0], s.kids[0], R.update(t.name, s.name), d - 1);
    default:
      throw malformed_coterm("dangling rec reference");
  }
}

inline bool alpha_eq_to_depth(const NamedTerm& t, const NamedTerm& s, std::size_t d) {
  return alpha_eq_to_depth(t, s, VarRel::identity(), d);
}

// ---- kernel terms -----------------------------------------------------------

struct LNode;
using LTerm = std::shared_ptr<const LNode>;

struct LNode {
  enum Kind { Var, Free, Const, Bot, App, Lam, Rec, RVar } kind = Bot;
  std::size_t index = 0;  // Var: lambda index, RVar: rec index
  std::string name;       // Free/Const name, Lam/Rec hint
  LTerm a, b;
  std::size_t size = 1;
};

inline LTerm mk(LNode n) {
  n.size = 1 + (n.a ? n.a->size : 0) + (n.b ? n.b->size : 0);
  return std::make_shared<const LNode>(std::move(n));
}
inline LTerm mk_var(std::size_t i) { return mk({LNode::Var, i, "", nullptr, nullptr}); }
inline LTerm mk_free(const std::string& x) { return mk({LNode::Free, 0, x, nullptr, nullptr}); }
inline LTerm mk_const(const std::string& c) { return mk({LNode::Const, 0, c, nullptr, nullptr}); }
inline LTerm mk_bot() { return mk({LNode::Bot, 0, "", nullptr, nullptr}); }
inline LTerm mk_app(LTerm f, LTerm x) { return mk({LNode::App, 0, "", std::move(f), std::move(x)}); }
inline LTerm mk_lam(const std::string& hint, LTerm b) { return mk({LNode::Lam, 0, hint, std::move(b), nullptr}); }
inline LTerm mk_rec(const std::string& hint, LTerm b) { return mk({LNode::Rec, 0, hint, std::move(b), nullptr}); }
inline LTerm mk_rvar(std::size_t j) { return mk({LNode::RVar, j, "", nullptr, nullptr}); }

inline bool rvar_free(const LTerm& t, std::size_t j) {
  switch (t->kind) {
    case LNode::RVar:
      return t->index == j;
    case LNode::Rec:
      return rvar_free(t->a, j + 1);
    case LNode::App:
      return rvar_free(t->a, j) || rvar_free(t->b, j);
    case LNode::Lam:
      return rvar_free(t->a, j);
    default:
      return false;
  }
}

// drop a rec binder that its body never mentions
inline LTerm lower_rvars(const LTerm& t, std::size_t j) {
  switch (t->kind) {
    case LNode::RVar:
      return t->index > j ? mk_rvar(t->index - 1) : t;
    case LNode::Rec:
      return mk_rec(t->name, lower_rvars(t->a, j + 1));
    case LNode::App:
      return mk_app(lower_rvars(t->a, j), lower_rvars(t->b, j));
    case LNode::Lam:
      return mk_lam(t->name, lower_rvars(t->a, j));
    default:
      return t;
  }
}

namespace detail {

struct KEnv {
  std::vector<std::pair<std::string, bool>> names;  // innermost last; bool = rec
};

inline LTerm to_kernel(const NamedTerm& t, KEnv& env) {
  switch (t.kind) {
    case NamedTerm::Var:
    case NamedTerm::Back: {
      std::size_t lam = 0, rec = 0;
      for (auto it = env.names.rbegin(); it != env.names.rend(); ++it) {
        if (it->first == t.name) {
          if (it->second != (t.kind == NamedTerm::Back)) break;
          return it->second ? mk_rvar(rec) : mk_var(lam);
        }
        (it->second ? rec : lam)++;
      }
      if (t.kind == NamedTerm::Back) throw parse_error("unbound reference " + t.name, 1, 1);
      return mk_free(t.name);
    }
    case NamedTerm::Const:
      return mk_const(t.name);
    case NamedTerm::Bot:
      return mk_bot();
    case NamedTerm::App:
      return mk_app(to_kernel(t.kids[0], env), to_kernel(t.kids[1], env));
    case NamedTerm::Lam: {
      env.names.push_back({t.name, false});
      LTerm b = to_kernel(t.kids[0], env);
      env.names.pop_back();
      return mk_lam(t.name, b);
    }
    case NamedTerm::Rec: {
      env.names.push_back({t.name, true});
      LTerm b = to_kernel(t.kids[0], env);
      env.names.pop_back();
      if (!rvar_free(b, 0)) return lower_rvars(b, 0);
      return mk_rec(t.name, b);
    }
  }
  return mk_bot();
}

// every rec reference must sit below an App or Lam of its own binder's body
inline void check_guarded(const LTerm& t, std::vector<bool>& guarded) {
  switch (t->kind) {
    case LNode::RVar: {
      std::size_t k = guarded.size() - 1 - t->index;
      if (!guarded[k]) throw malformed_coterm("unguarded rec reference");
      return;
    }
    case LNode::Rec:
      guarded.push_back(false);
      check_guarded(t->a, guarded);
      guarded.pop_back();
      return;
    case LNode::App:
    case LNode::Lam: {
      std::vector<bool> g(guarded.size(), true);
      check_guarded(t->a, g);
      if (t->b) check_guarded(t->b, g);
      return;
    }
    default:
      return;
  }
}

}  // namespace detail

inline LTerm to_kernel(const NamedTerm& t) {
  detail::KEnv env;
  LTerm k = detail::to_kernel(t, env);
  std::vector<bool> g;
  detail::check_guarded(k, g);
  return k;
}

inline LTerm parse_kernel(const std::string& text) { return to_kernel(parse_term(text)); }

inline LTerm shift(const LTerm& t, std::size_t d, std::size_t cutoff = 0) {
  if (d == 0) return t;
  switch (t->kind) {
    case LNode::Var:
      return t->index >= cutoff ? mk_var(t->index + d) : t;
    case LNode::App:
      return mk_app(shift(t->a, d, cutoff), shift(t->b, d, cutoff));
    case LNode::Lam:
      return mk_lam(t->name, shift(t->a, d, cutoff + 1));
    case LNode::Rec:
      return mk_rec(t->name, shift(t->a, d, cutoff));
    default:
      return t;
  }
}

// body[u/j] with the binder for j removed
inline LTerm subst_index(const LTerm& t, std::size_t j, const LTerm& u) {
  switch (t->kind) {
    case LNode::Var:
      if (t->index == j) return shift(u, j);
      if (t->index > j) return mk_var(t->index - 1);
      return t;
    case LNode::App:
      return mk_app(subst_index(t->a, j, u), subst_index(t->b, j, u));
    case LNode::Lam:
      return mk_lam(t->name, subst_index(t->a, j + 1, u));
    case LNode::Rec:
      return mk_rec(t->name, subst_index(t->a, j, u));
    default:
      return t;
  }
}

namespace detail {
inline LTerm unfold_into(const LTerm& t, std::size_t rdepth, std::size_t ldepth, const LTerm& r) {
  switch (t->kind) {
    case LNode::RVar:
      if (t->index == rdepth) return shift(r, ldepth);
      if (t->index > rdepth) return mk_rvar(t->index - 1);
      return t;
    case LNode::App:
      return mk_app(unfold_into(t->a, rdepth, ldepth, r), unfold_into(t->b, rdepth, ldepth, r));
    case LNode::Lam:
      return mk_lam(t->name, unfold_into(t->a, rdepth, ldepth + 1, r));
    case LNode::Rec:
      return mk_rec(t->name, unfold_into(t->a, rdepth + 1, ldepth, r));
    default:
      return t;
  }
}
}  // namespace detail

inline LTerm unfold(const LTerm& rec) { return detail::unfold_into(rec->a, 0, 0, rec); }

inline LTerm expose(LTerm t) {
  while (t->kind == LNode::Rec) t = unfold(t);
  return t;
}

// replace free variable x by u (u has no dangling indices)
inline LTerm substitute(const LTerm& t, const std::string& x, const LTerm& u) {
  switch (t->kind) {
    case LNode::Free:
      return t->name == x ? u : t;
    case LNode::App:
      return mk_app(substitute(t->a, x, u), substitute(t->b, x, u));
    case LNode::Lam:
      return mk_lam(t->name, substitute(t->a, x, u));
    case LNode::Rec:
      return mk_rec(t->name, substitute(t->a, x, u));
    default:
      return t;
  }
}

inline void encode(const LTerm& t, std::string& out) {
  switch (t->kind) {
    case LNode::Var:
      out += std::to_string(t->index);
      return;
    case LNode::Free:
      out += t->name;
      return;
    case LNode::Const:
      out += '#' + t->name;
      return;
    case LNode::Bot:
      out += "_|_";
      return;
    case LNode::RVar:
      out += '@' + std::to_string(t->index);
      return;
    case LNode::App:
      out += '(';
      encode(t->a, out);
      out += ' ';
      encode(t->b, out);
      out += ')';
      return;
    case LNode::Lam:
      out += "\\.";
      encode(t->a, out);
      return;
    case LNode::Rec:
      out += "rec.";
      encode(t->a, out);
      return;
  }
}
// canonical nameless encoding
inline std::string encode(const LTerm& t) {
  std::string s;
  encode(t, s);
  return s;
}

inline void free_names(const LTerm& t, std::set<std::string>& out) {
  if (t->kind == LNode::Free) out.insert(t->name);
  if (t->a) free_names(t->a, out);
  if (t->b) free_names(t->b, out);
}

namespace detail {
inline NamedTerm to_named(const LTerm& t, std::vector<std::string>& lams, std::vector<std::string>& recs,
                          std::set<std::string>& used) {
  switch (t->kind) {
    case LNode::Var:
      if (t->index >= lams.size()) return NamedTerm::var("_" + std::to_string(t->index - lams.size()));
      return NamedTerm::var(lams[lams.size() - 1 - t->index]);
    case LNode::Free:
      return NamedTerm::var(t->name);
    case LNode::Const:
      return NamedTerm::cnst(t->name);
    case LNode::Bot:
      return NamedTerm::bot();
    case LNode::RVar:
      return NamedTerm::back(recs[recs.size() - 1 - t->index]);
    case LNode::App:
      return NamedTerm::app(to_named(t->a, lams, recs, used), to_named(t->b, lams, recs, used));
    case LNode::Lam: {
      std::string x = t->name.empty() ? "x" : t->name;
      if (used.count(x)) x = fresh(used);
      used.insert(x);
      lams.push_back(x);
      NamedTerm b = to_named(t->a, lams, recs, used);
      lams.pop_back();
      used.erase(x);
      return NamedTerm::lam(x, std::move(b));
    }
    case LNode::Rec: {
      std::string X = t->name.empty() ? "X" : t->name;
      std::string base = X;
      for (int n = 1; std::find(recs.begin(), recs.end(), X) != recs.end(); ++n) X = base + std::to_string(n);
      recs.push_back(X);
      NamedTerm b = to_named(t->a, lams, recs, used);
      recs.pop_back();
      return NamedTerm::rec(X, std::move(b));
    }
  }
  return NamedTerm::bot();
}
}  // namespace detail

inline NamedTerm to_named(const LTerm& t) {
  std::vector<std::string> lams, recs;
  std::set<std::string> used;
  free_names(t, used);
  return detail::to_named(t, lams, recs, used);
}

inline std::string print(const LTerm& t) { return print(to_named(t)); }

// lazily unfolded tree view; labels "@", "\", de Bruijn "%i", names, "#c", "_|_"
inline Coterm to_coterm(const LTerm& t) {
  struct Seed {
    std::string key;
    LTerm t;
    bool operator==(const Seed& o) const { return key == o.key; }
  };
  struct H {
    std::size_t operator()(const Seed& s) const { return std::hash<std::string>()(s.key); }
  };
  auto mkseed = [](const LTerm& x) { return Seed{encode(x), x}; };
  auto step = [mkseed](const Seed& s) -> std::pair<std::string, std::vector<Seed>> {
    LTerm e = expose(s.t);
    switch (e->kind) {
      case LNode::Var:
        return {"%" + std::to_string(e->index), {}};
      case LNode::Free:
        return {e->name, {}};
      case LNode::Const:
        return {"#" + e->name, {}};
      case LNode::Bot:
        return {"_|_", {}};
      case LNode::App:
        return {"@", {mkseed(e->a), mkseed(e->b)}};
      case LNode::Lam:
        return {"\\", {mkseed(e->a)}};
      default:
        throw malformed_coterm("dangling rec reference");
    }
  };
  return Coterm::unfold<Seed, decltype(step), H>("L", mkseed(t), step);
}

// ---- positions and steps ----------------------------------------------------

inline std::vector<LTerm> children(const LTerm& t) {
  LTerm e = expose(t);
  if (e->kind == LNode::App) return {e->a, e->b};
  if (e->kind == LNode::Lam) return {e->a};
  return {};
}

inline LTerm subterm_at(const LTerm& t, const Position& p) {
  LTerm cur = t;
  for (std::size_t i : p) {
    auto ks = children(cur);
    if (i >= ks.size()) throw invalid_step("position " + to_string(p) + " does not exist");
    cur = ks[i];
  }
  return cur;
}

inline LTerm replace_at(const LTerm& t, const Position& p, std::size_t k, const LTerm& u) {
  if (k == p.size()) return u;
  LTerm e = expose(t);
  if (e->kind == LNode::App && p[k] <= 1)
    return p[k] == 0 ? mk_app(replace_at(e->a, p, k + 1, u), e->b) : mk_app(e->a, replace_at(e->b, p, k + 1, u));
  if (e->kind == LNode::Lam && p[k] == 0) return mk_lam(e->name, replace_at(e->a, p, k + 1, u));
  throw invalid_step("position " + to_string(p) + " does not exist");
}
inline LTerm replace_at(const LTerm& t, const Position& p, const LTerm& u) { return replace_at(t, p, 0, u); }

inline bool is_redex(const LTerm& t) {
  LTerm e = expose(t);
  return e->kind == LNode::App && expose(e->a)->kind == LNode::Lam;
}

inline LTerm contract(const LTerm& redex) {
  LTerm e = expose(redex);
  if (!(e->kind == LNode::App && expose(e->a)->kind == LNode::Lam)) throw invalid_step("not a redex");
  return subst_index(expose(e->a)->a, 0, e->b);
}

inline LTerm beta_step(const LTerm& t, const Position& p) {
  LTerm sub = subterm_at(t, p);
  if (!is_redex(sub)) throw invalid_step("no beta redex at " + to_string(p));
  return replace_at(t, p, contract(sub));
}

// shape of a term along its head: leading lambdas, spine, head
struct Shape {
  enum Kind { Hnf, Redex, BotHead, Lambda, Cycle, TooDeep } kind = Hnf;
  std::vector<std::string> hints;  // stripped binders
  LTerm head;
  std::vector<LTerm> args;
  Position redex;  // position of the head redex
  LTerm body;      // for Lambda: the body under the first binder
};

inline Shape shape(const LTerm& t0, bool under_lambda = true, std::size_t descent_cap = 100000) {
  Shape sh;
  std::unordered_set<std::string> recs;
  std::size_t budget = 0;
  auto exp = [&](LTerm x) -> std::optional<LTerm> {
    while (x->kind == LNode::Rec) {
      if (!recs.insert(encode(x)).second) return std::nullopt;
      if (++budget > descent_cap) return std::nullopt;
      x = unfold(x);
    }
    return x;
  };
  auto cur = exp(t0);
  if (!cur) {
    sh.kind = Shape::Cycle;
    return sh;
  }
  LTerm t = *cur;
  if (!under_lambda && t->kind == LNode::Lam) {
    sh.kind = Shape::Lambda;
    sh.hints = {t->name};
    sh.body = t->a;
    return sh;
  }
  while (t->kind == LNode::Lam) {
    sh.hints.push_back(t->name);
    sh.redex.push_back(0);
    if (++budget > descent_cap) {
      sh.kind = Shape::TooDeep;
      return sh;
    }
    auto n = exp(t->a);
    if (!n) {
      sh.kind = Shape::Cycle;
      return sh;
    }
    t = *n;
  }
  std::vector<LTerm> rev;
  while (t->kind == LNode::App) {
    rev.push_back(t->b);
    if (++budget > descent_cap) {
      sh.kind = Shape::TooDeep;
      return sh;
    }
    auto n = exp(t->a);
    if (!n) {
      sh.kind = Shape::Cycle;
      return sh;
    }
    t = *n;
  }
  sh.args.assign(rev.rbegin(), rev.rend());
  sh.head = t;
  if (t->kind == LNode::Lam) {
    if (sh.args.empty()) {
      sh.kind = Shape::Lambda;  // only reachable with under_lambda == false
      return sh;
    }
    sh.kind = Shape::Redex;
    for (std::size_t i = 1; i < sh.args.size(); ++i) sh.redex.push_back(0);
    return sh;
  }
  if (t->kind == LNode::Bot) {
    sh.kind = Shape::BotHead;
    return sh;
  }
  if (t->kind == LNode::RVar) throw malformed_coterm("dangling rec reference");
  sh.kind = Shape::Hnf;
  return sh;
}

inline bool is_hnf(const LTerm& t) { return shape(t).kind == Shape::Hnf; }

inline std::optional<LTerm> head_step(const LTerm& t) {
  Shape sh = shape(t);
  if (sh.kind != Shape::Redex) return std::nullopt;
  return beta_step(t, sh.redex);
}

inline std::optional<LTerm> weak_head_step(const LTerm& t) {
  Shape sh = shape(t, false);
  if (sh.kind != Shape::Redex) return std::nullopt;
  return beta_step(t, sh.redex);
}

// ---- head normal forms ------------------------------------------------------

struct HnfResult {
  enum Kind { Hnf, NoHnf, Unknown } kind = Unknown;
  std::size_t binders = 0;
  std::vector<std::string> hints;
  LTerm head;
  std::vector<LTerm> args;
  LTerm term;                      // final term reached
  std::size_t steps = 0;
  std::vector<Position> path;      // head redex positions contracted, in order
  std::string witness;             // NoHnf: revisited encoding or reason
};

inline std::string kind_name(HnfResult::Kind k) {
  return k == HnfResult::Hnf ? "hnf" : k == HnfResult::NoHnf ? "no_hnf" : "unknown";
}

inline HnfResult find_hnf(const LTerm& t0, std::size_t fuel = 10000, std::size_t memo_cap = 10000) {
  HnfResult r;
  std::unordered_set<std::string> seen;
  LTerm t = t0;
  while (true) {
    Shape sh = shape(t);
    r.term = t;
    switch (sh.kind) {
      case Shape::Hnf:
        r.kind = HnfResult::Hnf;
        r.binders = sh.hints.size();
        r.hints = sh.hints;
        r.head = sh.head;
        r.args = sh.args;
        return r;
      case Shape::BotHead:
        r.kind = HnfResult::NoHnf;
        r.witness = "head is _|_";
        return r;
      case Shape::Cycle:
        r.kind = HnfResult::NoHnf;
        r.witness = "infinite head path";
        return r;
      case Shape::TooDeep:
        r.kind = HnfResult::Unknown;
        r.witness = "head path too deep";
        return r;
      default:
        break;
    }
    if (t->size > memo_cap) {
      r.kind = HnfResult::Unknown;
      r.witness = "term exceeds memo cap";
      return r;
    }
    std::string enc = encode(t);
    if (!seen.insert(enc).second) {
      r.kind = HnfResult::NoHnf;
      r.witness = enc;
      return r;
    }
    if (r.steps >= fuel) {
      r.kind = HnfResult::Unknown;
      r.witness = "fuel";
      return r;
    }
    t = beta_step(t, sh.redex);
    r.path.push_back(sh.redex);
    ++r.steps;
  }
}

// ---- Bohm trees -------------------------------------------------------------

struct BohmNode {
  enum Kind { Node, Bottom, Unresolved, Cut } kind = Cut;
  std::vector<std::string> binders;
  std::string head;      // printed atom
  std::string head_key;  // nameless: "v<level>", "f:<name>", "c:<name>"
  std::vector<BohmNode> children;
  std::size_t depth = 0;

  bool operator==(const BohmNode& o) const {
    if (kind != o.kind) return false;
    if (kind != Node) return true;
    if (binders.size() != o.binders.size() || head_key != o.head_key || children.size() != o.children.size())
      return false;
    for (std::size_t i = 0; i < children.size(); ++i)
      if (!(children[i] == o.children[i])) return false;
    return true;
  }
  bool resolved() const {
    if (kind == Unresolved) return false;
    for (const auto& c : children)
      if (!c.resolved()) return false;
    return true;
  }
};

inline std::string to_text(const BohmNode& n) {
  switch (n.kind) {
    case BohmNode::Bottom:
      return "_|_";
    case BohmNode::Unresolved:
      return "?";
    case BohmNode::Cut:
      return "...";
    case BohmNode::Node: {
      std::string out;
      if (!n.binders.empty()) {
        out = "\\";
        for (std::size_t i = 0; i < n.binders.size(); ++i) out += (i ? " " : "") + n.binders[i];
        out += ". ";
      }
      out += n.head;
      if (!n.children.empty()) {
        out += "(";
        for (std::size_t i = 0; i < n.children.size(); ++i) out += (i ? "," : "") + to_text(n.children[i]);
        out += ")";
      }
      return out;
    }
  }
  return "";
}

// equal up to Unresolved subtrees on either side
inline bool equal_modulo_unresolved(const BohmNode& a, const BohmNode& b) {
  if (a.kind == BohmNode::Unresolved || b.kind == BohmNode::Unresolved) return true;
  if (a.kind != b.kind) return false;
  if (a.kind != BohmNode::Node) return true;
  if (a.binders.size() != b.binders.size() || a.head_key != b.head_key || a.children.size() != b.children.size())
    return false;
  for (std::size_t i = 0; i < a.children.size(); ++i)
    if (!equal_modulo_unresolved(a.children[i], b.children[i])) return false;
  return true;
}

struct BohmOptions {
  std::size_t fuel = 10000;
  std::size_t memo_cap = 10000;
};

namespace detail {

struct NameCtx {
  std::vector<std::string> names;  // by level
  std::set<std::string> used;
  std::string bind(const std::string& hint) {
    std::string x = hint.empty() ? "x" : hint;
    if (used.count(x)) x = fresh(used);
    used.insert(x);
    names.push_back(x);
    return x;
  }
  void unbind(std::size_t k) {
    for (std::size_t i = 0; i < k; ++i) {
      used.erase(names.back());
      names.pop_back();
    }
  }
};

inline void atom(const LTerm& h, const NameCtx& ctx, BohmNode& n) {
  switch (h->kind) {
    case LNode::Var: {
      if (h->index >= ctx.names.size()) {
        n.head = "_" + std::to_string(h->index - ctx.names.size());
        n.head_key = "d" + std::to_string(h->index - ctx.names.size());
      } else {
        std::size_t level = ctx.names.size() - 1 - h->index;
        n.head = ctx.names[level];
        n.head_key = "v" + std::to_string(level);
      }
      return;
    }
    case LNode::Free:
      n.head = h->name;
      n.head_key = "f:" + h->name;
      return;
    case LNode::Const:
      n.head = "#" + h->name;
      n.head_key = "c:" + h->name;
      return;
    default:
      throw std::logic_error("not an atom");
  }
}

inline BohmNode bohm(const LTerm& t, std::size_t d, const BohmOptions& o, NameCtx& ctx, std::size_t depth) {
  BohmNode n;
  n.depth = depth;
  if (d == 0) {
    n.kind = BohmNode::Cut;
    return n;
  }
  HnfResult r = find_hnf(t, o.fuel, o.memo_cap);
  if (r.kind == HnfResult::NoHnf) {
    n.kind = BohmNode::Bottom;
    return n;
  }
  if (r.kind == HnfResult::Unknown) {
    n.kind = BohmNode::Unresolved;
    return n;
  }
  n.kind = BohmNode::Node;
  for (const auto& h : r.hints) n.binders.push_back(ctx.bind(h));
  atom(r.head, ctx, n);
  for (const auto& a : r.args) n.children.push_back(bohm(a, d - 1, o, ctx, depth + 1));
  ctx.unbind(r.hints.size());
  return n;
}

inline BohmNode bohm_wh(const LTerm& t, std::size_t d, const BohmOptions& o, NameCtx& ctx, std::size_t depth) {
  BohmNode n;
  n.depth = depth;
  if (d == 0) {
    n.kind = BohmNode::Cut;
    return n;
  }
  std::vector<std::string> hints;
  std::unordered_set<std::string> seen;
  LTerm cur = t;
  std::size_t steps = 0;
  auto finish = [&](BohmNode::Kind k) {
    n.kind = k;
    return n;
  };
  while (true) {
    if (cur->size > o.memo_cap) return finish(BohmNode::Unresolved);
    if (!seen.insert(encode(cur)).second) return finish(BohmNode::Bottom);
    Shape sh = shape(cur, false);
    if (sh.kind == Shape::Lambda) {
      hints.push_back(sh.hints[0]);
      cur = sh.body;
      continue;
    }
    if (sh.kind == Shape::BotHead || sh.kind == Shape::Cycle) return finish(BohmNode::Bottom);
    if (sh.kind == Shape::TooDeep) return finish(BohmNode::Unresolved);
    if (sh.kind == Shape::Redex) {
      if (steps >= o.fuel) return finish(BohmNode::Unresolved);
      cur = beta_step(cur, sh.redex);
      ++steps;
      continue;
    }
    n.kind = BohmNode::Node;
    for (const auto& h : hints) n.binders.push_back(ctx.bind(h));
    atom(sh.head, ctx, n);
    for (const auto& a : sh.args) n.children.push_back(bohm_wh(a, d - 1, o, ctx, depth + 1));
    ctx.unbind(hints.size());
    return n;
  }
}

inline NameCtx root_ctx(const LTerm& t) {
  NameCtx c;
  free_names(t, c.used);
  return c;
}

}  // namespace detail

inline BohmNode bohm_tree(const LTerm& t, std::size_t d, BohmOptions o = {}) {
  auto ctx = detail::root_ctx(t);
  return detail::bohm(t, d, o, ctx, 0);
}
inline BohmNode bohm_tree(const LTerm& t, std::size_t d, std::size_t fuel) { return bohm_tree(t, d, BohmOptions{fuel}); }

inline BohmNode bohm_tree_weakhead(const LTerm& t, std::size_t d, BohmOptions o = {}) {
  auto ctx = detail::root_ctx(t);
  return detail::bohm_wh(t, d, o, ctx, 0);
}
inline BohmNode bohm_tree_weakhead(const LTerm& t, std::size_t d, std::size_t fuel) {
  return bohm_tree_weakhead(t, d, BohmOptions{fuel});
}

// read the hnf structure already present, collapsing detectable no-hnf parts
inline BohmNode read_bohm(const LTerm& t, std::size_t d, BohmOptions o = {}) {
  std::function<BohmNode(const LTerm&, std::size_t, detail::NameCtx&, std::size_t)> go =
      [&](const LTerm& x, std::size_t k, detail::NameCtx& ctx, std::size_t depth) {
        BohmNode n;
        n.depth = depth;
        if (k == 0) return n;
        Shape sh = shape(x);
        if (sh.kind != Shape::Hnf) {
          n.kind = find_hnf(x, o.fuel, o.memo_cap).kind == HnfResult::NoHnf ? BohmNode::Bottom : BohmNode::Unresolved;
          return n;
        }
        n.kind = BohmNode::Node;
        for (const auto& h : sh.hints) n.binders.push_back(ctx.bind(h));
        detail::atom(sh.head, ctx, n);
        for (const auto& a : sh.args) n.children.push_back(go(a, k - 1, ctx, depth + 1));
        ctx.unbind(sh.hints.size());
        return n;
      };
  auto ctx = detail::root_ctx(t);
  return go(t, d, ctx, 0);
}

// term with the Bohm tree's shape; cuts and unresolved parts become _|_
inline LTerm bohm_to_term(const BohmNode& n, std::size_t level = 0) {
  if (n.kind != BohmNode::Node) return mk_bot();
  std::size_t inner = level + n.binders.size();
  LTerm h;
  if (n.head_key[0] == 'v') {
    std::size_t lv = std::stoul(n.head_key.substr(1));
    h = mk_var(inner - 1 - lv);
  } else if (n.head_key[0] == 'f') {
    h = mk_free(n.head_key.substr(2));
  } else if (n.head_key[0] == 'c') {
    h = mk_const(n.head_key.substr(2));
  } else {
    h = mk_var(inner + std::stoul(n.head_key.substr(1)));
  }
  for (const auto& c : n.children) h = mk_app(h, bohm_to_term(c, inner));
  for (auto it = n.binders.rbegin(); it != n.binders.rend(); ++it) h = mk_lam(*it, h);
  return h;
}

// ---- bottom collapse, steps, confluence -------------------------------------

inline LTerm bot_collapse(const LTerm& t, std::size_t d, std::size_t fuel = 10000, std::size_t memo_cap = 10000) {
  LTerm e = expose(t);
  if (e->kind == LNode::Bot) return e;
  if (find_hnf(e, fuel, memo_cap).kind == HnfResult::NoHnf) return mk_bot();
  if (d == 0) return t;
  if (e->kind == LNode::App)
    return mk_app(bot_collapse(e->a, d - 1, fuel, memo_cap), bot_collapse(e->b, d - 1, fuel, memo_cap));
  if (e->kind == LNode::Lam) return mk_lam(e->name, bot_collapse(e->a, d - 1, fuel, memo_cap));
  return e;
}

struct ReductionStep {
  enum Rule { Beta, Bot } rule = Beta;
  Position pos;
  std::size_t phase = 0;
  bool operator==(const ReductionStep&) const = default;
};

inline LTerm apply_step(const LTerm& t, const ReductionStep& s, std::size_t fuel = 10000) {
  if (s.rule == ReductionStep::Beta) return beta_step(t, s.pos);
  LTerm sub = expose(subterm_at(t, s.pos));
  if (sub->kind == LNode::Bot) throw invalid_step("subterm at " + to_string(s.pos) + " is already _|_");
  if (find_hnf(sub, fuel).kind != HnfResult::NoHnf)
    throw invalid_step("subterm at " + to_string(s.pos) + " is not detectably without hnf");
  return replace_at(t, s.pos, mk_bot());
}

inline LTerm apply_steps(LTerm t, const std::vector<ReductionStep>& steps, std::size_t fuel = 10000) {
  for (const auto& s : steps) t = apply_step(t, s, fuel);
  return t;
}

struct ConfluenceResult {
  enum Verdict { Confluent, Divergent, Inconclusive } verdict = Inconclusive;
  BohmNode left, right;
  bool ok() const { return verdict != Divergent; }
};

inline std::string verdict_name(ConfluenceResult::Verdict v) {
  return v == ConfluenceResult::Confluent ? "confluent" : v == ConfluenceResult::Divergent ? "divergent" : "inconclusive";
}

inline ConfluenceResult check_confluence(const LTerm& t, const std::vector<ReductionStep>& p1,
                                         const std::vector<ReductionStep>& p2, std::size_t d,
                                         std::size_t fuel = 10000) {
  ConfluenceResult r;
  r.left = bohm_tree(apply_steps(t, p1, fuel), d, fuel);
  r.right = bohm_tree(apply_steps(t, p2, fuel), d, fuel);
  if (!r.left.resolved() || !r.right.resolved())
    r.verdict = equal_modulo_unresolved(r.left, r.right) ? ConfluenceResult::Inconclusive : ConfluenceResult::Divergent;
  else
    r.verdict = r.left == r.right ? ConfluenceResult::Confluent : ConfluenceResult::Divergent;
  return r;
}

// head steps phase by phase: root first, then inside the Bohm children
inline std::vector<ReductionStep> extract_reduction_prefix(const LTerm& t, std::size_t d, std::size_t fuel = 10000,
                                                           std::size_t memo_cap = 10000) {
  std::vector<ReductionStep> out;
  struct Item {
    Position pos;
    LTerm sub;
  };
  std::vector<Item> level{{{}, t}};
  for (std::size_t phase = 0; phase < d && !level.empty(); ++phase) {
    std::vector<Item> next;
    for (const auto& it : level) {
      HnfResult r = find_hnf(it.sub, fuel, memo_cap);
      if (r.kind != HnfResult::Hnf) continue;
      for (const auto& p : r.path) {
        Position q = it.pos;
        q.insert(q.end(), p.begin(), p.end());
        out.push_back({ReductionStep::Beta, q, phase});
      }
      std::size_t n = r.args.size();
      for (std::size_t i = 0; i < n; ++i) {
        Position q = it.pos;
        q.insert(q.end(), r.binders, 0);
        q.insert(q.end(), n - 1 - i, 0);
        q.push_back(1);
        next.push_back({q, r.args[i]});
      }
    }
    level = std::move(next);
  }
  return out;
}

// ---- random terms -----------------------------------------------------------

// finite terms over free a, b, c with fresh binder names
inline NamedTerm random_named(std::mt19937_64& rng, std::size_t budget) {
  std::vector<std::string> scope;
  std::size_t fresh_n = 0;
  std::function<NamedTerm(std::size_t)> go = [&](std::size_t n) -> NamedTerm {
    if (n <= 1) {
      std::size_t k = rng() % (3 + 2 * scope.size());
      if (k < 3) return NamedTerm::var(std::string(1, static_cast<char>('a' + k)));
      return NamedTerm::var(scope[(k - 3) % scope.size()]);
    }
    int kind = static_cast<int>(rng() % 10);
    if (kind < 3) {
      std::string x = "x" + std::to_string(++fresh_n);
      scope.push_back(x);
      NamedTerm b = go(n - 1);
      scope.pop_back();
      return NamedTerm::lam(x, std::move(b));
    }
    std::size_t l = 1 + rng() % (n - 1);
    if (kind < 6 && n >= 3) {
      std::string x = "x" + std::to_string(++fresh_n);
      scope.push_back(x);
      NamedTerm b = go(std::max<std::size_t>(1, l - 1));
      scope.pop_back();
      return NamedTerm::app(NamedTerm::lam(x, std::move(b)), go(std::max<std::size_t>(1, n - l)));
    }
    return NamedTerm::app(go(l), go(std::max<std::size_t>(1, n - l)));
  };
  return go(budget);
}

inline std::vector<Position> redex_positions(const LTerm& t, std::size_t max_depth = 64) {
  std::vector<Position> out;
  std::function<void(const LTerm&, Position&)> go = [&](const LTerm& x, Position& p) {
    if (p.size() > max_depth) return;
    if (is_redex(x)) out.push_back(p);
    auto ks = children(x);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      p.push_back(i);
      go(ks[i], p);
      p.pop_back();
    }
  };
  Position p;
  go(t, p);
  return out;
}

inline std::vector<ReductionStep> random_path(std::mt19937_64& rng, LTerm t, std::size_t max_steps,
                                              std::size_t size_cap = 400) {
  std::vector<ReductionStep> out;
  std::size_t n = rng() % (max_steps + 1);
  for (std::size_t i = 0; i < n; ++i) {
    auto rs = redex_positions(t, 24);
    if (rs.empty()) break;
    ReductionStep s{ReductionStep::Beta, rs[rng() % rs.size()], 0};
    LTerm next = apply_step(t, s);
    if (next->size > size_cap) break;
    out.push_back(s);
    t = next;
  }
  return out;
}

}  // namespace coind::ilc
