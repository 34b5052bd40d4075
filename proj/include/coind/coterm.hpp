#pragma once

#include <algorithm>
#include <cctype>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ext_nat.hpp"

namespace coind {

struct malformed_coterm : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct resource_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct parse_error : std::runtime_error {
  parse_error(const std::string& msg, std::size_t line, std::size_t col)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(col) + ": " + msg),
        line(line),
        column(col) {}
  std::size_t line;
  std::size_t column;
};

using Position = std::vector<std::size_t>;

inline std::string to_string(const Position& p) {
  if (p.empty()) return "e";
  std::string s;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) s += '.';
    s += std::to_string(p[i]);
  }
  return s;
}

// "e" or "" is the root; otherwise dot separated indices
inline Position parse_position(const std::string& s) {
  Position p;
  if (s.empty() || s == "e") return p;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
    if (j == i) throw std::invalid_argument("bad position '" + s + "'");
    p.push_back(std::stoul(s.substr(i, j - i)));
    if (j < s.size() && s[j] != '.') throw std::invalid_argument("bad position '" + s + "'");
    i = j + 1;
    if (j + 1 == s.size()) throw std::invalid_argument("bad position '" + s + "'");
  }
  return p;
}

struct ConstructorDecl {
  std::string name;
  std::vector<std::string> args;
  std::string result;
};

class Signature {
 public:
  void add_sort(const std::string& s) {
    if (std::find(sorts_.begin(), sorts_.end(), s) == sorts_.end()) sorts_.push_back(s);
  }

  void add_constructor(const std::string& name, std::vector<std::string> args, const std::string& result) {
    if (ctors_.count(name)) throw std::invalid_argument("duplicate constructor '" + name + "'");
    for (auto& a : args)
      if (!has_sort(a)) throw std::invalid_argument("undeclared sort '" + a + "' in constructor '" + name + "'");
    if (!has_sort(result)) throw std::invalid_argument("undeclared sort '" + result + "'");
    ctors_[name] = ConstructorDecl{name, std::move(args), result};
    order_.push_back(name);
  }

  // undeclared nullary labels become variables of this sort
  void set_variable_sort(const std::string& s) {
    if (!has_sort(s)) throw std::invalid_argument("undeclared sort '" + s + "'");
    variable_sort_ = s;
  }

  // integer literals are constants of this sort
  void set_integer_sort(const std::string& s) {
    if (!has_sort(s)) throw std::invalid_argument("undeclared sort '" + s + "'");
    integer_sort_ = s;
  }

  bool has_sort(const std::string& s) const {
    return std::find(sorts_.begin(), sorts_.end(), s) != sorts_.end();
  }

  const std::vector<std::string>& sorts() const { return sorts_; }

  std::vector<ConstructorDecl> constructors() const {
    std::vector<ConstructorDecl> r;
    for (auto& n : order_) r.push_back(ctors_.at(n));
    return r;
  }

  std::vector<ConstructorDecl> constructors_of(const std::string& sort) const {
    std::vector<ConstructorDecl> r;
    for (auto& n : order_)
      if (ctors_.at(n).result == sort) r.push_back(ctors_.at(n));
    return r;
  }

  std::optional<ConstructorDecl> lookup(const std::string& label) const {
    auto it = ctors_.find(label);
    if (it != ctors_.end()) return it->second;
    if (integer_sort_ && is_integer(label)) return ConstructorDecl{label, {}, *integer_sort_};
    if (variable_sort_ && is_identifier(label)) return ConstructorDecl{label, {}, *variable_sort_};
    return std::nullopt;
  }

  bool is_variable(const std::string& label) const {
    return variable_sort_ && !ctors_.count(label) && is_identifier(label);
  }

  static bool is_integer(const std::string& s) {
    std::size_t i = (!s.empty() && s[0] == '-') ? 1 : 0;
    if (i == s.size()) return false;
    for (; i < s.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
  }

  static bool is_identifier(const std::string& s) {
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
      return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
    });
  }

 private:
  std::vector<std::string> sorts_;
  std::map<std::string, ConstructorDecl> ctors_;
  std::vector<std::string> order_;
  std::optional<std::string> variable_sort_;
  std::optional<std::string> integer_sort_;
};

namespace detail {

struct CotermNode {
  std::string label;
  std::vector<std::size_t> children;
};

class CotermGraph {
 public:
  virtual ~CotermGraph() = default;
  virtual const CotermNode& node(std::size_t id) = 0;
  virtual std::size_t expanded_count() const = 0;
  const Signature* signature() const { return sig_.get(); }
  const std::string& sort_of(std::size_t id) const { return sorts_.at(id); }

 protected:
  // records the expected sort of a freshly allocated node
  void note_sort(std::size_t id, const std::string& s) {
    if (sorts_.size() <= id) sorts_.resize(id + 1);
    if (sorts_[id].empty()) sorts_[id] = s;
  }

  void check(std::size_t id, const CotermNode& n, std::vector<std::string>& child_sorts) {
    child_sorts.assign(n.children.size(), sorts_[id]);
    if (!sig_) return;
    auto d = sig_->lookup(n.label);
    if (!d) throw malformed_coterm("unknown constructor '" + n.label + "'");
    if (d->result != sorts_[id])
      throw malformed_coterm("constructor '" + n.label + "' has sort " + d->result + ", expected " + sorts_[id]);
    if (d->args.size() != n.children.size())
      throw malformed_coterm("constructor '" + n.label + "' expects " + std::to_string(d->args.size()) +
                             " children, got " + std::to_string(n.children.size()));
    child_sorts = d->args;
  }

  std::shared_ptr<const Signature> sig_;
  std::deque<std::string> sorts_;
};

template <class Seed, class Step, class Hash, class Eq>
class GeneratorGraph : public CotermGraph {
 public:
  GeneratorGraph(Step step, std::shared_ptr<const Signature> sig, std::size_t cap)
      : step_(std::move(step)), cap_(cap) {
    sig_ = std::move(sig);
  }

  std::size_t intern(const Seed& s, const std::string& sort) {
    auto it = index_.find(s);
    if (it != index_.end()) {
      if (sig_ && sort_of(it->second) != sort)
        throw malformed_coterm("seed demanded at sorts " + sort_of(it->second) + " and " + sort);
      return it->second;
    }
    if (cap_ && seeds_.size() >= cap_)
      throw resource_error("coterm node cap of " + std::to_string(cap_) + " exceeded");
    std::size_t id = seeds_.size();
    seeds_.push_back(s);
    nodes_.emplace_back();
    index_.emplace(s, id);
    note_sort(id, sort);
    return id;
  }

  const CotermNode& node(std::size_t id) override {
    std::lock_guard<std::recursive_mutex> lock(mu_);
    if (nodes_.at(id)) return *nodes_[id];
    Seed seed = seeds_[id];
    auto [label, kids] = step_(seed);
    CotermNode n{std::move(label), {}};
    n.children.resize(kids.size());
    std::vector<std::string> child_sorts;
    check(id, n, child_sorts);
    for (std::size_t i = 0; i < kids.size(); ++i) n.children[i] = intern(kids[i], child_sorts[i]);
    nodes_[id] = std::move(n);
    ++expanded_;
    return *nodes_[id];
  }

  std::size_t expanded_count() const override { return expanded_; }

 private:
  Step step_;
  std::size_t cap_;
  std::deque<Seed> seeds_;
  std::deque<std::optional<CotermNode>> nodes_;
  std::unordered_map<Seed, std::size_t, Hash, Eq> index_;
  std::size_t expanded_ = 0;
  std::recursive_mutex mu_;
};

}  // namespace detail

// A possibly infinite tree given by a seed and a one-step unfold.
class Coterm {
 public:
  Coterm() = default;

  // step(seed) -> pair<label, vector<Seed>>
  template <class Seed, class Step, class Hash = std::hash<Seed>, class Eq = std::equal_to<Seed>>
  static Coterm unfold(const std::string& sort, const Seed& seed, Step step,
                       std::shared_ptr<const Signature> sig = nullptr, std::size_t node_cap = 0) {
    using G = detail::GeneratorGraph<Seed, Step, Hash, Eq>;
    auto g = std::make_shared<G>(std::move(step), std::move(sig), node_cap);
    std::size_t id = g->intern(seed, sort);
    return Coterm(g, id);
  }

  bool valid() const { return static_cast<bool>(g_); }
  const std::string& label() const { return g_->node(id_).label; }
  std::size_t arity() const { return g_->node(id_).children.size(); }
  Coterm child(std::size_t i) const {
    const auto& n = g_->node(id_);
    if (i >= n.children.size()) throw std::out_of_range("child index out of range");
    return Coterm(g_, n.children[i]);
  }
  std::vector<Coterm> children() const {
    std::vector<Coterm> r;
    for (std::size_t i = 0; i < arity(); ++i) r.push_back(child(i));
    return r;
  }
  const std::string& sort() const { return g_->sort_of(id_); }
  std::size_t memo_size() const { return g_->expanded_count(); }

  bool same_node(const Coterm& o) const { return g_ == o.g_ && id_ == o.id_; }
  std::pair<const void*, std::size_t> identity() const { return {g_.get(), id_}; }
  bool operator==(const Coterm& o) const { return same_node(o); }

  struct Hash {
    std::size_t operator()(const Coterm& t) const {
      return std::hash<const void*>()(t.g_.get()) * 31 + t.id_;
    }
  };

 private:
  Coterm(std::shared_ptr<detail::CotermGraph> g, std::size_t id) : g_(std::move(g)), id_(id) {}
  std::shared_ptr<detail::CotermGraph> g_;
  std::size_t id_ = 0;
};

inline std::optional<std::string> unfold_at(const Coterm& t, const Position& p) {
  Coterm cur = t;
  for (std::size_t i : p) {
    if (i >= cur.arity()) return std::nullopt;
    cur = cur.child(i);
  }
  return cur.label();
}

struct ApproxTree {
  bool bottom = true;
  std::string label;
  std::vector<ApproxTree> children;

  static ApproxTree bot() { return {}; }
  static ApproxTree node(std::string l, std::vector<ApproxTree> kids = {}) {
    return ApproxTree{false, std::move(l), std::move(kids)};
  }
  bool is_constant() const { return !bottom && children.empty(); }
  bool operator==(const ApproxTree&) const = default;
};

struct Approximant {
  ApproxTree tree;
  ExtNat size;
  bool operator==(const Approximant&) const = default;
};

// t|n on a finite tree: constants survive at depth n > 0
inline ApproxTree truncate(const ApproxTree& t, std::uint64_t n) {
  if (t.bottom) return t;
  if (n == 0) return ApproxTree::bot();
  if (n == 1) {
    ApproxTree r = ApproxTree::node(t.label);
    for (auto& c : t.children) r.children.push_back(c.is_constant() ? c : ApproxTree::bot());
    return r;
  }
  ApproxTree r = ApproxTree::node(t.label);
  for (auto& c : t.children) r.children.push_back(truncate(c, n - 1));
  return r;
}

inline ApproxTree approximant_tree(const Coterm& t, std::uint64_t n) {
  if (n == 0) return ApproxTree::bot();
  ApproxTree r = ApproxTree::node(t.label());
  for (std::size_t i = 0; i < t.arity(); ++i) {
    Coterm c = t.child(i);
    if (n == 1)
      r.children.push_back(c.arity() == 0 ? ApproxTree::node(c.label()) : ApproxTree::bot());
    else
      r.children.push_back(approximant_tree(c, n - 1));
  }
  return r;
}

inline Approximant approximant(const Coterm& t, std::uint64_t n) { return {approximant_tree(t, n), ExtNat(n)}; }

inline Approximant cut(ExtNat n, const Approximant& a) {
  if (a.size <= n) return a;
  return {truncate(a.tree, n.value()), n};
}

// <i,t> below <j,s> iff i <= j and s|i = t
inline bool approx_leq(const Approximant& a, const Approximant& b) {
  if (!(a.size <= b.size)) return false;
  if (a.size.is_inf()) return a.tree == b.tree;
  return truncate(b.tree, a.size.value()) == a.tree;
}

// below in the plain information order: a is b with some subtrees replaced by bottom
inline bool tree_leq(const ApproxTree& a, const ApproxTree& b) {
  if (a.bottom) return true;
  if (b.bottom || a.label != b.label || a.children.size() != b.children.size()) return false;
  for (std::size_t i = 0; i < a.children.size(); ++i)
    if (!tree_leq(a.children[i], b.children[i])) return false;
  return true;
}

// level by level over distinct node pairs
inline bool bisimilar_to_depth(const Coterm& t, const Coterm& s, std::uint64_t n) {
  using Pair = std::pair<Coterm, Coterm>;
  struct PH {
    std::size_t operator()(const Pair& p) const { return Coterm::Hash()(p.first) * 1000003 ^ Coterm::Hash()(p.second); }
  };
  struct PE {
    bool operator()(const Pair& a, const Pair& b) const {
      return a.first.same_node(b.first) && a.second.same_node(b.second);
    }
  };
  std::vector<Pair> level{{t, s}};
  for (std::uint64_t d = 0; d < n && !level.empty(); ++d) {
    std::unordered_set<Pair, PH, PE> next;
    for (auto& [a, b] : level) {
      if (a.same_node(b)) continue;
      if (a.label() != b.label() || a.arity() != b.arity()) return false;
      for (std::size_t i = 0; i < a.arity(); ++i) {
        Coterm x = a.child(i), y = b.child(i);
        if (d + 1 == n) {
          // only constants are visible at the boundary
          bool cx = x.arity() == 0, cy = y.arity() == 0;
          if (cx != cy || (cx && x.label() != y.label())) return false;
        } else {
          next.emplace(x, y);
        }
      }
    }
    level.assign(next.begin(), next.end());
  }
  return true;
}

// Exact equality for finitely generated coterms, by exploring pairs of nodes.
inline bool coterm_equal(const Coterm& t, const Coterm& s, std::size_t pair_cap = 100000) {
  std::unordered_map<Coterm, std::vector<Coterm>, Coterm::Hash> seen;
  std::size_t pairs = 0;
  std::vector<std::pair<Coterm, Coterm>> todo{{t, s}};
  while (!todo.empty()) {
    auto [a, b] = todo.back();
    todo.pop_back();
    if (a.same_node(b)) continue;
    auto& bucket = seen[a];
    if (std::any_of(bucket.begin(), bucket.end(), [&](const Coterm& x) { return x.same_node(b); })) continue;
    bucket.push_back(b);
    if (++pairs > pair_cap) throw resource_error("coterm_equal: pair cap exceeded");
    if (a.label() != b.label() || a.arity() != b.arity()) return false;
    for (std::size_t i = 0; i < a.arity(); ++i) todo.emplace_back(a.child(i), b.child(i));
  }
  return true;
}

inline std::string to_text(const ApproxTree& t) {
  if (t.bottom) return "_|_";
  std::string s = t.label;
  if (!t.children.empty()) {
    s += '(';
    for (std::size_t i = 0; i < t.children.size(); ++i) {
      if (i) s += ',';
      s += to_text(t.children[i]);
    }
    s += ')';
  }
  return s;
}

inline std::string to_text(const Approximant& a) { return to_text(a.tree); }

namespace detail {

struct TextCursor {
  const std::string& src;
  std::size_t pos = 0;

  void skip() {
    while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
  }
  bool eof() {
    skip();
    return pos >= src.size();
  }
  bool accept(const std::string& tok) {
    skip();
    if (src.compare(pos, tok.size(), tok) == 0) {
      pos += tok.size();
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < pos && i < src.size(); ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw parse_error(msg, line, col);
  }
  void expect(const std::string& tok) {
    if (!accept(tok)) fail("expected '" + tok + "'");
  }
  static bool label_char(char c) {
    return !std::isspace(static_cast<unsigned char>(c)) && c != '(' && c != ')' && c != ',' && c != '.';
  }
  std::string label() {
    skip();
    std::size_t b = pos;
    while (pos < src.size() && label_char(src[pos])) ++pos;
    if (b == pos) fail(pos >= src.size() ? "unexpected end of input" : "expected a label");
    return src.substr(b, pos - b);
  }
};

inline ApproxTree parse_tree(TextCursor& c) {
  if (c.accept("_|_")) return ApproxTree::bot();
  ApproxTree t = ApproxTree::node(c.label());
  if (c.accept("(")) {
    do t.children.push_back(parse_tree(c));
    while (c.accept(","));
    c.expect(")");
  }
  return t;
}

}  // namespace detail

inline ApproxTree parse_approx_tree(const std::string& text) {
  detail::TextCursor c{text};
  ApproxTree t = detail::parse_tree(c);
  if (!c.eof()) c.fail("trailing input");
  return t;
}

// depth of the deepest non-bottom node, root = 0; -1 for bottom
inline long tree_height(const ApproxTree& t) {
  if (t.bottom) return -1;
  long h = 0;
  for (auto& c : t.children) h = std::max(h, tree_height(c) + 1);
  return h;
}

inline void check_well_sorted(const ApproxTree& t, const Signature& sig, const std::string& sort) {
  if (t.bottom) return;
  auto d = sig.lookup(t.label);
  if (!d) throw malformed_coterm("unknown constructor '" + t.label + "'");
  if (d->result != sort) throw malformed_coterm("'" + t.label + "' is not of sort " + sort);
  if (d->args.size() != t.children.size()) throw malformed_coterm("arity mismatch at '" + t.label + "'");
  for (std::size_t i = 0; i < t.children.size(); ++i) check_well_sorted(t.children[i], sig, d->args[i]);
}

// Regular coterms written as c(t1,...,tk) with `rec X. t` binders.
namespace detail {

struct RegNode {
  enum Kind { Ctor, Rec, Ref } kind = Ctor;
  std::string label;
  std::vector<std::size_t> kids;
  std::size_t target = 0;
};

inline std::size_t parse_regular(TextCursor& c, std::vector<RegNode>& nodes,
                                 std::vector<std::pair<std::string, std::size_t>>& scope,
                                 const std::map<std::string, std::string>& macros) {
  c.skip();
  std::size_t start = c.pos;
  if (c.accept("rec") && c.pos < c.src.size() && std::isspace(static_cast<unsigned char>(c.src[c.pos]))) {
    std::string x = c.label();
    c.expect(".");
    std::size_t id = nodes.size();
    nodes.push_back({RegNode::Rec, x, {}, 0});
    scope.emplace_back(x, id);
    std::size_t body = parse_regular(c, nodes, scope, macros);
    scope.pop_back();
    nodes[id].target = body;
    return id;
  }
  c.pos = start;
  std::string l = c.label();
  if (c.accept("(")) {
    std::vector<std::size_t> kids;
    do kids.push_back(parse_regular(c, nodes, scope, macros));
    while (c.accept(","));
    c.expect(")");
    nodes.push_back({RegNode::Ctor, l, kids, 0});
    return nodes.size() - 1;
  }
  for (auto it = scope.rbegin(); it != scope.rend(); ++it) {
    if (it->first == l) {
      nodes.push_back({RegNode::Ref, l, {}, it->second});
      return nodes.size() - 1;
    }
  }
  auto m = macros.find(l);
  if (m != macros.end()) {
    TextCursor inner{m->second};
    std::vector<std::pair<std::string, std::size_t>> fresh;
    std::size_t r = parse_regular(inner, nodes, fresh, macros);
    if (!inner.eof()) inner.fail("trailing input in macro " + l);
    return r;
  }
  nodes.push_back({RegNode::Ctor, l, {}, 0});
  return nodes.size() - 1;
}

}  // namespace detail

inline Coterm parse_regular_coterm(const std::string& text, const std::string& sort,
                                   std::shared_ptr<const Signature> sig = nullptr,
                                   const std::map<std::string, std::string>& macros = {}) {
  detail::TextCursor c{text};
  auto nodes = std::make_shared<std::vector<detail::RegNode>>();
  std::vector<std::pair<std::string, std::size_t>> scope;
  std::size_t root = detail::parse_regular(c, *nodes, scope, macros);
  if (!c.eof()) c.fail("trailing input");
  // resolve binders and back references to constructor nodes
  auto resolve = [nodes](std::size_t id) {
    std::set<std::size_t> seen;
    while ((*nodes)[id].kind != detail::RegNode::Ctor) {
      if (!seen.insert(id).second) throw malformed_coterm("unguarded recursion in regular term");
      id = (*nodes)[id].target;
    }
    return id;
  };
  std::size_t r = resolve(root);
  for (std::size_t i = 0; i < nodes->size(); ++i) resolve(i);
  auto step = [nodes, resolve](std::size_t id) {
    const auto& n = (*nodes)[id];
    std::vector<std::size_t> kids;
    for (auto k : n.kids) kids.push_back(resolve(k));
    return std::make_pair(n.label, kids);
  };
  return Coterm::unfold(sort, r, step, std::move(sig));
}

// Finite coterm from an approximant tree without bottoms.
inline Coterm coterm_from_tree(const ApproxTree& t, const std::string& sort,
                               std::shared_ptr<const Signature> sig = nullptr) {
  auto root = std::make_shared<ApproxTree>(t);
  auto step = [root](const Position& p) {
    const ApproxTree* cur = root.get();
    for (auto i : p) cur = &cur->children[i];
    if (cur->bottom) throw malformed_coterm("bottom inside a coterm");
    std::vector<Position> kids;
    for (std::size_t i = 0; i < cur->children.size(); ++i) {
      kids.push_back(p);
      kids.back().push_back(i);
    }
    return std::make_pair(cur->label, kids);
  };
  struct PH {
    std::size_t operator()(const Position& p) const {
      std::size_t h = p.size();
      for (auto i : p) h = h * 1000003 + i;
      return h;
    }
  };
  return Coterm::unfold<Position, decltype(step), PH>(sort, Position{}, step, std::move(sig));
}

}  // namespace coind
