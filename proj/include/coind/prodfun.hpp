#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ext_nat.hpp"

namespace coind::pf {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

// Threshold(e, k, a, b) is a when e > k, else b.
struct Expr {
  enum Kind { Proj, Const, Plus, Monus, Min, Threshold, Call };
  Kind kind = Const;
  std::size_t index = 0;
  ExtNat value;
  std::uint64_t k = 0;
  std::string name;
  std::vector<ExprPtr> args;
};

inline ExprPtr proj(std::size_t i) { return std::make_shared<Expr>(Expr{Expr::Proj, i, {}, 0, {}, {}}); }
inline ExprPtr constant(ExtNat c) { return std::make_shared<Expr>(Expr{Expr::Const, 0, c, 0, {}, {}}); }
inline ExprPtr plus(ExprPtr e, std::uint64_t k) {
  return std::make_shared<Expr>(Expr{Expr::Plus, 0, {}, k, {}, {std::move(e)}});
}
inline ExprPtr monus(ExprPtr e, std::uint64_t k) {
  if (k == 0) return e;
  return std::make_shared<Expr>(Expr{Expr::Monus, 0, {}, k, {}, {std::move(e)}});
}
// empty min is infinity
inline ExprPtr minimum(std::vector<ExprPtr> es) {
  if (es.size() == 1) return es[0];
  return std::make_shared<Expr>(Expr{Expr::Min, 0, {}, 0, {}, std::move(es)});
}
inline ExprPtr minimum(ExprPtr a, ExprPtr b) { return minimum(std::vector<ExprPtr>{std::move(a), std::move(b)}); }
inline ExprPtr threshold(ExprPtr e, std::uint64_t k, ExprPtr then_e, ExprPtr else_e) {
  return std::make_shared<Expr>(
      Expr{Expr::Threshold, 0, {}, k, {}, {std::move(e), std::move(then_e), std::move(else_e)}});
}
inline ExprPtr call(std::string name, std::vector<ExprPtr> args) {
  return std::make_shared<Expr>(Expr{Expr::Call, 0, {}, 0, std::move(name), std::move(args)});
}

struct ProdFun {
  std::size_t arity = 0;
  ExprPtr body;
};

using CallFn = std::function<ExtNat(const std::string&, const std::vector<ExtNat>&)>;

inline ExtNat eval(const ExprPtr& e, const std::vector<ExtNat>& point, const CallFn& on_call) {
  switch (e->kind) {
    case Expr::Proj:
      if (e->index >= point.size()) throw std::out_of_range("projection index out of range");
      return point[e->index];
    case Expr::Const:
      return e->value;
    case Expr::Plus:
      return eval(e->args[0], point, on_call) + ExtNat(e->k);
    case Expr::Monus:
      return eval(e->args[0], point, on_call).monus(e->k);
    case Expr::Min: {
      ExtNat r = ExtNat::inf();
      for (auto& a : e->args) r = min(r, eval(a, point, on_call));
      return r;
    }
    case Expr::Threshold:
      return eval(e->args[0], point, on_call) > ExtNat(e->k) ? eval(e->args[1], point, on_call)
                                                             : eval(e->args[2], point, on_call);
    case Expr::Call: {
      if (!on_call) throw std::logic_error("Call node '" + e->name + "' evaluated without a system");
      std::vector<ExtNat> args;
      for (auto& a : e->args) args.push_back(eval(a, point, on_call));
      return on_call(e->name, args);
    }
  }
  throw std::logic_error("bad expression");
}

inline ExtNat eval(const ProdFun& f, const std::vector<ExtNat>& point) {
  if (point.size() != f.arity) throw std::invalid_argument("point arity mismatch");
  return eval(f.body, point, nullptr);
}

inline bool has_calls(const ExprPtr& e) {
  if (e->kind == Expr::Call) return true;
  for (auto& a : e->args)
    if (has_calls(a)) return true;
  return false;
}

inline std::string to_string(const ExprPtr& e) {
  switch (e->kind) {
    case Expr::Proj:
      return "n" + std::to_string(e->index);
    case Expr::Const:
      return e->value.str();
    case Expr::Plus:
      return "(" + to_string(e->args[0]) + " + " + std::to_string(e->k) + ")";
    case Expr::Monus:
      return "(" + to_string(e->args[0]) + " -. " + std::to_string(e->k) + ")";
    case Expr::Min:
    case Expr::Call: {
      std::string s = e->kind == Expr::Min ? "min(" : e->name + "(";
      for (std::size_t i = 0; i < e->args.size(); ++i) s += (i ? ", " : "") + to_string(e->args[i]);
      return s + ")";
    }
    case Expr::Threshold:
      return "(" + to_string(e->args[0]) + " > " + std::to_string(e->k) + " ? " + to_string(e->args[1]) + " : " +
             to_string(e->args[2]) + ")";
  }
  return "?";
}

inline ProdFun atom_destructor() { return {1, monus(proj(0), 1)}; }

inline ProdFun atom_constructor(std::size_t arity) {
  std::vector<ExprPtr> ps;
  for (std::size_t i = 0; i < arity; ++i) ps.push_back(proj(i));
  if (arity == 0) return {0, constant(ExtNat::inf())};
  return {arity, plus(minimum(ps), 1)};
}

inline ProdFun atom_test(std::uint64_t k) { return {1, threshold(proj(0), k, constant(1), constant(0))}; }

inline ProdFun atom_inf() { return {1, threshold(proj(0), 0, constant(ExtNat::inf()), constant(0))}; }

inline ProdFun identity(std::size_t arity, std::size_t i) { return {arity, proj(i)}; }

inline ExprPtr substitute(const ExprPtr& e, const std::vector<ExprPtr>& inners) {
  if (e->kind == Expr::Proj) {
    if (e->index >= inners.size()) throw std::invalid_argument("projection outside substitution");
    return inners[e->index];
  }
  if (e->args.empty()) return e;
  auto r = std::make_shared<Expr>(*e);
  for (auto& a : r->args) a = substitute(a, inners);
  return r;
}

inline ProdFun compose_substitution(const ProdFun& outer, const std::vector<ProdFun>& inners) {
  if (outer.arity != inners.size())
    throw std::invalid_argument("compose_substitution: outer arity " + std::to_string(outer.arity) + " vs " +
                                std::to_string(inners.size()) + " inner functions");
  std::size_t m = inners.empty() ? 0 : inners[0].arity;
  std::vector<ExprPtr> bodies;
  for (auto& g : inners) {
    if (g.arity != m) throw std::invalid_argument("compose_substitution: inner arities differ");
    bodies.push_back(g.body);
  }
  return {m, substitute(outer.body, bodies)};
}

inline ExprPtr cases_expr(std::vector<ExprPtr> branches, std::vector<ExprPtr> conditions) {
  ExprPtr body = minimum(std::move(branches));
  if (conditions.empty()) return body;
  return threshold(minimum(std::move(conditions)), 0, body, constant(0));
}

// min over the branches when every condition is 1, else 0
inline ProdFun compose_cases(const std::vector<ProdFun>& branches, const std::vector<ProdFun>& conditions) {
  if (branches.empty()) throw std::invalid_argument("compose_cases: no branches");
  std::size_t n = branches[0].arity;
  std::vector<ExprPtr> bs, cs;
  for (auto& b : branches) {
    if (b.arity != n) throw std::invalid_argument("compose_cases: branch arities differ");
    bs.push_back(b.body);
  }
  for (auto& c : conditions) {
    if (c.arity != n) throw std::invalid_argument("compose_cases: condition arity differs");
    cs.push_back(c.body);
  }
  return {n, cases_expr(std::move(bs), std::move(cs))};
}

struct Equation {
  std::size_t arity = 0;
  ExprPtr body;
};

class PFSystem {
 public:
  void define(const std::string& name, std::size_t arity, ExprPtr body) {
    eqs_[name] = Equation{arity, std::move(body)};
  }
  bool has(const std::string& name) const { return eqs_.count(name) > 0; }
  const Equation& at(const std::string& name) const {
    auto it = eqs_.find(name);
    if (it == eqs_.end()) throw std::invalid_argument("no production function for '" + name + "'");
    return it->second;
  }
  const std::map<std::string, Equation>& equations() const { return eqs_; }

  // every Call names a declared equation with matching arity
  void validate() const {
    for (auto& [n, eq] : eqs_) check(eq.body, eq.arity, n);
  }

 private:
  void check(const ExprPtr& e, std::size_t arity, const std::string& owner) const {
    if (e->kind == Expr::Proj && e->index >= arity)
      throw std::invalid_argument("projection n" + std::to_string(e->index) + " out of range in " + owner);
    if (e->kind == Expr::Call) {
      auto it = eqs_.find(e->name);
      if (it == eqs_.end()) throw std::invalid_argument("call to undeclared '" + e->name + "' in " + owner);
      if (it->second.arity != e->args.size())
        throw std::invalid_argument("call arity mismatch for '" + e->name + "' in " + owner);
    }
    for (auto& a : e->args) check(a, arity, owner);
  }
  std::map<std::string, Equation> eqs_;
};

enum class Exactness { exact, lower_bound };

struct PFValue {
  ExtNat value;
  Exactness exactness = Exactness::exact;
  bool exact() const { return exactness == Exactness::exact; }
};

struct SolveStats {
  std::size_t levels = 0;
  std::size_t demanded = 0;
  std::vector<std::vector<ExtNat>> trace;  // per level, the values at the queried points
};

using PFPoint = std::vector<ExtNat>;

// Kleene iteration from the zero function over the demanded point set.
using PFKey = std::pair<std::string, PFPoint>;
// exact least-fixpoint values from earlier solves; used as constants
using PFCache = std::map<PFKey, ExtNat>;

inline std::vector<PFValue> solve_pf_batch(const PFSystem& sys, const std::string& name,
                                           const std::vector<PFPoint>& points, std::size_t K,
                                           SolveStats* stats = nullptr, PFCache* cache = nullptr) {
  if (K < 1) throw std::invalid_argument("solve_pf: K must be at least 1");
  const auto& root = sys.at(name);
  using Key = PFKey;
  std::map<Key, ExtNat> cur;
  for (auto& p : points) {
    if (p.size() != root.arity) throw std::invalid_argument("solve_pf: point arity mismatch for " + name);
    if (cache && cache->count(Key{name, p})) continue;
    cur.emplace(Key{name, p}, ExtNat(0));
  }
  bool stable = false;
  std::size_t level = 0;
  while (level < K) {
    ++level;
    std::map<Key, ExtNat> next;
    std::vector<Key> fresh;
    CallFn lookup = [&](const std::string& f, const PFPoint& args) {
      Key key{f, args};
      if (cache) {
        auto c = cache->find(key);
        if (c != cache->end()) return c->second;
      }
      auto it = cur.find(key);
      if (it != cur.end()) return it->second;
      fresh.push_back(key);
      return ExtNat(0);
    };
    bool changed = false;
    for (auto& [key, old] : cur) {
      const auto& eq = sys.at(key.first);
      ExtNat v = eval(eq.body, key.second, lookup);
      if (v < old) throw std::logic_error("solve_pf: iteration decreased; expression is not monotone");
      if (v != old) changed = true;
      next.emplace(key, v);
    }
    for (auto& k : fresh) {
      if (!sys.has(k.first)) throw std::invalid_argument("call to undeclared '" + k.first + "'");
      if (next.emplace(k, ExtNat(0)).second) changed = true;
    }
    cur = std::move(next);
    if (stats) {
      std::vector<ExtNat> row;
      for (auto& p : points) row.push_back(cur.count(Key{name, p}) ? cur.at(Key{name, p}) : cache->at(Key{name, p}));
      stats->trace.push_back(std::move(row));
    }
    if (!changed) {
      stable = true;
      break;
    }
  }
  if (stats) {
    stats->levels = level;
    stats->demanded = cur.size();
  }
  if (stable && cache) cache->insert(cur.begin(), cur.end());
  std::vector<PFValue> out;
  for (auto& p : points) {
    Key k{name, p};
    if (cache && !cur.count(k)) out.push_back({cache->at(k), Exactness::exact});
    else out.push_back({cur.at(k), stable ? Exactness::exact : Exactness::lower_bound});
  }
  return out;
}

inline PFValue solve_pf(const PFSystem& sys, const std::string& name, const PFPoint& point, std::size_t K = 256,
                        SolveStats* stats = nullptr, PFCache* cache = nullptr) {
  return solve_pf_batch(sys, name, {point}, K, stats, cache)[0];
}

enum class Status { productive_verified, guarded, not_productive, unknown };

inline std::string to_string(Status s) {
  switch (s) {
    case Status::productive_verified: return "productive_verified";
    case Status::guarded: return "guarded";
    case Status::not_productive: return "not_productive";
    case Status::unknown: return "unknown";
  }
  return "?";
}

struct Sample {
  std::uint64_t n;
  PFValue xi;
};

struct ProductivityVerdict {
  Status status = Status::unknown;
  std::optional<std::uint64_t> witness;
  std::uint64_t sample_bound = 64;
  std::size_t iteration_cap = 256;
  std::vector<Sample> samples;
};

// Evaluates a prefix function whose Call nodes refer to equations of sys.
class PrefixEvaluator {
 public:
  PrefixEvaluator(const PFSystem& sys, std::size_t K) : sys_(sys), K_(K) {}

  PFValue operator()(const ExprPtr& e, const PFPoint& point) {
    bool exact = true;
    CallFn fn = [&](const std::string& f, const PFPoint& args) {
      auto key = std::make_pair(f, args);
      auto it = memo_.find(key);
      if (it == memo_.end()) it = memo_.emplace(key, solve_pf(sys_, f, args, K_, nullptr, &exact_)).first;
      if (!it->second.exact()) exact = false;
      return it->second.value;
    };
    ExtNat v = eval(e, point, fn);
    return {v, exact ? Exactness::exact : Exactness::lower_bound};
  }

 private:
  const PFSystem& sys_;
  std::size_t K_;
  std::map<std::pair<std::string, PFPoint>, PFValue> memo_;
  PFCache exact_;
};

// xi(n,...,n) > n for n <= N; off-diagonal points follow by monotonicity,
// infinite ones by continuity.
inline ProductivityVerdict check_productivity(const ProdFun& xi, const PFSystem& sys, std::uint64_t N = 64,
                                              std::size_t K = 256) {
  if (N < 1) throw std::invalid_argument("check_productivity: N must be at least 1");
  ProductivityVerdict v;
  v.sample_bound = N;
  v.iteration_cap = K;
  if (xi.arity == 0) {
    v.status = Status::productive_verified;
    return v;
  }
  PrefixEvaluator ev(sys, K);
  std::optional<std::uint64_t> first_bad;
  bool undecided = false;
  for (std::uint64_t n = 0; n <= N; ++n) {
    PFValue r = ev(xi.body, PFPoint(xi.arity, ExtNat(n)));
    v.samples.push_back({n, r});
    if (r.value > ExtNat(n)) continue;
    if (r.exact()) {
      // prefer a positive witness; 0 only when nothing else fails
      if (!first_bad || (*first_bad == 0 && n > 0)) first_bad = n;
    } else {
      undecided = true;
    }
  }
  if (first_bad) {
    v.status = Status::not_productive;
    v.witness = first_bad;
  } else {
    v.status = undecided ? Status::unknown : Status::productive_verified;
  }
  return v;
}

}  // namespace coind::pf
