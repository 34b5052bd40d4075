#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coterm.hpp"
#include "prodfun.hpp"

namespace coind::streams {

struct Loc {
  std::size_t line = 0;
  std::size_t col = 0;
};

struct sort_error : parse_error {
  using parse_error::parse_error;
};

struct eval_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct unsupported_construct : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct insufficient_iterations : std::runtime_error {
  insufficient_iterations(const std::string& msg, ApproxTree partial, std::size_t levels)
      : std::runtime_error(msg), partial(std::move(partial)), levels(levels) {}
  ApproxTree partial;
  std::size_t levels;
};

inline const std::string kInt = "Int";
inline const std::string kBool = "Bool";
inline const std::string kStream = "Stream";
inline const std::string kCons = "cons";

struct SortInfo {
  enum Kind { Data, Codata, Boolean } kind = Data;
  std::string name;
  std::vector<std::string> ctors;
};

struct CtorInfo {
  std::string name;
  std::vector<std::string> fields;
  std::string sort;
};

struct Pattern {
  enum Kind { Var, Wild, Int, Ctor, App } kind = Wild;
  std::string name;
  std::int64_t value = 0;
  std::vector<Pattern> args;
  Loc loc;
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

// App only exists before name resolution.
struct Expr {
  enum Kind { Var, Int, Bool, Ctor, Call, Destr, BinOp, Not, App } kind = Int;
  std::string name;
  std::int64_t value = 0;
  std::size_t field = 0;
  std::vector<ExprPtr> args;
  Loc loc;
};

struct Alternative {
  ExprPtr guard;  // null when unconditional
  ExprPtr rhs;
};

struct Clause {
  std::vector<Pattern> patterns;
  std::vector<Alternative> alts;
  Loc loc;
};

struct Definition {
  std::string name;
  std::vector<std::string> params;
  std::string result;
  std::vector<Clause> clauses;
  bool has_signature = false;
  Loc loc;
};

struct EquationSystem {
  std::map<std::string, SortInfo> sorts;
  std::map<std::string, CtorInfo> ctors;
  std::vector<std::string> order;
  std::map<std::string, Definition> defs;

  const Definition& def(const std::string& n) const {
    auto it = defs.find(n);
    if (it == defs.end()) throw std::invalid_argument("no definition named '" + n + "'");
    return it->second;
  }
  bool is_codata(const std::string& s) const {
    auto it = sorts.find(s);
    return it != sorts.end() && it->second.kind == SortInfo::Codata;
  }
  std::vector<std::size_t> codata_params(const Definition& d) const {
    std::vector<std::size_t> r;
    for (std::size_t i = 0; i < d.params.size(); ++i)
      if (is_codata(d.params[i])) r.push_back(i);
    return r;
  }

  std::shared_ptr<Signature> signature() const {
    auto sig = std::make_shared<Signature>();
    for (auto& [n, s] : sorts)
      if (s.kind != SortInfo::Boolean) sig->add_sort(n);
    sig->set_integer_sort(kInt);
    for (auto& [n, c] : ctors) sig->add_constructor(n, c.fields, c.sort);
    return sig;
  }
};

namespace detail {

struct Token {
  enum Type { Ident, Int, Sym, End } type = End;
  std::string text;
  Loc loc;
  bool bol = false;
};

inline std::vector<Token> lex(const std::string& src) {
  static const std::vector<std::string> syms = {"->", "==", "!=", "<=", ">=", "&&", "||", "(", ")", ":",
                                                "=",  "|",  "<",  ">",  "+",  "-",  "*",  "!",  ","};
  std::vector<Token> out;
  std::size_t i = 0, line = 1, col = 1;
  auto adv = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      adv(1);
      continue;
    }
    if (src.compare(i, 2, "--") == 0 && (i + 2 >= src.size() || src[i + 2] != '>')) {
      while (i < src.size() && src[i] != '\n') adv(1);
      continue;
    }
    Token t;
    t.loc = {line, col};
    t.bol = col == 1;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_' || src[j] == '\''))
        ++j;
      t.type = Token::Ident;
      t.text = src.substr(i, j - i);
      adv(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      t.type = Token::Int;
      t.text = src.substr(i, j - i);
      adv(j - i);
    } else {
      bool found = false;
      for (auto& s : syms) {
        if (src.compare(i, s.size(), s) == 0) {
          t.type = Token::Sym;
          t.text = s;
          adv(s.size());
          found = true;
          break;
        }
      }
      if (!found) throw parse_error(std::string("unexpected character '") + c + "'", line, col);
    }
    out.push_back(t);
  }
  Token end;
  end.type = Token::End;
  end.loc = {line, col};
  end.bol = true;
  out.push_back(end);
  return out;
}

struct RawDecl {
  enum Kind { DataDecl, CodataDecl, Sig, ClauseDecl } kind;
  std::string name;
  std::vector<std::pair<std::string, std::vector<std::string>>> ctors;  // data / codata
  std::vector<std::string> sig;                                          // param sorts..., result
  Clause clause;
  Loc loc;
};

class Parser {
 public:
  explicit Parser(const std::string& src) : toks_(lex(src)) {}

  std::vector<RawDecl> program() {
    std::vector<RawDecl> out;
    while (peek().type != Token::End) {
      if (!peek().bol) fail("declarations must start in column 1");
      out.push_back(decl());
    }
    return out;
  }

  ExprPtr single_expression() {
    ExprPtr e = expr();
    if (peek().type != Token::End) fail("trailing input");
    return e;
  }

 private:
  const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  Token next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool at_sym(const std::string& s) const {
    return peek().type == Token::Sym && peek().text == s && !(peek().bol && pos_ > decl_start_);
  }
  bool at_ident(const std::string& s) const { return peek().type == Token::Ident && peek().text == s; }
  // a token in column 1 begins the next declaration
  bool stop() const { return peek().type == Token::End || (peek().bol && pos_ > decl_start_); }

  [[noreturn]] void fail(const std::string& msg) const {
    const Token& t = peek();
    if (t.type == Token::End) throw parse_error(msg + " at end of input", t.loc.line, t.loc.col);
    if (stop()) throw parse_error(msg + " before end of declaration", t.loc.line, t.loc.col);
    throw parse_error(msg + " near '" + t.text + "'", t.loc.line, t.loc.col);
  }
  void expect_sym(const std::string& s) {
    if (!at_sym(s)) fail("expected '" + s + "'");
    next();
  }
  std::string ident() {
    if (stop() || peek().type != Token::Ident) fail("expected an identifier");
    return next().text;
  }

  RawDecl decl() {
    decl_start_ = pos_;
    RawDecl d;
    d.loc = peek().loc;
    if (at_ident("data") || at_ident("codata")) {
      bool codata = next().text == "codata";
      d.kind = codata ? RawDecl::CodataDecl : RawDecl::DataDecl;
      d.name = ident();
      expect_sym("=");
      do {
        std::string c = ident();
        std::vector<std::string> fields;
        while (!stop() && peek().type == Token::Ident) fields.push_back(next().text);
        if (!codata && !fields.empty()) fail("data constructors take no fields");
        d.ctors.emplace_back(c, fields);
      } while (at_sym("|") && (next(), true));
      if (!stop()) fail("unexpected token in sort declaration");
      return d;
    }
    d.name = ident();
    if (at_sym(":")) {
      next();
      d.kind = RawDecl::Sig;
      d.sig.push_back(ident());
      while (at_sym("->")) {
        next();
        d.sig.push_back(ident());
      }
      if (!stop()) fail("unexpected token in signature");
      return d;
    }
    d.kind = RawDecl::ClauseDecl;
    d.clause.loc = d.loc;
    while (!stop() && !at_sym("=") && !at_sym("|")) d.clause.patterns.push_back(apat());
    if (at_sym("=")) {
      next();
      d.clause.alts.push_back({nullptr, expr()});
    } else if (at_sym("|")) {
      while (at_sym("|")) {
        next();
        ExprPtr g = expr();
        expect_sym("=");
        d.clause.alts.push_back({g, expr()});
      }
    } else {
      fail("expected '=' or '|'");
    }
    if (!stop()) fail("unexpected token");
    return d;
  }

  Pattern apat() {
    Pattern p;
    p.loc = peek().loc;
    if (stop()) fail("expected a pattern");
    if (at_sym("(")) {
      next();
      p = pat();
      expect_sym(")");
      return p;
    }
    if (at_sym("-") && peek(1).type == Token::Int) {
      next();
      p.kind = Pattern::Int;
      p.value = -std::stoll(next().text);
      return p;
    }
    if (peek().type == Token::Int) {
      p.kind = Pattern::Int;
      p.value = std::stoll(next().text);
      return p;
    }
    if (peek().type == Token::Ident) {
      std::string n = next().text;
      if (n == "_") {
        p.kind = Pattern::Wild;
      } else {
        p.kind = Pattern::App;
        p.name = n;
      }
      return p;
    }
    fail("expected a pattern");
  }

  Pattern pat() {
    Pattern head;
    head.loc = peek().loc;
    if (peek().type == Token::Ident && peek().text != "_" && !stop()) {
      head.kind = Pattern::App;
      head.name = next().text;
      while (!stop() && (peek().type == Token::Ident || peek().type == Token::Int || at_sym("(")))
        head.args.push_back(apat());
    } else {
      head = apat();
    }
    if (at_sym(":")) {
      Loc l = peek().loc;
      next();
      Pattern c;
      c.kind = Pattern::Ctor;
      c.name = kCons;
      c.loc = l;
      c.args.push_back(head);
      c.args.push_back(pat());
      return c;
    }
    return head;
  }

  static ExprPtr mk(Expr::Kind k, std::string name, std::vector<ExprPtr> args, Loc l, std::int64_t v = 0) {
    auto e = std::make_shared<Expr>();
    e->kind = k;
    e->name = std::move(name);
    e->args = std::move(args);
    e->loc = l;
    e->value = v;
    return e;
  }

  ExprPtr expr() { return or_expr(); }

  ExprPtr or_expr() {
    ExprPtr l = and_expr();
    while (at_sym("||")) {
      Loc loc = next().loc;
      l = mk(Expr::BinOp, "||", {l, and_expr()}, loc);
    }
    return l;
  }
  ExprPtr and_expr() {
    ExprPtr l = cmp_expr();
    while (at_sym("&&")) {
      Loc loc = next().loc;
      l = mk(Expr::BinOp, "&&", {l, cmp_expr()}, loc);
    }
    return l;
  }
  ExprPtr cmp_expr() {
    ExprPtr l = cons_expr();
    for (auto op : {"==", "!=", "<=", ">=", "<", ">"}) {
      if (at_sym(op)) {
        Loc loc = next().loc;
        return mk(Expr::BinOp, op, {l, cons_expr()}, loc);
      }
    }
    return l;
  }
  ExprPtr cons_expr() {
    ExprPtr l = add_expr();
    if (at_sym(":")) {
      Loc loc = next().loc;
      return mk(Expr::Ctor, kCons, {l, cons_expr()}, loc);
    }
    return l;
  }
  ExprPtr add_expr() {
    ExprPtr l = mul_expr();
    while (at_sym("+") || at_sym("-")) {
      Token t = next();
      l = mk(Expr::BinOp, t.text, {l, mul_expr()}, t.loc);
    }
    return l;
  }
  ExprPtr mul_expr() {
    ExprPtr l = unary();
    while (at_sym("*")) {
      Loc loc = next().loc;
      l = mk(Expr::BinOp, "*", {l, unary()}, loc);
    }
    return l;
  }
  ExprPtr unary() {
    if (at_sym("-")) {
      Loc loc = next().loc;
      ExprPtr e = unary();
      if (e->kind == Expr::Int) return mk(Expr::Int, "", {}, loc, -e->value);
      return mk(Expr::BinOp, "-", {mk(Expr::Int, "", {}, loc, 0), e}, loc);
    }
    if (at_sym("!")) {
      Loc loc = next().loc;
      return mk(Expr::Not, "!", {unary()}, loc);
    }
    return app();
  }
  bool atom_start() const {
    if (stop()) return false;
    return peek().type == Token::Ident || peek().type == Token::Int || at_sym("(");
  }
  ExprPtr app() {
    if (!atom_start()) fail("expected an expression");
    if (peek().type == Token::Ident) {
      Token t = next();
      if (t.text == "otherwise" || t.text == "true") return mk(Expr::Bool, t.text, {}, t.loc, 1);
      if (t.text == "false") return mk(Expr::Bool, t.text, {}, t.loc, 0);
      std::vector<ExprPtr> args;
      while (atom_start()) args.push_back(atom());
      return mk(Expr::App, t.text, std::move(args), t.loc);
    }
    ExprPtr a = atom();
    if (atom_start()) fail("only named functions and constructors can be applied");
    return a;
  }
  ExprPtr atom() {
    if (at_sym("(")) {
      next();
      ExprPtr e = expr();
      expect_sym(")");
      return e;
    }
    Token t = next();
    if (t.type == Token::Int) return mk(Expr::Int, "", {}, t.loc, std::stoll(t.text));
    if (t.text == "otherwise" || t.text == "true") return mk(Expr::Bool, t.text, {}, t.loc, 1);
    if (t.text == "false") return mk(Expr::Bool, t.text, {}, t.loc, 0);
    return mk(Expr::App, t.text, {}, t.loc);
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::size_t decl_start_ = 0;
};

[[noreturn]] inline void sfail(const std::string& msg, Loc l) { throw sort_error(msg, l.line, l.col); }

inline void add_builtin_sorts(EquationSystem& eqs) {
  eqs.sorts[kInt] = {SortInfo::Data, kInt, {}};
  eqs.sorts[kBool] = {SortInfo::Boolean, kBool, {}};
  eqs.sorts[kStream] = {SortInfo::Codata, kStream, {kCons}};
  eqs.ctors[kCons] = {kCons, {kInt, kStream}, kStream};
}

using Scope = std::map<std::string, std::string>;  // variable -> sort ("" while unknown)

class Resolver {
 public:
  explicit Resolver(EquationSystem& eqs) : eqs_(eqs) {}

  Pattern pattern(const Pattern& p, std::set<std::string>& bound) {
    Pattern r = p;
    if (p.kind == Pattern::App) {
      auto c = eqs_.ctors.find(p.name);
      if (c != eqs_.ctors.end()) {
        r.kind = Pattern::Ctor;
        if (c->second.fields.size() != p.args.size())
          sfail("constructor '" + p.name + "' expects " + std::to_string(c->second.fields.size()) + " arguments",
                p.loc);
      } else {
        if (!p.args.empty()) sfail("unknown constructor '" + p.name + "' in pattern", p.loc);
        if (eqs_.defs.count(p.name)) sfail("'" + p.name + "' is a function, not a pattern variable", p.loc);
        r.kind = Pattern::Var;
        if (!bound.insert(p.name).second) sfail("nonlinear pattern: '" + p.name + "' bound twice", p.loc);
        return r;
      }
    }
    if (r.kind == Pattern::Ctor) {
      auto& ci = eqs_.ctors.at(r.name);
      if (ci.fields.size() != p.args.size())
        sfail("constructor '" + r.name + "' expects " + std::to_string(ci.fields.size()) + " arguments", p.loc);
      for (std::size_t i = 0; i < r.args.size(); ++i) r.args[i] = pattern(p.args[i], bound);
    }
    return r;
  }

  ExprPtr expr(const ExprPtr& e, const std::set<std::string>& bound) {
    auto r = std::make_shared<Expr>(*e);
    for (auto& a : r->args) a = expr(a, bound);
    if (e->kind == Expr::Ctor && e->name == kCons) return r;
    if (e->kind != Expr::App) return r;
    const std::string& n = e->name;
    std::size_t argc = r->args.size();
    if (bound.count(n)) {
      if (argc) sfail("variable '" + n + "' cannot be applied", e->loc);
      r->kind = Expr::Var;
      return r;
    }
    if (n == "hd" || n == "tl") {
      if (argc != 1) sfail("'" + n + "' expects 1 argument", e->loc);
      r->kind = Expr::Destr;
      r->name = kCons;
      r->field = n == "hd" ? 0 : 1;
      return r;
    }
    auto c = eqs_.ctors.find(n);
    if (c != eqs_.ctors.end()) {
      if (c->second.fields.size() != argc)
        sfail("constructor '" + n + "' expects " + std::to_string(c->second.fields.size()) + " arguments", e->loc);
      r->kind = Expr::Ctor;
      return r;
    }
    auto d = eqs_.defs.find(n);
    if (d != eqs_.defs.end()) {
      if (d->second.params.size() != argc)
        sfail("'" + n + "' expects " + std::to_string(d->second.params.size()) + " arguments, got " +
                  std::to_string(argc),
              e->loc);
      r->kind = Expr::Call;
      return r;
    }
    sfail("unknown identifier '" + n + "'", e->loc);
  }

 private:
  EquationSystem& eqs_;
};

inline bool arith_op(const std::string& op) { return op == "+" || op == "-" || op == "*"; }
inline bool order_op(const std::string& op) { return op == "<" || op == "<=" || op == ">" || op == ">="; }
inline bool eq_op(const std::string& op) { return op == "==" || op == "!="; }
inline bool bool_op(const std::string& op) { return op == "&&" || op == "||"; }

// Sort inference: propagate hints until nothing changes.
class SortInference {
 public:
  explicit SortInference(EquationSystem& eqs) : eqs_(eqs) {}

  void run() {
    bool changed = true;
    while (changed) {
      changed = false;
      for (auto& name : eqs_.order) {
        Definition& d = eqs_.defs.at(name);
        for (auto& cl : d.clauses) changed |= clause(d, cl);
      }
      // a result that nothing constrains defaults to Stream
      if (!changed)
        for (auto& name : eqs_.order)
          changed |= set(eqs_.defs.at(name).result, kStream);
    }
    for (auto& name : eqs_.order) {
      Definition& d = eqs_.defs.at(name);
      for (std::size_t i = 0; i < d.params.size(); ++i)
        if (d.params[i].empty())
          sfail("cannot infer the sort of parameter " + std::to_string(i + 1) + " of '" + name +
                    "'; add a signature",
                d.loc);
      if (d.result.empty()) sfail("cannot infer the result sort of '" + name + "'; add a signature", d.loc);
    }
  }

  // scope of a clause from its patterns, using current parameter sorts
  Scope scope(const Definition& d, const Clause& cl) const {
    Scope s;
    for (std::size_t i = 0; i < cl.patterns.size(); ++i) bind(cl.patterns[i], d.params[i], s);
    return s;
  }

  std::string infer(const ExprPtr& e, const Scope& s) const {
    switch (e->kind) {
      case Expr::Var: {
        auto it = s.find(e->name);
        return it == s.end() ? "" : it->second;
      }
      case Expr::Int:
        return kInt;
      case Expr::Bool:
      case Expr::Not:
        return kBool;
      case Expr::Ctor:
        return eqs_.ctors.at(e->name).sort;
      case Expr::Call:
        return eqs_.defs.at(e->name).result;
      case Expr::Destr:
        return eqs_.ctors.at(e->name).fields[e->field];
      case Expr::BinOp:
        return arith_op(e->name) ? kInt : kBool;
      default:
        return "";
    }
  }

 private:
  void bind(const Pattern& p, const std::string& sort, Scope& s) const {
    switch (p.kind) {
      case Pattern::Var:
        s[p.name] = sort;
        break;
      case Pattern::Ctor: {
        auto& ci = eqs_.ctors.at(p.name);
        for (std::size_t i = 0; i < p.args.size(); ++i) bind(p.args[i], ci.fields[i], s);
        break;
      }
      default:
        break;
    }
  }

  static std::string pattern_sort(const EquationSystem& eqs, const Pattern& p) {
    if (p.kind == Pattern::Ctor) return eqs.ctors.at(p.name).sort;
    if (p.kind == Pattern::Int) return kInt;
    return "";
  }

  bool set(std::string& slot, const std::string& v) {
    if (!slot.empty() || v.empty()) return false;
    slot = v;
    return true;
  }

  bool clause(Definition& d, Clause& cl) {
    bool changed = false;
    for (std::size_t i = 0; i < cl.patterns.size(); ++i) changed |= set(d.params[i], pattern_sort(eqs_, cl.patterns[i]));
    Scope s = scope(d, cl);
    std::map<std::string, std::string> hints;
    for (auto& a : cl.alts) {
      if (a.guard) hint(a.guard, kBool, s, hints);
      hint(a.rhs, d.result, s, hints);
      if (d.result.empty()) changed |= set(d.result, infer(a.rhs, s));
    }
    for (std::size_t i = 0; i < cl.patterns.size(); ++i) {
      if (cl.patterns[i].kind == Pattern::Var && d.params[i].empty()) {
        auto h = hints.find(cl.patterns[i].name);
        if (h != hints.end()) changed |= set(d.params[i], h->second);
      }
    }
    return changed;
  }

  void hint(const ExprPtr& e, const std::string& expected, const Scope& s,
            std::map<std::string, std::string>& hints) const {
    switch (e->kind) {
      case Expr::Var:
        if (!expected.empty()) hints.emplace(e->name, expected);
        break;
      case Expr::Ctor: {
        auto& ci = eqs_.ctors.at(e->name);
        for (std::size_t i = 0; i < e->args.size(); ++i) hint(e->args[i], ci.fields[i], s, hints);
        break;
      }
      case Expr::Call: {
        auto& d = eqs_.defs.at(e->name);
        for (std::size_t i = 0; i < e->args.size(); ++i) hint(e->args[i], d.params[i], s, hints);
        break;
      }
      case Expr::Destr:
        hint(e->args[0], eqs_.ctors.at(e->name).sort, s, hints);
        break;
      case Expr::BinOp:
        if (arith_op(e->name) || order_op(e->name)) {
          for (auto& a : e->args) hint(a, kInt, s, hints);
        } else if (bool_op(e->name)) {
          for (auto& a : e->args) hint(a, kBool, s, hints);
        } else {
          std::string l = infer(e->args[0], s), r = infer(e->args[1], s);
          hint(e->args[0], r, s, hints);
          hint(e->args[1], l, s, hints);
        }
        break;
      case Expr::Not:
        hint(e->args[0], kBool, s, hints);
        break;
      default:
        break;
    }
  }

  EquationSystem& eqs_;
};

class SortChecker {
 public:
  explicit SortChecker(const EquationSystem& eqs) : eqs_(eqs) {}

  std::string check(const ExprPtr& e, const Scope& s) const {
    switch (e->kind) {
      case Expr::Var: {
        auto it = s.find(e->name);
        if (it == s.end()) sfail("unbound variable '" + e->name + "'", e->loc);
        return it->second;
      }
      case Expr::Int:
        return kInt;
      case Expr::Bool:
        return kBool;
      case Expr::Ctor: {
        auto& ci = eqs_.ctors.at(e->name);
        for (std::size_t i = 0; i < e->args.size(); ++i) expect(e->args[i], ci.fields[i], s);
        return ci.sort;
      }
      case Expr::Call: {
        auto& d = eqs_.defs.at(e->name);
        for (std::size_t i = 0; i < e->args.size(); ++i) expect(e->args[i], d.params[i], s);
        return d.result;
      }
      case Expr::Destr:
        expect(e->args[0], eqs_.ctors.at(e->name).sort, s);
        return eqs_.ctors.at(e->name).fields[e->field];
      case Expr::Not:
        expect(e->args[0], kBool, s);
        return kBool;
      case Expr::BinOp: {
        const std::string& op = e->name;
        if (arith_op(op) || order_op(op)) {
          expect(e->args[0], kInt, s);
          expect(e->args[1], kInt, s);
          return arith_op(op) ? kInt : kBool;
        }
        if (bool_op(op)) {
          expect(e->args[0], kBool, s);
          expect(e->args[1], kBool, s);
          return kBool;
        }
        std::string l = check(e->args[0], s);
        expect(e->args[1], l, s);
        if (eqs_.is_codata(l)) sfail("cannot compare values of codata sort " + l, e->loc);
        return kBool;
      }
      case Expr::App:
        sfail("unresolved application", e->loc);
    }
    return "";
  }

  void expect(const ExprPtr& e, const std::string& sort, const Scope& s) const {
    std::string got = check(e, s);
    if (got != sort) sfail("expected sort " + sort + ", found " + got, e->loc);
  }

 private:
  const EquationSystem& eqs_;
};

}  // namespace detail

// Grammar summary (see README):
//   data Color = Red | Green
//   codata Lam = var Int | app Lam Lam
//   f : Stream -> Stream
//   f (x : t) = x : f t
//   g (x : t) | x > 0 = ... | otherwise = ...
inline EquationSystem parse_defs(const std::string& text) {
  detail::Parser parser(text);
  auto decls = parser.program();
  EquationSystem eqs;
  detail::add_builtin_sorts(eqs);
  std::map<std::string, std::vector<std::string>> sigs;
  std::map<std::string, Loc> sig_locs;
  // sorts first so that constructors can refer to later declarations
  for (auto& d : decls) {
    if (d.kind != detail::RawDecl::DataDecl && d.kind != detail::RawDecl::CodataDecl) continue;
    if (eqs.sorts.count(d.name)) detail::sfail("sort '" + d.name + "' declared twice", d.loc);
    eqs.sorts[d.name] = {d.kind == detail::RawDecl::CodataDecl ? SortInfo::Codata : SortInfo::Data, d.name, {}};
  }
  for (auto& d : decls) {
    if (d.kind != detail::RawDecl::DataDecl && d.kind != detail::RawDecl::CodataDecl) continue;
    for (auto& [c, fields] : d.ctors) {
      if (eqs.ctors.count(c)) detail::sfail("constructor '" + c + "' declared twice", d.loc);
      for (auto& f : fields)
        if (!eqs.sorts.count(f) || f == kBool) detail::sfail("unknown sort '" + f + "'", d.loc);
      eqs.ctors[c] = {c, fields, d.name};
      eqs.sorts[d.name].ctors.push_back(c);
    }
  }
  for (auto& d : decls) {
    if (d.kind == detail::RawDecl::Sig) {
      if (sigs.count(d.name)) detail::sfail("duplicate signature for '" + d.name + "'", d.loc);
      for (auto& s : d.sig)
        if (!eqs.sorts.count(s) || s == kBool) detail::sfail("unknown sort '" + s + "'", d.loc);
      sigs[d.name] = d.sig;
      sig_locs[d.name] = d.loc;
    } else if (d.kind == detail::RawDecl::ClauseDecl) {
      if (eqs.ctors.count(d.name) || d.name == "hd" || d.name == "tl")
        detail::sfail("'" + d.name + "' is reserved", d.loc);
      auto it = eqs.defs.find(d.name);
      if (it == eqs.defs.end()) {
        Definition def;
        def.name = d.name;
        def.loc = d.loc;
        def.params.assign(d.clause.patterns.size(), "");
        it = eqs.defs.emplace(d.name, def).first;
        eqs.order.push_back(d.name);
      } else if (it->second.params.size() != d.clause.patterns.size()) {
        detail::sfail("clauses of '" + d.name + "' have different numbers of patterns", d.loc);
      }
      it->second.clauses.push_back(d.clause);
    }
  }
  for (auto& [name, sig] : sigs) {
    auto it = eqs.defs.find(name);
    if (it == eqs.defs.end()) detail::sfail("signature without definition for '" + name + "'", sig_locs[name]);
    if (sig.size() != it->second.params.size() + 1)
      detail::sfail("signature of '" + name + "' does not match its clauses", sig_locs[name]);
    it->second.params.assign(sig.begin(), sig.end() - 1);
    it->second.result = sig.back();
    it->second.has_signature = true;
  }
  detail::Resolver res(eqs);
  for (auto& name : eqs.order) {
    Definition& d = eqs.defs.at(name);
    for (auto& cl : d.clauses) {
      std::set<std::string> bound;
      for (auto& p : cl.patterns) p = res.pattern(p, bound);
      for (auto& a : cl.alts) {
        if (a.guard) a.guard = res.expr(a.guard, bound);
        a.rhs = res.expr(a.rhs, bound);
      }
    }
  }
  detail::SortInference inf(eqs);
  inf.run();
  detail::SortChecker chk(eqs);
  for (auto& name : eqs.order) {
    const Definition& d = eqs.defs.at(name);
    if (!eqs.is_codata(d.result))
      detail::sfail("'" + name + "' must produce a codata sort, not " + d.result, d.loc);
    for (auto& cl : d.clauses) {
      for (std::size_t i = 0; i < cl.patterns.size(); ++i) {
        const Pattern& p = cl.patterns[i];
        if (p.kind == Pattern::Ctor && eqs.ctors.at(p.name).sort != d.params[i])
          detail::sfail("pattern of sort " + eqs.ctors.at(p.name).sort + " for parameter of sort " + d.params[i],
                        p.loc);
        if (p.kind == Pattern::Int && d.params[i] != kInt) detail::sfail("integer pattern for non-Int parameter", p.loc);
      }
      std::function<void(const Pattern&, const std::string&)> inner = [&](const Pattern& p, const std::string& s) {
        if (p.kind == Pattern::Int && s != kInt) detail::sfail("integer pattern at sort " + s, p.loc);
        if (p.kind != Pattern::Ctor) return;
        auto& ci = eqs.ctors.at(p.name);
        if (ci.sort != s) detail::sfail("constructor '" + p.name + "' is not of sort " + s, p.loc);
        for (std::size_t k = 0; k < p.args.size(); ++k) inner(p.args[k], ci.fields[k]);
      };
      for (std::size_t i = 0; i < cl.patterns.size(); ++i) inner(cl.patterns[i], d.params[i]);
      detail::Scope s = inf.scope(d, cl);
      for (auto& a : cl.alts) {
        if (a.guard) chk.expect(a.guard, kBool, s);
        chk.expect(a.rhs, d.result, s);
      }
    }
  }
  return eqs;
}

// Parses a closed expression against the definitions of eqs.
inline ExprPtr parse_expression(const EquationSystem& eqs, const std::string& text) {
  detail::Parser p(text);
  ExprPtr raw = p.single_expression();
  EquationSystem copy = eqs;
  detail::Resolver res(copy);
  ExprPtr e = res.expr(raw, {});
  detail::SortChecker chk(eqs);
  std::string s = chk.check(e, {});
  if (!eqs.is_codata(s)) throw sort_error("expression must have a codata sort, found " + s, 1, 1);
  return e;
}

inline std::size_t pattern_depth(const Pattern& p) {
  if (p.kind != Pattern::Ctor) return 0;
  std::size_t d = 0;
  for (auto& a : p.args) d = std::max(d, pattern_depth(a));
  return d + 1;
}

inline std::size_t pattern_depth(const Definition& d) {
  std::size_t r = 0;
  for (auto& c : d.clauses)
    for (auto& p : c.patterns) r = std::max(r, pattern_depth(p));
  return r;
}

inline std::string to_string(const ExprPtr& e) {
  switch (e->kind) {
    case Expr::Var:
      return e->name;
    case Expr::Int:
      return std::to_string(e->value);
    case Expr::Bool:
      return e->value ? "true" : "false";
    case Expr::Destr:
      return std::string(e->field == 0 && e->name == kCons ? "hd" : e->name == kCons ? "tl" : e->name + "." +
                                                                                                 std::to_string(e->field)) +
             " (" + to_string(e->args[0]) + ")";
    case Expr::BinOp:
      return "(" + to_string(e->args[0]) + " " + e->name + " " + to_string(e->args[1]) + ")";
    case Expr::Not:
      return "!" + to_string(e->args[0]);
    default: {
      if (e->kind == Expr::Ctor && e->name == kCons)
        return "(" + to_string(e->args[0]) + " : " + to_string(e->args[1]) + ")";
      std::string s = e->name;
      for (auto& a : e->args) s += " " + (a->args.empty() ? to_string(a) : "(" + to_string(a) + ")");
      return e->args.empty() ? s : "(" + s + ")";
    }
  }
}

// ---------------------------------------------------------------------------
// Production functions

namespace detail {

// strongly connected components of the call graph; comp[name] = component id
inline std::map<std::string, std::size_t> call_components(const EquationSystem& eqs,
                                                          std::set<std::string>* recursive = nullptr) {
  std::map<std::string, std::set<std::string>> edges;
  std::function<void(const ExprPtr&, std::set<std::string>&)> calls = [&](const ExprPtr& e,
                                                                         std::set<std::string>& out) {
    if (e->kind == Expr::Call) out.insert(e->name);
    for (auto& a : e->args) calls(a, out);
  };
  for (auto& n : eqs.order)
    for (auto& cl : eqs.defs.at(n).clauses)
      for (auto& a : cl.alts) {
        calls(a.rhs, edges[n]);
        if (a.guard) calls(a.guard, edges[n]);
      }
  std::map<std::string, std::size_t> index, low, comp;
  std::vector<std::string> stack;
  std::set<std::string> on;
  std::size_t counter = 0, ncomp = 0;
  std::function<void(const std::string&)> strong = [&](const std::string& v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on.insert(v);
    for (auto& w : edges[v]) {
      if (!index.count(w)) {
        strong(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on.count(w)) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<std::string> members;
      std::string w;
      do {
        w = stack.back();
        stack.pop_back();
        on.erase(w);
        comp[w] = ncomp;
        members.push_back(w);
      } while (w != v);
      if (recursive && (members.size() > 1 || edges[v].count(v)))
        for (auto& m : members) recursive->insert(m);
      ++ncomp;
    }
  };
  for (auto& n : eqs.order)
    if (!index.count(n)) strong(n);
  return comp;
}

class PFBuilder {
 public:
  // prefix mode: inputs are fully defined and calls into `group` become variables
  PFBuilder(const EquationSystem& eqs, const Definition& def, std::optional<std::set<std::string>> group)
      : eqs_(eqs), def_(def), group_(std::move(group)) {
    auto cp = eqs.codata_params(def);
    for (std::size_t k = 0; k < cp.size(); ++k) proj_of_param_[cp[k]] = k;
  }

  pf::ExprPtr body() {
    std::vector<pf::ExprPtr> branches, conditions;
    for (auto& cl : def_.clauses) {
      std::map<std::string, pf::ExprPtr> env;
      std::vector<pf::ExprPtr> conds;
      for (std::size_t i = 0; i < cl.patterns.size(); ++i) pattern(cl.patterns[i], def_.params[i], base(i), 0, env, conds);
      for (auto& a : cl.alts) {
        for (auto& c : conds) conditions.push_back(c);
        if (a.guard) conditions.push_back(pf::threshold(size(a.guard, env), 0, pf::constant(1), pf::constant(0)));
        branches.push_back(size(a.rhs, env));
      }
    }
    return pf::cases_expr(branches, conditions);
  }

  std::size_t variables() const { return keys_.size(); }
  const std::vector<std::string>& call_keys() const { return keys_; }

 private:
  static pf::ExprPtr inf() { return pf::constant(ExtNat::inf()); }
  static pf::ExprPtr defined(pf::ExprPtr e) { return pf::threshold(std::move(e), 0, inf(), pf::constant(0)); }

  pf::ExprPtr base(std::size_t param) const {
    if (group_ || !eqs_.is_codata(def_.params[param])) return inf();
    return pf::proj(proj_of_param_.at(param));
  }

  void pattern(const Pattern& p, const std::string& sort, const pf::ExprPtr& b, std::uint64_t depth,
               std::map<std::string, pf::ExprPtr>& env, std::vector<pf::ExprPtr>& conds) {
    bool codata = eqs_.is_codata(sort);
    switch (p.kind) {
      case Pattern::Var:
        if (codata)
          env[p.name] = pf::monus(b, depth);
        else
          env[p.name] = depth == 0 ? b : defined(pf::monus(b, depth - 1));
        break;
      case Pattern::Wild:
        break;
      case Pattern::Int:
        if (depth > 0) conds.push_back(pf::threshold(b, depth - 1, pf::constant(1), pf::constant(0)));
        break;
      case Pattern::Ctor: {
        if (!codata) {
          if (depth > 0) conds.push_back(pf::threshold(b, depth - 1, pf::constant(1), pf::constant(0)));
          break;
        }
        // the root test always; nested tests only where they discriminate
        if (depth == 0 || eqs_.sorts.at(sort).ctors.size() > 1)
          conds.push_back(pf::threshold(b, depth, pf::constant(1), pf::constant(0)));
        auto& ci = eqs_.ctors.at(p.name);
        for (std::size_t i = 0; i < p.args.size(); ++i) pattern(p.args[i], ci.fields[i], b, depth + 1, env, conds);
        break;
      }
      case Pattern::App:
        throw unsupported_construct("unresolved pattern");
    }
  }

  pf::ExprPtr size(const ExprPtr& e, const std::map<std::string, pf::ExprPtr>& env) {
    switch (e->kind) {
      case Expr::Var:
        return env.at(e->name);
      case Expr::Int:
      case Expr::Bool:
        return inf();
      case Expr::Ctor: {
        auto& ci = eqs_.ctors.at(e->name);
        if (!eqs_.is_codata(ci.sort) || e->args.empty()) return inf();
        std::vector<pf::ExprPtr> parts;
        for (auto& a : e->args) parts.push_back(size(a, env));
        return pf::plus(pf::minimum(parts), 1);
      }
      case Expr::Call: {
        if (group_ && group_->count(e->name)) {
          std::string key = to_string(e);
          auto it = std::find(keys_.begin(), keys_.end(), key);
          std::size_t idx = it - keys_.begin();
          if (it == keys_.end()) keys_.push_back(key);
          return pf::proj(idx);
        }
        const Definition& g = eqs_.def(e->name);
        std::vector<pf::ExprPtr> args;
        for (auto i : eqs_.codata_params(g)) args.push_back(size(e->args[i], env));
        return pf::call(e->name, args);
      }
      case Expr::Destr: {
        auto& ci = eqs_.ctors.at(e->name);
        pf::ExprPtr inner = size(e->args[0], env);
        if (eqs_.is_codata(ci.fields[e->field])) return pf::monus(inner, 1);
        return defined(inner);
      }
      case Expr::BinOp:
      case Expr::Not: {
        std::vector<pf::ExprPtr> parts;
        for (auto& a : e->args) parts.push_back(size(a, env));
        return defined(pf::minimum(parts));
      }
      case Expr::App:
        break;
    }
    throw unsupported_construct("cannot derive a production function for '" + to_string(e) + "'");
  }

  const EquationSystem& eqs_;
  const Definition& def_;
  std::optional<std::set<std::string>> group_;
  std::map<std::size_t, std::size_t> proj_of_param_;
  std::vector<std::string> keys_;
};

}  // namespace detail

// One equation per definition, over the sizes of its codata parameters.
inline pf::PFSystem derive_pf(const EquationSystem& eqs) {
  pf::PFSystem sys;
  for (auto& n : eqs.order) {
    const Definition& d = eqs.defs.at(n);
    detail::PFBuilder b(eqs, d, std::nullopt);
    sys.define(n, eqs.codata_params(d).size(), b.body());
  }
  sys.validate();
  return sys;
}

struct PrefixPF {
  pf::ProdFun xi;
  std::vector<std::string> call_keys;  // variable i stands for the size of call_keys[i]
  bool recursive = false;
};

// Local prefix production function: inputs fully defined, each distinct
// recursive call of the definition's call-graph component is a variable.
inline PrefixPF derive_prefix_pf(const EquationSystem& eqs, const std::string& name) {
  std::set<std::string> rec;
  auto comp = detail::call_components(eqs, &rec);
  const Definition& d = eqs.def(name);
  std::set<std::string> group;
  for (auto& [n, c] : comp)
    if (c == comp.at(name) && rec.count(n)) group.insert(n);
  detail::PFBuilder b(eqs, d, group);
  PrefixPF r;
  r.xi.body = b.body();
  r.xi.arity = b.variables();
  r.call_keys = b.call_keys();
  r.recursive = rec.count(name) > 0;
  return r;
}

// ---------------------------------------------------------------------------
// Guardedness

namespace detail {

inline bool mentions(const ExprPtr& e, const std::set<std::string>& group) {
  if (e->kind == Expr::Call && group.count(e->name)) return true;
  for (auto& a : e->args)
    if (mentions(a, group)) return true;
  return false;
}

inline bool non_consuming(const ExprPtr& e, const std::set<std::string>& group, const EquationSystem& eqs);

inline bool constructor_guarded(const ExprPtr& e, const std::set<std::string>& group, const EquationSystem& eqs) {
  if (e->kind != Expr::Ctor || !eqs.is_codata(eqs.ctors.at(e->name).sort)) return false;
  for (auto& a : e->args)
    if (!non_consuming(a, group, eqs)) return false;
  return true;
}

inline bool non_consuming(const ExprPtr& e, const std::set<std::string>& group, const EquationSystem& eqs) {
  if (!mentions(e, group)) return true;
  if (e->kind == Expr::Var) return true;
  if (e->kind == Expr::Call && group.count(e->name)) {
    for (auto& a : e->args)
      if (mentions(a, group)) return false;
    return true;
  }
  return constructor_guarded(e, group, eqs);
}

inline bool pattern_only(const ExprPtr& e) {
  if (e->kind == Expr::Call || e->kind == Expr::Destr) return false;
  for (auto& a : e->args)
    if (!pattern_only(a)) return false;
  return true;
}

}  // namespace detail

// A clause body is fine if it makes no recursive call at all, or is a
// constructor whose arguments are non-consuming.
inline std::map<std::string, bool> check_guarded(const EquationSystem& eqs) {
  std::set<std::string> rec;
  auto comp = detail::call_components(eqs, &rec);
  std::map<std::string, bool> out;
  for (auto& n : eqs.order) {
    std::set<std::string> group;
    for (auto& [m, c] : comp)
      if (c == comp.at(n) && rec.count(m)) group.insert(m);
    bool ok = true;
    for (auto& cl : eqs.defs.at(n).clauses) {
      for (auto& a : cl.alts) {
        if (a.guard && !detail::pattern_only(a.guard)) ok = false;
        if (detail::mentions(a.rhs, group) && !detail::constructor_guarded(a.rhs, group, eqs)) ok = false;
      }
    }
    out[n] = ok;
  }
  return out;
}

struct DefinitionVerdict {
  std::string name;
  pf::ProductivityVerdict verdict;
  PrefixPF prefix;
};

// guarded definitions report `guarded`; the rest go through the prefix function
inline std::vector<DefinitionVerdict> check_definitions(const EquationSystem& eqs, std::uint64_t N = 64,
                                                        std::size_t K = 256) {
  auto guarded = check_guarded(eqs);
  pf::PFSystem sys = derive_pf(eqs);
  std::vector<DefinitionVerdict> out;
  for (auto& n : eqs.order) {
    DefinitionVerdict v;
    v.name = n;
    v.prefix = derive_prefix_pf(eqs, n);
    if (guarded.at(n)) {
      v.verdict.status = pf::Status::guarded;
      v.verdict.sample_bound = N;
      v.verdict.iteration_cap = K;
    } else {
      v.verdict = pf::check_productivity(v.prefix.xi, sys, N, K);
    }
    out.push_back(std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation by Kleene iteration on approximants

struct Value;
using ValuePtr = std::shared_ptr<const Value>;  // null is bottom

struct Value {
  enum Kind { Int, Bool, Ctor } kind = Int;
  std::int64_t i = 0;
  std::string label;
  std::vector<ValuePtr> kids;
};

inline ApproxTree to_tree(const ValuePtr& v) {
  if (!v) return ApproxTree::bot();
  if (v->kind == Value::Int) return ApproxTree::node(std::to_string(v->i));
  if (v->kind == Value::Bool) return ApproxTree::node(v->i ? "true" : "false");
  ApproxTree t = ApproxTree::node(v->label);
  for (auto& k : v->kids) t.children.push_back(to_tree(k));
  return t;
}

class Evaluator : public std::enable_shared_from_this<Evaluator> {
 public:
  explicit Evaluator(EquationSystem eqs) : eqs_(std::move(eqs)) {}

  const EquationSystem& system() const { return eqs_; }

  // a nullary definition name or a closed expression
  ExprPtr target(const std::string& name_or_expr) const {
    auto it = eqs_.defs.find(name_or_expr);
    if (it != eqs_.defs.end() && it->second.params.empty()) {
      auto e = std::make_shared<Expr>();
      e->kind = Expr::Call;
      e->name = name_or_expr;
      return e;
    }
    return parse_expression(eqs_, name_or_expr);
  }

  std::string sort_of(const ExprPtr& e) const { return detail::SortChecker(eqs_).check(e, {}); }

  // value of a closed expression when every call uses the level-th iterate
  ValuePtr value(const ExprPtr& e, std::size_t level) {
    Env env;
    return eval(e, env, level);
  }

  // k-th iterate of f at argument values
  ValuePtr apply(std::size_t level, const std::string& f, const std::vector<ValuePtr>& args) {
    if (level == 0) return nullptr;
    if (memo_.size() <= level) memo_.resize(level + 1);
    std::string key = f;
    for (auto& a : args) key += "|" + std::to_string(reinterpret_cast<std::uintptr_t>(a.get()));
    auto it = memo_[level].find(key);
    if (it != memo_[level].end()) return it->second;
    ValuePtr r = unfold(level, f, args);
    memo_[level].emplace(std::move(key), r);
    return r;
  }

  std::size_t memo_entries() const {
    std::size_t n = 0;
    for (auto& m : memo_) n += m.size();
    return n;
  }

  // Coterm view: f(p) is read off the first level at which p is defined.
  Coterm coterm(const ExprPtr& e, std::size_t iter_cap) {
    auto self = shared_from_this();
    auto step = [self, e, iter_cap](const Position& p) {
      for (std::size_t k = 1; k <= iter_cap; ++k) {
        ValuePtr v = self->value(e, k);
        for (auto i : p) {
          if (!v) break;
          v = v->kids.at(i);
        }
        if (!v) continue;
        std::string label = v->kind == Value::Int ? std::to_string(v->i) : v->label;
        std::vector<Position> kids;
        for (std::size_t i = 0; i < v->kids.size(); ++i) {
          kids.push_back(p);
          kids.back().push_back(i);
        }
        return std::make_pair(label, kids);
      }
      throw insufficient_iterations("position " + coind::to_string(p) + " still undefined after " +
                                        std::to_string(iter_cap) + " iterations",
                                    to_tree(self->value(e, iter_cap)), iter_cap);
    };
    struct PH {
      std::size_t operator()(const Position& p) const {
        std::size_t h = p.size();
        for (auto i : p) h = h * 1000003 + i;
        return h;
      }
    };
    return Coterm::unfold<Position, decltype(step), PH>(sort_of(e), Position{}, step, eqs_.signature());
  }

 private:
  using Env = std::map<std::string, ValuePtr>;

  // hash-consed, so equal values share one pointer
  ValuePtr make(Value::Kind kind, std::int64_t i, const std::string& label, std::vector<ValuePtr> kids) {
    std::string key = std::to_string(static_cast<int>(kind)) + "|" + std::to_string(i) + "|" + label;
    for (auto& k : kids) key += "|" + std::to_string(reinterpret_cast<std::uintptr_t>(k.get()));
    auto it = values_.find(key);
    if (it != values_.end()) return it->second;
    auto v = std::make_shared<Value>();
    v->kind = kind;
    v->i = i;
    v->label = label;
    v->kids = std::move(kids);
    values_.emplace(std::move(key), v);
    return v;
  }

  ValuePtr apply_op(const std::string& op, const std::vector<ValuePtr>& a) {
    if (op == "!") return make(Value::Bool, !a[0]->i, "", {});
    std::int64_t x = a[0]->i, y = a[1]->i, r = 0;
    if (op == "+" || op == "-" || op == "*") {
      bool ovf = op == "+" ? __builtin_add_overflow(x, y, &r)
                 : op == "-" ? __builtin_sub_overflow(x, y, &r)
                             : __builtin_mul_overflow(x, y, &r);
      if (ovf) throw eval_error("integer overflow in " + std::to_string(x) + " " + op + " " + std::to_string(y));
      return make(Value::Int, r, "", {});
    }
    bool b;
    if (op == "==") b = a[0] == a[1];
    else if (op == "!=") b = a[0] != a[1];
    else if (op == "<") b = x < y;
    else if (op == "<=") b = x <= y;
    else if (op == ">") b = x > y;
    else if (op == ">=") b = x >= y;
    else if (op == "&&") b = x && y;
    else if (op == "||") b = x || y;
    else throw eval_error("unknown operator " + op);
    return make(Value::Bool, b, "", {});
  }

  ValuePtr eval(const ExprPtr& e, const Env& env, std::size_t level) {
    switch (e->kind) {
      case Expr::Var:
        return env.at(e->name);
      case Expr::Int:
        return make(Value::Int, e->value, "", {});
      case Expr::Bool:
        return make(Value::Bool, e->value, "", {});
      case Expr::Ctor: {
        std::vector<ValuePtr> kids;
        for (auto& a : e->args) kids.push_back(eval(a, env, level));
        // data constructors are strict
        if (!eqs_.is_codata(eqs_.ctors.at(e->name).sort))
          for (auto& k : kids)
            if (!k) return nullptr;
        return make(Value::Ctor, 0, e->name, std::move(kids));
      }
      case Expr::Destr: {
        ValuePtr v = eval(e->args[0], env, level);
        if (!v) return nullptr;
        if (v->label != e->name) throw eval_error("destructor of '" + e->name + "' applied to '" + v->label + "'");
        return v->kids.at(e->field);
      }
      case Expr::BinOp:
      case Expr::Not: {
        std::vector<ValuePtr> vs;
        for (auto& a : e->args) {
          vs.push_back(eval(a, env, level));
          if (!vs.back()) return nullptr;
        }
        return apply_op(e->name, vs);
      }
      case Expr::Call: {
        if (level == 0) return nullptr;
        std::vector<ValuePtr> args;
        for (auto& a : e->args) args.push_back(eval(a, env, level));
        return apply(level, e->name, args);
      }
      case Expr::App:
        break;
    }
    throw eval_error("unresolved expression");
  }

  enum class Match { Ok, Fail, Bottom };

  static Match match(const Pattern& p, const ValuePtr& v, Env& env) {
    switch (p.kind) {
      case Pattern::Var:
        env[p.name] = v;
        return Match::Ok;
      case Pattern::Wild:
        return Match::Ok;
      case Pattern::Int:
        if (!v) return Match::Bottom;
        return v->i == p.value ? Match::Ok : Match::Fail;
      case Pattern::Ctor: {
        if (!v) return Match::Bottom;
        if (v->label != p.name) return Match::Fail;
        for (std::size_t i = 0; i < p.args.size(); ++i) {
          Match m = match(p.args[i], v->kids[i], env);
          if (m != Match::Ok) return m;
        }
        return Match::Ok;
      }
      default:
        throw eval_error("unresolved pattern");
    }
  }

  ValuePtr unfold(std::size_t level, const std::string& f, const std::vector<ValuePtr>& args) {
    const Definition& d = eqs_.def(f);
    for (auto& cl : d.clauses) {
      Env env;
      Match m = Match::Ok;
      for (std::size_t i = 0; i < cl.patterns.size() && m == Match::Ok; ++i) m = match(cl.patterns[i], args[i], env);
      if (m == Match::Bottom) return nullptr;
      if (m == Match::Fail) continue;
      for (auto& a : cl.alts) {
        if (a.guard) {
          ValuePtr g = eval(a.guard, env, level - 1);
          if (!g) return nullptr;
          if (!g->i) continue;
        }
        return eval(a.rhs, env, level - 1);
      }
    }
    std::string shown;
    for (auto& a : args) shown += " " + to_text(to_tree(a));
    throw eval_error("no clause of '" + f + "' matches" + shown);
  }

  EquationSystem eqs_;
  std::unordered_map<std::string, ValuePtr> values_;
  std::vector<std::unordered_map<std::string, ValuePtr>> memo_;
};

namespace detail {

// true when the first L heads of a stream value are defined
inline bool stream_prefix(const ValuePtr& v, std::size_t L, std::vector<std::int64_t>& out) {
  out.clear();
  ValuePtr cur = v;
  while (out.size() < L) {
    if (!cur || !cur->kids[0]) return false;
    out.push_back(cur->kids[0]->i);
    cur = cur->kids[1];
  }
  return true;
}

inline bool has_nullary(const EquationSystem& eqs, const std::string& sort) {
  auto it = eqs.sorts.find(sort);
  if (it == eqs.sorts.end() || it->second.kind != SortInfo::Codata) return true;
  for (auto& c : it->second.ctors)
    if (eqs.ctors.at(c).fields.empty()) return true;
  return false;
}

// every node of t|n is determined by v
inline bool complete_to(const EquationSystem& eqs, const ValuePtr& v, const std::string& /*sort*/, std::size_t n) {
  if (n == 0) return true;
  if (!v) return false;
  if (v->kind != Value::Ctor) return true;
  const CtorInfo& ci = eqs.ctors.at(v->label);
  for (std::size_t i = 0; i < v->kids.size(); ++i) {
    const std::string& fs = ci.fields[i];
    if (n == 1) {
      if (!v->kids[i] && has_nullary(eqs, fs)) return false;
    } else if (!complete_to(eqs, v->kids[i], fs, n - 1)) {
      return false;
    }
  }
  return true;
}

}  // namespace detail

struct PrefixResult {
  std::vector<std::int64_t> values;
  std::size_t levels = 0;
};

inline PrefixResult evaluate_prefix_ex(const EquationSystem& eqs, const std::string& name_or_expr, std::size_t L,
                                       std::size_t iter_cap) {
  auto ev = std::make_shared<Evaluator>(eqs);
  ExprPtr node = ev->target(name_or_expr);
  if (ev->sort_of(node) != kStream) throw std::invalid_argument("evaluate_prefix expects a stream");
  PrefixResult r;
  for (std::size_t k = 0; k <= iter_cap; ++k) {
    if (detail::stream_prefix(ev->value(node, k), L, r.values)) {
      r.levels = k;
      return r;
    }
  }
  throw insufficient_iterations("insufficient iterations: prefix of length " + std::to_string(L) + " of " +
                                    name_or_expr + " not defined after " + std::to_string(iter_cap) + " iterations",
                                to_tree(ev->value(node, iter_cap)), iter_cap);
}

inline std::vector<std::int64_t> evaluate_prefix(const EquationSystem& eqs, const std::string& name_or_expr,
                                                 std::size_t L, std::size_t iter_cap = 1000) {
  return evaluate_prefix_ex(eqs, name_or_expr, L, iter_cap).values;
}

// Depth-n approximant of the value of a nullary definition or closed expression.
inline Approximant evaluate_approximant(const EquationSystem& eqs, const std::string& name_or_expr, std::size_t n,
                                        std::size_t iter_cap = 1000) {
  auto ev = std::make_shared<Evaluator>(eqs);
  ExprPtr node = ev->target(name_or_expr);
  for (std::size_t k = 0; k <= iter_cap; ++k) {
    ValuePtr v = ev->value(node, k);
    if (detail::complete_to(eqs, v, ev->sort_of(node), n)) return {truncate(to_tree(v), n), ExtNat(n)};
  }
  throw insufficient_iterations("insufficient iterations: depth " + std::to_string(n) + " of " + name_or_expr +
                                    " not reached after " + std::to_string(iter_cap) + " iterations",
                                to_tree(ev->value(node, iter_cap)), iter_cap);
}

inline Coterm evaluate_coterm(const EquationSystem& eqs, const std::string& name_or_expr, std::size_t iter_cap = 1000) {
  auto ev = std::make_shared<Evaluator>(eqs);
  return ev->coterm(ev->target(name_or_expr), iter_cap);
}

inline const char* builtin_source() {
  return R"(-- streams of integers; `:` is cons
even : Stream -> Stream
even (x : y : t) = x : even t

zip : Stream -> Stream -> Stream
zip (x : t) s = x : zip s t

add : Stream -> Stream -> Stream
add (x : t) (y : s) = (x + y) : add t s

merge : Stream -> Stream -> Stream
merge (x : t1) (y : t2)
  | x < y     = x : merge t1 (y : t2)
  | y < x     = y : merge (x : t1) t2
  | otherwise = x : merge t1 t2

mul : Int -> Stream -> Stream
mul x (y : t) = x * y : mul x t

D : Stream
D = 0 : 1 : 1 : zip (add (tl D) (tl (tl D))) (even (tl D))

H : Stream
H = 1 : merge (merge (mul 2 H) (mul 3 H)) (mul 5 H)

-- epsilon-lambda terms, variables numbered
codata Lam = var Int | app Lam Lam | lam Int Lam | eps Lam

subst : Int -> Lam -> Lam -> Lam
subst x t (var y)
  | x == y    = t
  | otherwise = var y
subst x t (app s1 s2) = app (subst x t s1) (subst x t s2)
subst x t (lam y s)
  | x == y    = lam y s
  | otherwise = lam y (subst x t s)
subst x t (eps s) = eps (subst x t s)
)";
}

inline EquationSystem builtin_library() { return parse_defs(builtin_source()); }

}  // namespace coind::streams
