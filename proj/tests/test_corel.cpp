#include <gtest/gtest.h>

#include <random>

#include "coind/corel.hpp"

using namespace coind;
using namespace coind::rel;

namespace {

Judgment arrow(const Coterm& a, const Coterm& b) { return Judgment{"->", {a, b}}; }

// oracle for the window stages: {m <= M | m >= n} u {inf}
Snapshot expected_stage(std::uint64_t n, std::uint64_t M) {
  Snapshot s{ExtNat::inf()};
  for (std::uint64_t m = n; m <= M; ++m) s.insert(ExtNat(m));
  return s;
}

// regular term over A/1, B/1 whose A-chains always reach a B
Coterm random_q1(std::mt19937_64& rng, std::size_t n) {
  struct N {
    std::string l;
    std::size_t k;
  };
  auto g = std::make_shared<std::vector<N>>(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i + 1 == n || rng() % 2) {
      (*g)[i] = {"B", static_cast<std::size_t>(rng() % n)};
    } else {
      (*g)[i] = {"A", i + 1 + static_cast<std::size_t>(rng() % (n - i - 1))};
    }
  }
  auto step = [g](std::size_t i) { return std::make_pair((*g)[i].l, std::vector<std::size_t>{(*g)[i].k}); };
  return Coterm::unfold("T", std::size_t{0}, step, signature_AB());
}

Coterm prepend(const std::string& prefix_labels, const Coterm& t) {
  // prefix nodes as positions 0..k-1, then t
  struct S {
    std::size_t i;
    Coterm t;
    bool operator==(const S& o) const { return i == o.i && (i != SIZE_MAX || t.same_node(o.t)); }
  };
  struct H {
    std::size_t operator()(const S& s) const { return s.i == SIZE_MAX ? Coterm::Hash{}(s.t) : s.i; }
  };
  std::string p = prefix_labels;
  auto step = [p](const S& s) -> std::pair<std::string, std::vector<S>> {
    if (s.i == SIZE_MAX) {
      std::vector<S> kids;
      for (auto& c : s.t.children()) kids.push_back(S{SIZE_MAX, c});
      return {s.t.label(), kids};
    }
    S next = s.i + 1 < p.size() ? S{s.i + 1, s.t} : S{SIZE_MAX, s.t};
    return {std::string(1, p[s.i]), {next}};
  };
  return Coterm::unfold<S, decltype(step), H>("T", S{0, t}, step, signature_AB());
}

}  // namespace

TEST(Corel, ReflexiveVariableAllStages) {
  auto rs = arrow_T();
  Coterm x = parse_T("x");
  for (std::size_t n = 0; n <= 32; ++n) EXPECT_TRUE(rs.holds(arrow(x, x), n)) << n;
}

TEST(Corel, InfiniteAToInfiniteB) {
  auto rs = arrow_T();
  Coterm t = parse_T("rec t. A(t)");
  Coterm s = parse_T("rec s. B(s,s)");
  EXPECT_TRUE(rs.holds_at_stage({arrow(t, s), 16}));
  EXPECT_EQ(rs.deepest_stage(arrow(t, s), 40), 40u);
  // the other direction never fires
  EXPECT_FALSE(rs.holds(arrow(s, t), 1));
}

TEST(Corel, DistinctVariablesFail) {
  auto rs = arrow_T();
  Coterm a = parse_T("A(x)");
  Coterm b = parse_T("A(y)");
  // stage 0 is the full relation, so the premise x -> y is still granted at stage 1
  EXPECT_TRUE(rs.holds(arrow(a, b), 0));
  EXPECT_TRUE(rs.holds(arrow(a, b), 1));
  EXPECT_FALSE(rs.holds(arrow(a, b), 2));
  EXPECT_EQ(rs.deepest_stage(arrow(a, b), 32), 1u);
  EXPECT_FALSE(rs.holds(arrow(parse_T("x"), parse_T("y")), 1));
}

TEST(Corel, StageReadingDepth) {
  // a mismatch at depth k is only visible from stage k+1 on
  auto rs = arrow_T();
  Coterm a = parse_T("A(A(A(x)))");
  Coterm b = parse_T("A(A(A(y)))");
  EXPECT_TRUE(rs.holds(arrow(a, b), 3));
  EXPECT_FALSE(rs.holds(arrow(a, b), 4));
  EXPECT_EQ(rs.deepest_stage(arrow(a, b), 20), 3u);
}

TEST(Corel, NonlinearConclusion) {
  auto rs = arrow_T();
  EXPECT_TRUE(rs.holds(arrow(parse_T("A(x)"), parse_T("B(x,x)")), 5));
  EXPECT_FALSE(rs.holds(arrow(parse_T("A(x)"), parse_T("B(x,y)")), 1));
  EXPECT_TRUE(rs.holds(arrow(parse_T("A(A(x))"), parse_T("B(B(x,x),B(x,x))")), 5));
  EXPECT_FALSE(rs.holds(arrow(parse_T("A(A(x))"), parse_T("B(A(x),B(x,x))")), 5));
}

TEST(Corel, StageAntitonicity) {
  auto rs = arrow_T();
  std::mt19937_64 rng(11);
  int positives = 0;
  for (int i = 0; i < 200; ++i) {
    Coterm s = random_T_term(rng, 1 + rng() % 6);
    Coterm t = (i % 2) ? random_T_reduct(rng, s) : random_T_term(rng, 1 + rng() % 6);
    bool prev = true;
    for (std::size_t n = 0; n <= 12; ++n) {
      bool now = rs.holds(arrow(s, t), n);
      if (!prev) {
        EXPECT_FALSE(now) << "stage " << n << " sample " << i;
      }
      prev = now;
    }
    positives += prev;
  }
  EXPECT_GT(positives, 90);
}

TEST(Corel, TextFormat) {
  auto rf = parse_rule_file(
      "sort T\nctor A(T)\nctor B(T,T)\nvariables T\n"
      "relation Inf 1\n"
      "rule step: Inf(A(t)) <= Inf(t)\n"
      "rule left: Inf(B(s,t)) <= Inf(s)\n"
      "check Inf(rec t. A(t))\n"
      "check Inf(A(x))\n");
  ASSERT_EQ(rf.checks.size(), 2u);
  EXPECT_TRUE(rf.rules.holds(rf.checks[0], 25));
  EXPECT_TRUE(rf.rules.holds(rf.checks[1], 1));
  EXPECT_FALSE(rf.rules.holds(rf.checks[1], 2));
  EXPECT_EQ(rf.rules.max_pattern_depth(), 1u);
}

TEST(Corel, TextFormatInfixAndConditions) {
  auto rf = parse_rule_file(
      "sort T\nctor A(T)\nctor B(T,T)\nvariables T\n"
      "relation ~ 2\n"
      "rule v: x ~ y if var(x), var(y), x != y\n"
      "rule a: A(s) ~ A(t) <= s ~ t\n"
      "check A(A(x)) ~ A(A(y))\n"
      "check A(x) ~ A(x)\n");
  EXPECT_TRUE(rf.rules.holds(rf.checks[0], 3));
  EXPECT_FALSE(rf.rules.holds(rf.checks[1], 2));
  EXPECT_EQ(rf.check_texts[0], "A(A(x)) ~ A(A(y))");
}

TEST(Corel, TextFormatErrors) {
  std::string head = "sort T\nctor A(T)\nvariables T\nrelation -> 2\n";
  EXPECT_THROW(parse_rule_file(head + "rule r: A(t) -> A(u) <= t -> w\n"), parse_error);
  EXPECT_THROW(parse_rule_file(head + "rule r: C(t) -> t\n"), parse_error);
  EXPECT_THROW(parse_rule_file(head + "rule r: t -> t if t < t\n"), parse_error);
  EXPECT_THROW(parse_rule_file(head + "rule r: A(t) -> A(t, t)\n"), parse_error);
  EXPECT_THROW(parse_rule_file(head + "frobnicate\n"), parse_error);
  try {
    parse_rule_file(head + "rule r: A(t) -> A(u) <= t -> w\n");
  } catch (const parse_error& e) {
    EXPECT_EQ(e.line, 5u);
  }
  RuleSet rs;
  EXPECT_THROW(rs.add_rule("nope", Rule{"r", [](auto&) { return std::vector<Alternative>{}; }}), rule_error);
}

TEST(Corel, ClosureOrdinalTrace) {
  const std::uint64_t M = 8;
  auto tr = closure_ordinal_trace(omega_plus_one_operator(M), 2);
  ASSERT_EQ(tr.stages.size(), M + 2);
  EXPECT_EQ(tr.stages[0], full_window(M));
  for (std::uint64_t n = 1; n <= M; ++n) EXPECT_EQ(tr.stages[n], expected_stage(n, M)) << n;
  EXPECT_EQ(tr.omega, Snapshot{ExtNat::inf()});
  ASSERT_EQ(tr.after.size(), 2u);
  EXPECT_TRUE(tr.after[0].empty());
  EXPECT_TRUE(tr.after[1].empty());
  EXPECT_EQ(snapshot_text(tr.stages[7]), "{7, 8, inf}");
}

TEST(Corel, SkolemExamples) {
  Coterm x = parse_T("x");
  EXPECT_EQ(to_text(approximant(skolem_join_T(x, x, x), 4)), "x");
  Coterm f = skolem_join_T(parse_T("A(x)"), parse_T("A(x)"), parse_T("B(x,x)"));
  EXPECT_EQ(to_text(approximant(f, 4)), "B(x,x)");
  Coterm g = skolem_join_T(parse_T("A(A(x))"), parse_T("A(B(x,x))"), parse_T("B(A(x),A(x))"));
  EXPECT_EQ(to_text(approximant(g, 5)), "B(B(x,x),B(x,x))");
  Coterm u = parse_T("rec u. A(u)");
  Coterm h = skolem_join_T(u, u, u);
  EXPECT_EQ(to_text(approximant(h, 8)), "A(A(A(A(A(A(A(A(_|_))))))))");
  EXPECT_TRUE(bisimilar_to_depth(h, u, 64));
  // default clause keeps t
  Coterm d = skolem_join_T(parse_T("x"), parse_T("y"), parse_T("x"));
  EXPECT_EQ(to_text(approximant(d, 3)), "y");
}

TEST(Corel, DiamondAtStage12) {
  auto rs = arrow_T();
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 200; ++i) {
    Coterm s = random_T_term(rng, 1 + rng() % 7);
    Coterm t = random_T_reduct(rng, s);
    Coterm t2 = random_T_reduct(rng, s);
    ASSERT_TRUE(rs.holds(arrow(s, t), 12));
    ASSERT_TRUE(rs.holds(arrow(s, t2), 12));
    Coterm f = skolem_join_T(s, t, t2);
    EXPECT_TRUE(rs.holds(arrow(t, f), 12)) << i;
    EXPECT_TRUE(rs.holds(arrow(t2, f), 12)) << i;
  }
}

TEST(Corel, EpsParsePrint) {
  auto t = eps::parse("(\\x. x) y");
  EXPECT_EQ(eps::print(t), "(\\x. x) y");
  EXPECT_TRUE(eps::is_redex(t));
  EXPECT_EQ(eps::print(eps::parse("eps(a b) (\\z. z c)")), "eps(a b) (\\z. z c)");
  EXPECT_EQ(eps::print(eps::parse("a b c")), "a b c");
  EXPECT_EQ(eps::print(eps::parse("a (b c)")), "a (b c)");
  EXPECT_EQ(eps::print(eps::parse("a \\x. x")), "a (\\x. x)");
  EXPECT_THROW(eps::parse("(a"), parse_error);
  EXPECT_THROW(eps::parse("\\. a"), parse_error);
}

TEST(Corel, EpsStepRules) {
  auto rs = eps::to1();
  auto P = eps::parse;
  EXPECT_TRUE(eps::step1_at(rs, P("x"), P("x"), 8));
  EXPECT_TRUE(eps::step1_at(rs, P("(\\x. x) y"), P("eps(y)"), 8));
  EXPECT_TRUE(eps::step1_at(rs, P("(\\x. x x) ((\\z. z) a)"), P("eps(eps(a) eps(a))"), 8));
  // both copies of the argument must take the same step
  EXPECT_FALSE(eps::step1_at(rs, P("(\\x. x x) ((\\z. z) a)"), P("eps(((\\z. z) a) eps(a))"), 8));
  EXPECT_TRUE(eps::step1_at(rs, P("(\\x. b) a"), P("eps(b)"), 8));
  EXPECT_FALSE(eps::step1_at(rs, P("(\\x. x) y"), P("y"), 1));
  EXPECT_FALSE(eps::step1_at(rs, P("x"), P("y"), 1));
  // no eps on the left: a two-step reduct is not a one-step reduct
  EXPECT_FALSE(eps::step1_at(rs, P("(\\x. x) ((\\y. y) a)"), P("a"), 4));
}

TEST(Corel, ParJoinExamples) {
  auto rs = eps::to1();
  auto P = eps::parse;
  EXPECT_EQ(eps::print(eps::par_join(P("x"), P("x"), P("x"))), "x");

  auto s = P("(\\x. x) y");
  auto j = eps::par_join(s, s, P("eps(y)"));
  EXPECT_EQ(eps::print(j), "eps(y)");
  EXPECT_TRUE(eps::step1_at(rs, s, j, 8));
  EXPECT_TRUE(eps::step1_at(rs, P("eps(y)"), j, 8));

  auto s2 = P("((\\x. x) a) ((\\z. z) b)");
  auto t = P("eps(a) ((\\z. z) b)");
  auto t2 = P("((\\x. x) a) eps(b)");
  auto j2 = eps::par_join(s2, t, t2);
  EXPECT_EQ(eps::print(j2), "eps(a) eps(b)");
  EXPECT_TRUE(eps::step1_at(rs, t, j2, 8));
  EXPECT_TRUE(eps::step1_at(rs, t2, j2, 8));

  EXPECT_THROW(eps::par_join(s2, P("b"), t2), contract_error);
  EXPECT_THROW(eps::par_join(s2, t, P("a b")), contract_error);
  EXPECT_EQ(eps::print(eps::par_join(s2, t, P("eps(a) eps(b)"))), "eps(a) eps(b)");
}

TEST(Corel, ParJoinRandomDiamond) {
  auto rs = eps::to1();
  std::mt19937_64 rng(77);
  int nontrivial = 0;
  for (int i = 0; i < 60; ++i) {
    auto s = eps::random_term(rng, 4 + rng() % 8, true);
    auto t = eps::develop(s, eps::random_marks(rng, s));
    auto t2 = eps::develop(s, eps::random_marks(rng, s));
    auto j = eps::par_join(s, t, t2);
    ASSERT_TRUE(eps::step1_at(rs, s, t, 8)) << eps::print(s) << " / " << eps::print(t);
    EXPECT_TRUE(eps::step1_at(rs, t, j, 8)) << eps::print(s);
    EXPECT_TRUE(eps::step1_at(rs, t2, j, 8)) << eps::print(s);
    nontrivial += !(t == t2);
  }
  EXPECT_GT(nontrivial, 10);
}

TEST(Corel, SubstitutionCompatibility) {
  auto rs = eps::to1();
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    auto s = eps::random_term(rng, 3 + rng() % 7, true, "x");
    auto t = eps::random_term(rng, 2 + rng() % 5, true, "z");
    auto s1 = eps::develop(s, eps::random_marks(rng, s));
    auto t1 = eps::develop(t, eps::random_marks(rng, t));
    std::size_t n = 1 + i % 10;
    ASSERT_TRUE(eps::step1_at(rs, s, s1, n));
    ASSERT_TRUE(eps::step1_at(rs, t, t1, n));
    EXPECT_TRUE(eps::step1_at(rs, eps::subst(s, "a", t), eps::subst(s1, "a", t1), n))
        << eps::print(s) << " [" << eps::print(t) << "/a]";
  }
}

TEST(Corel, EraseA) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    Coterm t = random_q1(rng, 1 + rng() % 6);
    Coterm et = erase_A(t);
    for (std::size_t k = 0; k <= 8; ++k) {
      Coterm in = prepend(std::string(k, 'A') + "B", t);
      Coterm out = erase_A(in);
      ASSERT_EQ(out.label(), "B");
      EXPECT_TRUE(bisimilar_to_depth(out.child(0), et, 24)) << k;
    }
  }
  Coterm bad = parse_regular_coterm("rec u. A(u)", "T", signature_AB());
  EXPECT_THROW(erase_A(bad).label(), malformed_coterm);
}
