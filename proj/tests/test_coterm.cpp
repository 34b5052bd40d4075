#include <gtest/gtest.h>

#include <random>

#include "coind/coterm.hpp"

using namespace coind;

namespace {

std::shared_ptr<Signature> stream_sig() {
  auto sig = std::make_shared<Signature>();
  sig->add_sort("Int");
  sig->add_sort("Stream");
  sig->set_integer_sort("Int");
  sig->add_constructor("cons", {"Int", "Stream"}, "Stream");
  return sig;
}

std::shared_ptr<Signature> tree_sig() {
  auto sig = std::make_shared<Signature>();
  sig->add_sort("T");
  sig->add_constructor("A", {"T"}, "T");
  sig->add_constructor("B", {"T", "T"}, "T");
  sig->add_constructor("C", {}, "T");
  return sig;
}

Coterm ones() { return parse_regular_coterm("rec X. cons(1, X)", "Stream", stream_sig()); }

// random rational tree: a graph of n nodes over {A/1, B/2, C/0}, root 0
Coterm random_rational(std::mt19937& rng, int n) {
  struct G {
    std::vector<std::string> label;
    std::vector<std::vector<std::size_t>> kids;
  };
  auto g = std::make_shared<G>();
  for (int i = 0; i < n; ++i) {
    int k = rng() % 7;
    std::string l = k < 3 ? "A" : k < 6 ? "B" : "C";
    g->label.push_back(l);
    std::vector<std::size_t> ks;
    for (int j = 0; j < (l == "A" ? 1 : l == "B" ? 2 : 0); ++j) ks.push_back(rng() % n);
    g->kids.push_back(ks);
  }
  auto step = [g](std::size_t id) { return std::make_pair(g->label[id], g->kids[id]); };
  return Coterm::unfold("T", std::size_t{0}, step, tree_sig());
}

}  // namespace

TEST(Position, TextRoundTrip) {
  EXPECT_EQ(to_string(Position{}), "e");
  EXPECT_EQ(to_string(Position{1, 0, 2}), "1.0.2");
  EXPECT_EQ(parse_position("1.0.2"), (Position{1, 0, 2}));
  EXPECT_EQ(parse_position("e"), Position{});
  EXPECT_THROW(parse_position("1..2"), std::invalid_argument);
}

TEST(Coterm, UnfoldAtOnes) {
  Coterm t = ones();
  EXPECT_EQ(unfold_at(t, {}), "cons");
  EXPECT_EQ(unfold_at(t, {1, 1, 1}), "cons");
  EXPECT_EQ(unfold_at(t, {1, 0}), "1");
  EXPECT_EQ(unfold_at(t, {2}), std::nullopt);
}

TEST(Coterm, ApproximantsOfOnes) {
  Coterm t = ones();
  EXPECT_EQ(to_text(approximant(t, 0)), "_|_");
  EXPECT_EQ(to_text(approximant(t, 1)), "cons(1,_|_)");
  EXPECT_EQ(to_text(approximant(t, 3)), "cons(1,cons(1,cons(1,_|_)))");
  EXPECT_EQ(approximant(t, 3).size, ExtNat(3));
}

TEST(Coterm, Cut) {
  Approximant a = approximant(ones(), 3);
  EXPECT_EQ(cut(ExtNat::inf(), a), a);
  Approximant z = cut(ExtNat(0), a);
  EXPECT_TRUE(z.tree.bottom);
  EXPECT_EQ(z.size, ExtNat(0));
  EXPECT_EQ(to_text(cut(ExtNat(2), a)), "cons(1,cons(1,_|_))");
  EXPECT_EQ(cut(ExtNat(7), a).size, ExtNat(3));
}

TEST(Coterm, BisimilarityExamples) {
  Coterm t = ones();
  Coterm s = parse_regular_coterm("rec X. cons(1, cons(2, X))", "Stream", stream_sig());
  for (int n = 0; n < 20; ++n) EXPECT_TRUE(bisimilar_to_depth(t, t, n));
  // the second element is a constant at depth 2, so it is visible in t|2
  EXPECT_TRUE(bisimilar_to_depth(t, s, 1));
  EXPECT_FALSE(bisimilar_to_depth(t, s, 2));
  EXPECT_FALSE(bisimilar_to_depth(t, s, 3));
  EXPECT_FALSE(coterm_equal(t, s));
  Coterm t2 = parse_regular_coterm("cons(1, rec Y. cons(1, cons(1, Y)))", "Stream", stream_sig());
  EXPECT_TRUE(coterm_equal(t, t2));
}

TEST(Coterm, MalformedGeneratorIsReported) {
  auto step = [](int) { return std::make_pair(std::string("cons"), std::vector<int>{0}); };
  Coterm bad = Coterm::unfold("Stream", 0, step, stream_sig());
  EXPECT_THROW(bad.label(), malformed_coterm);
  auto wrong_sort = [](int s) {
    return s == 0 ? std::make_pair(std::string("cons"), std::vector<int>{0, 0})
                  : std::make_pair(std::string("1"), std::vector<int>{});
  };
  Coterm bad2 = Coterm::unfold("Stream", 0, wrong_sort, stream_sig());
  EXPECT_THROW(approximant(bad2, 3), malformed_coterm);
}

TEST(Coterm, NodeCapIsAResourceError) {
  auto nat = [](std::uint64_t n) { return std::make_pair(std::string("cons"), std::vector<std::uint64_t>{0, n + 1}); };
  auto step = [nat](std::uint64_t n) {
    if (n == 0) return std::make_pair(std::string("7"), std::vector<std::uint64_t>{});
    return nat(n);
  };
  Coterm t = Coterm::unfold("Stream", std::uint64_t{1}, step, stream_sig(), 50);
  EXPECT_THROW(approximant(t, 100), resource_error);
}

TEST(Coterm, TextEncodingRoundTrip) {
  Approximant a = approximant(ones(), 4);
  EXPECT_EQ(parse_approx_tree(to_text(a)), a.tree);
  EXPECT_THROW(parse_approx_tree("cons(1,"), parse_error);
  check_well_sorted(a.tree, *stream_sig(), "Stream");
  EXPECT_THROW(check_well_sorted(parse_approx_tree("cons(cons(1,_|_),_|_)"), *stream_sig(), "Stream"),
               malformed_coterm);
}

TEST(Coterm, UnguardedRecursionRejected) {
  EXPECT_THROW(parse_regular_coterm("rec X. X", "T", tree_sig()), malformed_coterm);
}

TEST(Coterm, ConstantsSurviveAtBoundary) {
  Coterm t = parse_regular_coterm("B(C, rec X. A(X))", "T", tree_sig());
  EXPECT_EQ(to_text(approximant(t, 1)), "B(C,_|_)");
  EXPECT_EQ(to_text(approximant(t, 2)), "B(C,A(_|_))");
}

TEST(Coterm, UnfoldIsDeterministic) {
  std::mt19937 rng(5);
  for (int i = 0; i < 50; ++i) {
    std::mt19937 r1 = rng, r2 = rng;
    Coterm a = random_rational(r1, 6), b = random_rational(r2, 6);
    rng.discard(100);
    EXPECT_EQ(approximant(a, 8), approximant(b, 8));
    EXPECT_EQ(unfold_at(a, {0, 0}), unfold_at(a, {0, 0}));
  }
}

// approximants form a chain compatible with cut
TEST(CotermProperties, ChainAndCutCoherence) {
  std::mt19937 rng(1234);
  int failures = 0;
  for (int i = 0; i < 1000; ++i) {
    Coterm t = random_rational(rng, 1 + rng() % 6);
    std::uint64_t n = rng() % 9, m = rng() % (n + 1);
    Approximant an = approximant(t, n), am = approximant(t, m);
    if (cut(ExtNat(m), an) != am) ++failures;
    if (!approx_leq(am, an)) ++failures;
    if (!tree_leq(am.tree, an.tree)) ++failures;
    if (an.size != ExtNat(n)) ++failures;
  }
  EXPECT_EQ(failures, 0);
}

TEST(CotermProperties, BisimilarityAntitone) {
  std::mt19937 rng(4321);
  int failures = 0;
  for (int i = 0; i < 1000; ++i) {
    Coterm t = random_rational(rng, 1 + rng() % 4), s = random_rational(rng, 1 + rng() % 4);
    bool prev = true;
    for (std::uint64_t n = 0; n <= 10; ++n) {
      bool b = bisimilar_to_depth(t, s, n);
      if (b && !prev) ++failures;
      if (b != (approximant(t, n) == approximant(s, n))) ++failures;
      prev = b;
    }
    // exact equality agrees with bisimilarity at a depth past the product of the graphs
    if (coterm_equal(t, s) != bisimilar_to_depth(t, s, 20)) ++failures;
  }
  EXPECT_EQ(failures, 0);
}
