#include <gtest/gtest.h>

#include "support.hpp"

using namespace mopol;
using namespace testing_support;

namespace {

using Pts = std::vector<std::vector<double>>;

EvaluatedPoint point(std::vector<double> v) {
  EvaluatedPoint p;
  p.lambda = WeightVector::one_hot(v.size(), 0);
  p.values = std::move(v);
  p.ses.assign(p.values.size(), 0.0);
  return p;
}

std::vector<double> random_vec(Rng& rng, std::size_t k) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(k);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST(Dominates, Examples) {
  EXPECT_TRUE(dominates(std::vector<double>{1, 2}, std::vector<double>{1, 1}));
  EXPECT_FALSE(dominates(std::vector<double>{1, 1}, std::vector<double>{1, 1}));
  EXPECT_FALSE(dominates(std::vector<double>{2, 0}, std::vector<double>{1, 1}));
  EXPECT_THROW(dominates(std::vector<double>{1}, std::vector<double>{1, 2}), ValidationError);
}

TEST(Dominates, IsAStrictPartialOrder) {
  Rng rng(3);
  std::uniform_int_distribution<int> g(0, 3);
  std::vector<std::vector<double>> pts(40, std::vector<double>(3));
  for (auto& p : pts)
    for (double& v : p) v = g(rng);
  for (const auto& a : pts) {
    EXPECT_FALSE(dominates(a, a));
    for (const auto& b : pts) {
      if (dominates(a, b)) {
        EXPECT_FALSE(dominates(b, a));
      }
      for (const auto& c : pts)
        if (dominates(a, b) && dominates(b, c)) {
          EXPECT_TRUE(dominates(a, c));
        }
    }
  }
}

TEST(ParetoSet, UpdateExamples) {
  ParetoSet s;
  EXPECT_TRUE(s.update(point({1, 1})));
  EXPECT_TRUE(s.update(point({2, 0})));
  EXPECT_FALSE(s.update(point({0.5, 0.5})));
  EXPECT_TRUE(s.update(point({2, 2})));
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s.members()[0].values, (std::vector<double>{2, 2}));
  EXPECT_TRUE(s.update(point({2, 2})));
  EXPECT_EQ(s.size(), 2u);
  EXPECT_THROW(s.update(point({NAN, 1})), ValidationError);
  EXPECT_EQ(update_pareto(ParetoSet{}, point({1, 0})).size(), 1u);
}

TEST(ParetoSet, MatchesPairwiseOracleAndIgnoresOrder) {
  Rng rng(8);
  for (std::size_t k : {2u, 3u}) {
    Pts pts;
    for (int i = 0; i < 100; ++i) pts.push_back(random_vec(rng, k));
    ParetoSet fwd, rev;
    for (const auto& p : pts) fwd.update(point(p));
    for (auto it = pts.rbegin(); it != pts.rend(); ++it) rev.update(point(*it));
    auto oracle = nondominated(pts);
    auto a = fwd.value_vectors(), b = rev.value_vectors();
    std::sort(oracle.begin(), oracle.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, oracle);
    EXPECT_EQ(b, oracle);
    for (const auto& m : a)
      for (const auto& q : a) EXPECT_FALSE(dominates(m, q));
  }
}

TEST(Hypervolume, HandExamples) {
  const std::vector<double> ref{0, 0};
  EXPECT_EQ(hypervolume(Pts{}, ref), 0.0);
  EXPECT_DOUBLE_EQ(hypervolume(Pts{{1, 1}}, ref), 1.0);
  // Staircase: 3*1 + 2*(2-1) + 1*(3-2).
  EXPECT_DOUBLE_EQ(hypervolume(Pts{{3, 1}, {2, 2}, {1, 3}}, ref), 6.0);
  EXPECT_DOUBLE_EQ(hypervolume(Pts{{3, 1}, {2, 2}, {1, 3}, {1, 1}}, ref), 6.0);
  EXPECT_DOUBLE_EQ(hypervolume(Pts{{2, 3, 4}}, std::vector<double>{1, 1, 1}), 1.0 * 2.0 * 3.0);
  // Two unit cubes overlapping in a quarter.
  EXPECT_DOUBLE_EQ(hypervolume(Pts{{2, 2, 1}, {1, 3, 2}}, std::vector<double>{0, 0, 0}), 4.0 + 6.0 - 2.0);
}

TEST(Hypervolume, PointsBelowReferenceAreSkipped) {
  std::size_t skipped = 0;
  EXPECT_DOUBLE_EQ(hypervolume(Pts{{1, 1}, {-1, 5}}, std::vector<double>{0, 0}, &skipped), 1.0);
  EXPECT_EQ(skipped, 1u);
  ParetoSet s;
  s.update(point({-1, 5}));
  std::vector<std::string> seen;
  const auto saved = warning_sink();
  warning_sink() = [&](const std::string& m) { seen.push_back(m); };
  EXPECT_EQ(hypervolume(s, std::vector<double>{0, 0}), 0.0);
  warning_sink() = saved;
  EXPECT_EQ(seen.size(), 1u);
}

TEST(Hypervolume, AgreesWithMonteCarlo) {
  Rng rng(21);
  for (std::size_t k : {2u, 3u, 4u}) {
    Pts pts;
    for (int i = 0; i < 12; ++i) pts.push_back(random_vec(rng, k));
    const std::vector<double> ref(k, 0.0);
    const double hv = hypervolume(pts, ref);
    const auto mc = mc_hypervolume(pts, ref, 400000, 5 + k);
    EXPECT_NEAR(hv, mc.value, 4.0 * mc.std_error) << "k=" << k;
  }
}

TEST(Hypervolume, MonotoneUnderInsertionAndInvariantToDominated) {
  Rng rng(22);
  const std::vector<double> ref{0, 0, 0};
  Pts pts;
  double last = 0.0;
  for (int i = 0; i < 30; ++i) {
    pts.push_back(random_vec(rng, 3));
    const double hv = hypervolume(pts, ref);
    EXPECT_GE(hv, last);
    last = hv;
  }
  EXPECT_NEAR(hypervolume(nondominated(pts), ref), last, 1e-15);
}

TEST(ReferencePoint, MinusOnePercentOfRange) {
  const auto r = reference_point(Pts{{0, 10}, {1, 20}, {0.5, 30}});
  EXPECT_DOUBLE_EQ(r[0], -0.01);
  EXPECT_DOUBLE_EQ(r[1], 10.0 - 0.2);
  EXPECT_TRUE(reference_point(Pts{}).empty());
  const auto same = reference_point(Pts{{2, 3}});
  EXPECT_EQ(same, (std::vector<double>{2, 3}));
}
