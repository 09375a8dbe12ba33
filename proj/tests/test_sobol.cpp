#include <gtest/gtest.h>

#include "support.hpp"

using namespace mopol;
using namespace testing_support;

TEST(Sobol, UnscrambledFirstPoints) {
  SobolSequence seq(3);
  const std::vector<std::vector<double>> expected{{0, 0, 0},           {0.5, 0.5, 0.5},       {0.75, 0.25, 0.25},   {0.25, 0.75, 0.75},
                                                  {0.375, 0.375, 0.625}, {0.875, 0.875, 0.125}, {0.625, 0.125, 0.875}, {0.125, 0.625, 0.375}};
  for (const auto& e : expected) EXPECT_EQ(seq.next(), e);
}

TEST(Sobol, FirstDimensionIsVanDerCorput) {
  SobolSequence seq(1);
  for (std::uint32_t i = 0; i < 64; ++i) {
    double want = 0.0, f = 0.5;
    // Gray-code order: the i-th point is the radical inverse of i ^ (i >> 1).
    for (std::uint32_t g = i ^ (i >> 1); g; g >>= 1, f *= 0.5)
      if (g & 1u) want += f;
    EXPECT_EQ(seq.next()[0], want) << i;
  }
}

TEST(Sobol, StratifiesDyadicBoxes) {
  // First 2^m points of a 2-D Sobol net put one point in each 1/2^a x 1/2^b box.
  SobolSequence seq(2);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 16; ++i) pts.push_back(seq.next());
  for (int a = 0; a <= 4; ++a) {
    const int b = 4 - a;
    std::set<std::pair<int, int>> boxes;
    for (const auto& p : pts) boxes.insert({static_cast<int>(p[0] * (1 << a)), static_cast<int>(p[1] * (1 << b))});
    EXPECT_EQ(boxes.size(), 16u) << a;
  }
}

TEST(Sobol, ScrambleIsSeededAndStaysInUnitCube) {
  SobolSequence a(4, true, 1), b(4, true, 1), c(4, true, 2);
  bool differs = false;
  for (int i = 0; i < 32; ++i) {
    const auto pa = a.next(), pb = b.next(), pc = c.next();
    EXPECT_EQ(pa, pb);
    differs = differs || pa != pc;
    for (double v : pa) {
      EXPECT_GE(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
  EXPECT_TRUE(differs);
  EXPECT_THROW(SobolSequence(0), ValidationError);
  EXPECT_THROW(SobolSequence(17), ValidationError);
}

TEST(SearchSpace, TwoObjectivesMapAffinely) {
  SearchSpace unit(2);
  EXPECT_EQ(unit.map(std::vector<double>{0.25}), WeightVector({0.25, 0.75}));
  SearchSpace boxed(2, {{0.2, 0.6}});
  EXPECT_NEAR(boxed.map(std::vector<double>{0.5})[0], 0.4, 1e-15);
  EXPECT_THROW(SearchSpace(2, {{0.5, 1.5}}), ValidationError);
  EXPECT_THROW(SearchSpace(1), ValidationError);
}

TEST(SearchSpace, HigherDimensionsLandOnTheSimplex) {
  SobolSequence seq(3, true, 4);
  SearchSpace space(4);
  SearchSpace boxed(4, {{0.1, 0.3}, {0.0, 0.4}, {0.2, 0.5}});
  for (int i = 0; i < 200; ++i) {
    const auto u = seq.next();
    for (const auto* s : {&space, &boxed}) {
      const auto w = s->map(u);
      ASSERT_EQ(w.size(), 4u);
      double sum = 0.0;
      for (double v : w.values()) {
        EXPECT_GE(v, 0.0);
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
    const auto w = boxed.map(u);
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_GE(w[j], boxed.bounds()[j].first - 1e-15);
      EXPECT_LE(w[j], boxed.bounds()[j].second + 1e-15);
    }
  }
  EXPECT_THROW(SearchSpace(3, {{0.0, 0.9}, {0.5, 0.6}}), ValidationError);
}

TEST(SobolInit, CountAndDeterminism) {
  EXPECT_EQ(sobol_init_count(2), 6u);
  EXPECT_EQ(sobol_init_count(3), 8u);
  const auto a = sobol_init(2, 7), b = sobol_init(2, 7);
  ASSERT_EQ(a.size(), 6u);
  EXPECT_EQ(a, b);
  std::set<double> distinct;
  for (const auto& w : a) distinct.insert(w[0]);
  EXPECT_EQ(distinct.size(), 6u);
  EXPECT_EQ(sobol_init(3, 1).size(), 8u);
}

TEST(WeightVector, CoordinatesRoundTrip) {
  const WeightVector w({0.2, 0.3, 0.5});
  EXPECT_EQ(w.coordinates(), (std::vector<double>{0.2, 0.3}));
  const auto back = WeightVector::from_coordinates(w.coordinates());
  EXPECT_NEAR(back[2], 0.5, 1e-15);
  EXPECT_EQ(WeightVector::from_coordinates(std::vector<double>{0.6, 0.4 + 1e-12})[2], 0.0);
  EXPECT_THROW(WeightVector::from_coordinates(std::vector<double>{0.7, 0.4}), ValidationError);
}
