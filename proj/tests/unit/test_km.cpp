#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "survtrust/km.hpp"

using namespace survtrust;

TEST(KaplanMeier, ThreeRecordExample) {
  const std::vector<EventLabel> y{{1, 0}, {0, 1}, {1, 2}};
  const auto s = km::km_estimate(y, 3);
  ASSERT_EQ(s.values.size(), 4u);
  EXPECT_EQ(s.values[0], 1.0);
  EXPECT_DOUBLE_EQ(s.values[1], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.values[2], 2.0 / 3.0);
  EXPECT_EQ(s.values[3], 0.0);
}

TEST(KaplanMeier, AllCensoredStaysAtOne) {
  const std::vector<EventLabel> y{{0, 0}, {0, 2}, {0, 1}};
  for (double v : km::km_estimate(y, 4).values) EXPECT_EQ(v, 1.0);
}

TEST(KaplanMeier, AllEventsInFirstBin) {
  const std::vector<EventLabel> y(5, EventLabel{1, 0});
  const auto s = km::km_estimate(y, 4);
  EXPECT_EQ(s.values, (std::vector<double>{1, 0, 0, 0, 0}));
}

TEST(KaplanMeier, CensoringTargetFlipsIndicator) {
  const std::vector<EventLabel> y{{1, 0}, {0, 1}, {1, 2}};
  const auto g = km::km_estimate(y, 3, km::Target::censoring);
  const auto ref = oracle::km(y, 3, true);
  for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_NEAR(g.values[k], ref[k], 1e-15);
  EXPECT_DOUBLE_EQ(g.values[2], 0.5);
}

TEST(KaplanMeier, RejectsEmptyAndOutOfGrid) {
  EXPECT_THROW(km::km_estimate(std::vector<EventLabel>{}, 3), InputError);
  EXPECT_THROW(km::km_estimate(std::vector<EventLabel>{{1, 3}}, 3), InputError);
}

TEST(KaplanMeier, EqualsOneMinusEcdfWithoutCensoring) {
  Rng rng(101);
  for (int rep = 0; rep < 100; ++rep) {
    const int T = 1 + static_cast<int>(rng.below(12));
    const auto y = oracle::random_labels(rng, 1 + rng.below(200), T, 0.0);
    EXPECT_EQ(km::km_estimate(y, T).values, oracle::one_minus_ecdf(y, T));
  }
}

TEST(KaplanMeier, MatchesScanningOracleAndIsMonotone) {
  Rng rng(102);
  for (int rep = 0; rep < 100; ++rep) {
    const int T = 1 + static_cast<int>(rng.below(12));
    const auto y = oracle::random_labels(rng, 1 + rng.below(200), T, rng.uniform());
    const auto s = km::km_estimate(y, T);
    const auto ref = oracle::km(y, T);
    ASSERT_EQ(s.values.size(), ref.size());
    for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_NEAR(s.values[k], ref[k], 1e-12);
    EXPECT_EQ(s.values[0], 1.0);
    for (std::size_t k = 1; k < s.values.size(); ++k) {
      EXPECT_LE(s.values[k], s.values[k - 1]);
      EXPECT_GE(s.values[k], 0.0);
    }
  }
}

TEST(KaplanMeier, InvariantUnderIncreasingRelabeling) {
  Rng rng(103);
  for (int rep = 0; rep < 50; ++rep) {
    const int T = 2 + static_cast<int>(rng.below(8));
    const auto y = oracle::random_labels(rng, 5 + rng.below(100), T, 0.4);
    // strictly increasing map from T bins into a grid of 3T bins
    std::vector<int> map(static_cast<std::size_t>(T));
    int next = static_cast<int>(rng.below(3));
    for (auto& m : map) {
      m = next;
      next += 1 + static_cast<int>(rng.below(2));
    }
    const int T2 = next;
    auto y2 = y;
    for (auto& l : y2) l.time_bin = map[static_cast<std::size_t>(l.time_bin)];
    const auto s = km::km_estimate(y, T), s2 = km::km_estimate(y2, T2);
    for (int k = 0; k < T; ++k)
      EXPECT_EQ(s.after_bin(k), s2.after_bin(map[static_cast<std::size_t>(k)])) << "bin " << k;
  }
}

TEST(KaplanMeier, AtRiskCounts) {
  const std::vector<EventLabel> y{{1, 0}, {0, 1}, {1, 2}, {0, 2}};
  EXPECT_EQ(km::at_risk_counts(y, 4), (std::vector<std::size_t>{4, 3, 2, 0}));
}
