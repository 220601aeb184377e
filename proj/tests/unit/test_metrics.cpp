#include <gtest/gtest.h>

#include <cmath>

#include "support/oracles.hpp"
#include "survtrust/metrics/brier.hpp"
#include "survtrust/metrics/concordance.hpp"
#include "survtrust/metrics/km_cal.hpp"

using namespace survtrust;
using namespace survtrust::metrics;
using ndsm::Isd;

namespace {

// Point mass at bin t on a grid of T intervals.
Isd point_mass(int t, int T) {
  std::vector<double> w(static_cast<std::size_t>(T) + 1, 0.0);
  w[static_cast<std::size_t>(t)] = 1.0;
  return Isd::from_pmf(w);
}

Isd flat_half(int T) {
  std::vector<double> w(static_cast<std::size_t>(T) + 1, 0.0);
  w.front() = 0.5;
  w.back() = 0.5;
  return Isd::from_pmf(w);
}

// Monotone increasing reshaping of every CIF, mapped back to a pmf.
Isd reshape(const Isd& d) {
  std::vector<double> cif;
  for (double c : d.cif) cif.push_back(std::pow(c, 3.0));
  cif.back() = 1.0;
  std::vector<double> pmf(cif.size());
  for (std::size_t k = 0; k < cif.size(); ++k) pmf[k] = cif[k] - (k ? cif[k - 1] : 0.0);
  return Isd::from_pmf(pmf);
}

}  // namespace

TEST(Concordance, PerfectAndReversedRanking) {
  const std::vector<EventLabel> y{{1, 0}, {1, 1}, {1, 2}, {0, 3}};
  // mass r in bin 0, the rest spread evenly: every CIF value rises with r
  const auto risk = [](double r) {
    std::vector<double> w(5, (1.0 - r) / 4.0);
    w[0] = r;
    return Isd::from_pmf(w);
  };
  std::vector<Isd> good, bad;
  for (int t : {0, 1, 2, 3}) {
    good.push_back(risk(0.9 - 0.2 * t));
    bad.push_back(risk(0.1 + 0.2 * t));
  }
  EXPECT_EQ(c_td(good, y), 1.0);
  EXPECT_EQ(c_td(bad, y), 0.0);
}

TEST(Concordance, NoComparablePairsIsUndefined) {
  const std::vector<EventLabel> y{{0, 0}, {0, 1}, {1, 2}};
  const std::vector<Isd> p(3, flat_half(3));
  EXPECT_THROW(c_td(p, y), UndefinedMetric);
}

TEST(Concordance, TieModes) {
  const std::vector<EventLabel> y{{1, 0}, {0, 1}};
  const std::vector<Isd> p(2, flat_half(2));
  EXPECT_EQ(c_td(p, y, TieMode::half), 0.5);
  EXPECT_EQ(c_td(p, y, TieMode::strict), 0.0);
}

TEST(Concordance, MatchesPairwiseOracleExactly) {
  Rng rng(31);
  for (int rep = 0; rep < 200; ++rep) {
    const int T = 1 + static_cast<int>(rng.below(10));
    const auto n = 2 + rng.below(120);
    const auto y = oracle::random_labels(rng, n, T, rng.uniform());
    const auto p = oracle::random_isds(rng, n, T, rep % 2 == 0);
    const auto ref = oracle::c_td(p, y);
    if (ref.pairs == 0) {
      EXPECT_THROW(c_td(p, y), UndefinedMetric);
      continue;
    }
    const auto counts = c_td_counts(p, y, all_indices(n));
    EXPECT_EQ(static_cast<long long>(counts.pairs), ref.pairs);
    EXPECT_EQ(static_cast<long long>(2 * counts.concordant + counts.tied), ref.twice_concordant);
    EXPECT_EQ(c_td(p, y), ref.value());
  }
}

TEST(Concordance, ReversalComplementsWhenTieFree) {
  Rng rng(32);
  for (int rep = 0; rep < 100; ++rep) {
    const int T = 2 + static_cast<int>(rng.below(8));
    const auto n = 5 + rng.below(100);
    const auto y = oracle::random_labels(rng, n, T, 0.3);
    // rank by a scalar so reversal is well defined at every bin
    std::vector<Isd> p, q;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = rng.uniform(0.05, 0.95);
      std::vector<double> w(static_cast<std::size_t>(T) + 1, (1.0 - r) / T);
      w[0] = r;
      p.push_back(oracle::isd_from_weights(w));
      w.assign(w.size(), r / T);
      w[0] = 1.0 - r;
      q.push_back(oracle::isd_from_weights(w));
    }
    if (oracle::c_td(p, y).pairs == 0) continue;
    EXPECT_NEAR(c_td(p, y) + c_td(q, y), 1.0, 1e-12);
  }
}

TEST(Concordance, InvariantUnderMonotoneCifTransform) {
  Rng rng(33);
  for (int rep = 0; rep < 100; ++rep) {
    const int T = 2 + static_cast<int>(rng.below(8));
    const auto n = 5 + rng.below(100);
    const auto y = oracle::random_labels(rng, n, T, 0.3);
    const auto p = oracle::random_isds(rng, n, T, rep % 3 == 0);
    if (oracle::c_td(p, y).pairs == 0) continue;
    std::vector<Isd> q;
    for (const auto& d : p) q.push_back(reshape(d));
    // cubing can merge nearly equal values; compare against the oracle on q
    EXPECT_EQ(c_td(q, y), oracle::c_td(q, y).value());
    const auto before = oracle::c_td(p, y), after = oracle::c_td(q, y);
    if (before.twice_concordant == after.twice_concordant) EXPECT_EQ(c_td(p, y), c_td(q, y));
  }
}

TEST(Brier, PerfectPointMassesScoreZero) {
  const int T = 5;
  std::vector<EventLabel> y;
  std::vector<Isd> p;
  for (int t = 0; t < T; ++t) {
    y.push_back({1, t});
    p.push_back(point_mass(t, T));
  }
  EXPECT_EQ(ibs(p, y, {false}).ibs, 0.0);
  EXPECT_EQ(ibs(p, y).ibs, 0.0);
}

TEST(Brier, ConstantHalfScoresQuarter) {
  const int T = 4;
  std::vector<EventLabel> y{{1, 0}, {1, 1}, {1, 3}, {1, 2}};
  const std::vector<Isd> p(y.size(), flat_half(T));
  EXPECT_DOUBLE_EQ(ibs(p, y, {false}).ibs, 0.25);
}

TEST(Brier, MatchesLonghandOracle) {
  Rng rng(34);
  for (int rep = 0; rep < 100; ++rep) {
    const int T = 1 + static_cast<int>(rng.below(10));
    const auto n = 1 + rng.below(150);
    const auto y = oracle::random_labels(rng, n, T, rng.uniform(0.0, 0.6));
    const auto p = oracle::random_isds(rng, n, T, false);
    for (bool w : {true, false}) {
      double ref = 0.0;
      bool defined = true;
      try {
        ref = oracle::ibs(p, y, w);
        defined = std::isfinite(ref);
      } catch (...) {
        defined = false;
      }
      if (!defined) continue;
      EXPECT_NEAR(ibs(p, y, {w}).ibs, ref, 1e-9);
    }
  }
}

TEST(Brier, DecompositionSumsToScore) {
  Rng rng(35);
  for (int rep = 0; rep < 100; ++rep) {
    const int T = 1 + static_cast<int>(rng.below(10));
    const auto n = 20 + rng.below(150);
    const auto y = oracle::random_labels(rng, n, T, rng.uniform(0.0, 0.5));
    const auto p = oracle::random_isds(rng, n, T, rep % 2 == 0);
    BrierOptions opt;
    opt.ipcw = rep % 3 != 0;
    opt.forecast_groups = 1 + static_cast<int>(rng.below(12));
    BrierReport r;
    try {
      r = ibs(p, y, opt);
    } catch (const UndefinedMetric&) {
      continue;
    }
    const auto& d = r.decomposition;
    EXPECT_NEAR(d.cal - d.res + d.unc, r.ibs, 1e-9);
    EXPECT_GE(d.res, 0.0);
    EXPECT_GE(d.unc, 0.0);
    for (std::size_t k = 0; k < r.per_bin.size(); ++k) {
      const auto& b = r.per_bin_decomposition[k];
      EXPECT_NEAR(b.cal - b.res + b.unc, r.per_bin[k], 1e-9);
    }
  }
}

TEST(Brier, RangeProperty) {
  Rng rng(36);
  for (int rep = 0; rep < 100; ++rep) {
    const int T = 1 + static_cast<int>(rng.below(10));
    const auto n = 1 + rng.below(100);
    const auto y = oracle::random_labels(rng, n, T, 0.0);
    const auto p = oracle::random_isds(rng, n, T, false);
    const double s = ibs(p, y, {false}).ibs;
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(KmCal, PointMassAgainstUniformIsLogFour) {
  km::SurvivalCurve a{{1, 0, 0, 0}}, b{{1, 0.75, 0.5, 0.25}};
  EXPECT_NEAR(km_cal(a, b), std::log(4.0), 1e-9);
  EXPECT_EQ(km_cal(b, b), 0.0);
}

TEST(KmCal, MatchesOracleAndIsNonNegative) {
  Rng rng(37);
  for (int rep = 0; rep < 100; ++rep) {
    const int T = 1 + static_cast<int>(rng.below(10));
    const auto n = 1 + rng.below(150);
    const auto y = oracle::random_labels(rng, n, T, rng.uniform(0.0, 0.7));
    const auto p = oracle::random_isds(rng, n, T, rep % 2 == 0);
    const double v = km_cal(p, y);
    EXPECT_NEAR(v, oracle::km_cal(p, y), 1e-9);
    EXPECT_GE(v, 0.0);
  }
}

TEST(KmCal, ZeroWhenMeanCurveEqualsKm) {
  const std::vector<EventLabel> y{{1, 0}, {1, 1}, {1, 2}, {1, 3}};
  const std::vector<Isd> p(4, Isd::from_pmf(std::vector<double>{0.25, 0.25, 0.25, 0.25, 0.0}));
  EXPECT_NEAR(km_cal(p, y), 0.0, 1e-12);
}
