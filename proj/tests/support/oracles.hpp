#pragma once

// Straight-line reference implementations used as test oracles, plus random
// input generators. Nothing here calls into the library's metric code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "survtrust/cohort/generator.hpp"
#include "survtrust/core/labels.hpp"
#include "survtrust/core/random.hpp"
#include "survtrust/ndsm/isd.hpp"

namespace oracle {

using survtrust::EventLabel;
using survtrust::Rng;
using survtrust::ndsm::Isd;

// ------------------------------------------------------------- generators

inline Isd isd_from_weights(const std::vector<double>& w) {
  double total = 0.0;
  for (double x : w) total += x;
  std::vector<double> pmf;
  for (double x : w) pmf.push_back(x / total);
  return Isd::from_pmf(pmf);
}

inline Isd random_isd(Rng& rng, int T) {
  std::vector<double> w(static_cast<std::size_t>(T) + 1);
  for (auto& x : w) x = std::exp(rng.normal(0.0, 1.5));
  return isd_from_weights(w);
}

// Predictions drawn from a handful of prototypes, so exact CIF ties are common.
inline std::vector<Isd> random_isds(Rng& rng, std::size_t n, int T, bool tie_heavy) {
  std::vector<Isd> protos;
  if (tie_heavy)
    for (int p = 0; p < 3; ++p) protos.push_back(random_isd(rng, T));
  std::vector<Isd> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(tie_heavy ? protos[rng.below(protos.size())] : random_isd(rng, T));
  return out;
}

inline std::vector<EventLabel> random_labels(Rng& rng, std::size_t n, int T, double censor_prob) {
  std::vector<EventLabel> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({rng.bernoulli(censor_prob) ? 0 : 1, static_cast<int>(rng.below(static_cast<std::uint64_t>(T)))});
  return out;
}

// ------------------------------------------------------------ concordance

// Exact counts over every ordered pair: numerator doubled so ties stay integral.
struct PairTally {
  long long twice_concordant = 0;
  long long pairs = 0;
  double value() const { return static_cast<double>(twice_concordant) / (2.0 * static_cast<double>(pairs)); }
};

inline PairTally c_td(const std::vector<Isd>& p, const std::vector<EventLabel>& y) {
  PairTally t;
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (i == j || y[i].delta != 1 || !(y[i].time_bin < y[j].time_bin)) continue;
      const auto k = static_cast<std::size_t>(y[i].time_bin);
      ++t.pairs;
      if (p[i].cif[k] > p[j].cif[k]) t.twice_concordant += 2;
      else if (p[i].cif[k] == p[j].cif[k]) t.twice_concordant += 1;
    }
  return t;
}

inline PairTally concordance_fraction(const std::vector<Isd>& p, const std::vector<EventLabel>& y,
                                      const std::vector<std::size_t>& group) {
  PairTally t;
  for (std::size_t i : group)
    for (std::size_t j : group) {
      if (i == j || y[i].delta != 1 || !(y[i].time_bin < y[j].time_bin)) continue;
      const auto k = static_cast<std::size_t>(y[i].time_bin);
      ++t.pairs;
      if (p[i].survival[k] < p[j].survival[k]) t.twice_concordant += 2;
      else if (p[i].survival[k] == p[j].survival[k]) t.twice_concordant += 1;
    }
  return t;
}

// ---------------------------------------------------------- Kaplan-Meier

// S[0] = 1, S[k+1] = survival after bin k; at-risk and event counts rescanned
// from the raw labels for every bin.
inline std::vector<double> km(const std::vector<EventLabel>& y, int T, bool censoring = false) {
  std::vector<double> s{1.0};
  for (int k = 0; k < T; ++k) {
    double n = 0.0, d = 0.0;
    for (const auto& l : y) {
      if (l.time_bin >= k) n += 1.0;
      if (l.time_bin == k && (censoring ? l.delta == 0 : l.delta == 1)) d += 1.0;
    }
    s.push_back(n > 0.0 ? s.back() * (1.0 - d / n) : s.back());
  }
  return s;
}

inline std::vector<double> one_minus_ecdf(const std::vector<EventLabel>& y, int T) {
  std::vector<double> s{1.0};
  for (int k = 0; k < T; ++k) {
    std::size_t later = 0;
    for (const auto& l : y) later += l.time_bin > k ? 1 : 0;
    s.push_back(static_cast<double>(later) / static_cast<double>(y.size()));
  }
  return s;
}

// ---------------------------------------------------------------- Brier

inline double ibs(const std::vector<Isd>& p, const std::vector<EventLabel>& y, bool ipcw = true) {
  const int T = p.front().intervals();
  const auto G = km(y, T, true);
  double total = 0.0;
  for (int k = 0; k < T; ++k) {
    double sum = 0.0, n = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double s = p[i].survival[static_cast<std::size_t>(k)];
      if (y[i].time_bin > k) {
        const double g = ipcw ? G[static_cast<std::size_t>(k) + 1] : 1.0;
        if (g == 0.0) continue;
        sum += (s - 1.0) * (s - 1.0) / g;
      } else if (y[i].delta == 1) {
        const double g = ipcw ? G[static_cast<std::size_t>(y[i].time_bin)] : 1.0;
        if (g == 0.0) continue;
        sum += s * s / g;
      }
      n += 1.0;
    }
    total += sum / n;
  }
  return total / T;
}

// ------------------------------------------------------------------ KM-Cal

inline double km_cal(const std::vector<Isd>& p, const std::vector<EventLabel>& y) {
  const int T = p.front().intervals();
  const auto s_km = km(y, T);
  std::vector<double> s_hat(static_cast<std::size_t>(T) + 1, 0.0);
  s_hat[0] = 1.0;
  for (int k = 0; k < T; ++k) {
    double m = 0.0;
    for (const auto& d : p) m += d.survival[static_cast<std::size_t>(k)];
    s_hat[static_cast<std::size_t>(k) + 1] = m / static_cast<double>(p.size());
  }
  auto to_pmf = [&](const std::vector<double>& s) {
    std::vector<double> q;
    for (int k = 0; k < T; ++k) q.push_back(std::max(0.0, s[static_cast<std::size_t>(k)] - s[static_cast<std::size_t>(k) + 1]));
    q.push_back(std::max(0.0, s.back()));
    double z = 0.0;
    for (auto& v : q) z += (v += 1e-12);
    for (auto& v : q) v /= z;
    return q;
  };
  const auto a = to_pmf(s_km), b = to_pmf(s_hat);
  double kl = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) kl += a[k] * std::log(a[k] / b[k]);
  return std::max(0.0, kl);
}

// ------------------------------------------------------------ Hosmer-Lemeshow

inline double hosmer_lemeshow(const std::vector<Isd>& p, const std::vector<EventLabel>& y,
                              const std::vector<std::size_t>& group) {
  std::vector<EventLabel> gy;
  int t_max = 0;
  for (std::size_t i : group) {
    gy.push_back(y[i]);
    t_max = std::max(t_max, y[i].time_bin);
  }
  const int T = p.front().intervals();
  const auto s = km(gy, T);
  double hl = 0.0;
  for (int k = 0; k <= t_max; ++k) {
    double n = 0.0, m = 0.0;
    for (const auto& l : gy) n += l.time_bin >= k ? 1.0 : 0.0;
    for (std::size_t i : group) m += p[i].survival[static_cast<std::size_t>(k)];
    m /= static_cast<double>(group.size());
    if (m <= 0.0 || m >= 1.0) continue;
    const double diff = s[static_cast<std::size_t>(k) + 1] - m;
    hl += diff * diff * n / (m * (1.0 - m));
  }
  return hl;
}

// ------------------------------------------------- generator ground truth

// Event-time distribution of a simulated subject on its own interval grid,
// conditioned on surviving interval 0. `drop_gamma` removes the subject's
// group offsets from the hazard logit.
inline Isd truth_isd(const survtrust::cohort::SubjectTruth& t, const survtrust::cohort::CohortConfig& cfg,
                     bool drop_gamma) {
  double offset = 0.0;
  if (drop_gamma)
    for (const auto& a : cfg.attributes) {
      if (a.gamma.empty()) continue;
      const auto pos = std::find(a.levels.begin(), a.levels.end(), t.groups.at(a.name)) - a.levels.begin();
      offset += a.gamma[static_cast<std::size_t>(pos)];
    }
  std::vector<double> pmf(t.hazard.size() + 1, 0.0);
  double alive = 1.0;
  for (std::size_t k = 0; k < t.hazard.size(); ++k) {
    const double logit = std::log(t.hazard[k] / (1.0 - t.hazard[k])) - offset;
    const double h = 1.0 / (1.0 + std::exp(-logit));
    if (k > 0) pmf[k] = alive * h;
    alive *= 1.0 - h;
  }
  pmf.back() = alive;
  double z = 0.0;
  for (double v : pmf) z += v;
  for (double& v : pmf) v /= z;
  return Isd::from_pmf(pmf);
}

inline EventLabel truth_label(const survtrust::cohort::SubjectTruth& t) {
  return {t.delta, t.delta ? t.event_interval : t.censor_interval};
}

inline bool baseline_converter(const survtrust::cohort::SubjectTruth& t) { return t.delta == 1 && t.event_interval == 0; }

}  // namespace oracle
