#pragma once

// KM-Cal: KL divergence from the Kaplan-Meier event distribution to the
// event distribution of the mean predicted survival curve. Both curves are
// turned into T+1 bin masses p_k = S(before k) - S(after k), the last entry
// being the survival left at the end of the grid; masses are smoothed by
// 1e-12 and renormalized before the divergence.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "survtrust/core/error.hpp"
#include "survtrust/core/labels.hpp"
#include "survtrust/km.hpp"
#include "survtrust/ndsm/isd.hpp"

namespace survtrust::metrics {

inline constexpr double kKlSmoothing = 1e-12;

inline km::SurvivalCurve mean_survival_curve(std::span<const ndsm::Isd> predictions) {
  if (predictions.empty()) throw InputError("mean survival curve of no predictions");
  const auto T = static_cast<std::size_t>(predictions.front().intervals());
  km::SurvivalCurve c;
  c.values.assign(T + 1, 0.0);
  c.values[0] = 1.0;
  std::vector<double> sum(T, 0.0);
  for (const auto& p : predictions) {
    if (static_cast<std::size_t>(p.intervals()) != T) throw InputError("predictions on different grids");
    for (std::size_t k = 0; k < T; ++k) sum[k] += p.survival[k];
  }
  for (std::size_t k = 0; k < T; ++k) c.values[k + 1] = sum[k] / static_cast<double>(predictions.size());
  return c;
}

inline std::vector<double> curve_to_pmf(const km::SurvivalCurve& c) {
  const auto T = static_cast<std::size_t>(c.intervals());
  std::vector<double> p(T + 1);
  for (std::size_t k = 0; k < T; ++k) p[k] = std::max(0.0, c.values[k] - c.values[k + 1]);
  p[T] = std::max(0.0, c.values[T]);
  return p;
}

inline double kl_divergence(std::span<const double> p, std::span<const double> q, double eps = kKlSmoothing) {
  if (p.size() != q.size()) throw InputError("KL divergence of distributions on different supports");
  double sp = 0.0, sq = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    sp += p[k] + eps;
    sq += q[k] + eps;
  }
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double a = (p[k] + eps) / sp;
    const double b = (q[k] + eps) / sq;
    kl += a * std::log(a / b);
  }
  return std::max(0.0, kl);
}

inline double km_cal(const km::SurvivalCurve& km_curve, const km::SurvivalCurve& predicted) {
  return kl_divergence(curve_to_pmf(km_curve), curve_to_pmf(predicted));
}

inline double km_cal(std::span<const ndsm::Isd> predictions, std::span<const EventLabel> labels) {
  if (predictions.empty()) throw InputError("KM-Cal needs at least one prediction");
  if (predictions.size() != labels.size()) throw InputError("predictions and labels differ in length");
  const int T = predictions.front().intervals();
  return km_cal(km::km_estimate(labels, T), mean_survival_curve(predictions));
}

}  // namespace survtrust::metrics
