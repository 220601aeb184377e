#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "survtrust/core/error.hpp"

namespace survtrust::ndsm {

// Individual survival distribution over T grid bins plus one beyond-horizon
// bin. cif[k] = P(event in bins 0..k), survival[k] = 1 - cif[k].
struct Isd {
  std::vector<double> pmf;
  std::vector<double> cif;
  std::vector<double> survival;

  int intervals() const noexcept { return static_cast<int>(pmf.size()) - 1; }

  static Isd from_pmf(std::vector<double> pmf) {
    Isd d;
    d.pmf = std::move(pmf);
    d.cif.resize(d.pmf.size());
    d.survival.resize(d.pmf.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < d.pmf.size(); ++k) {
      acc += d.pmf[k];
      d.cif[k] = acc;
      d.survival[k] = 1.0 - acc;
    }
    return d;
  }
};

inline double log_sum_exp(std::span<const double> z) {
  if (z.empty()) return -INFINITY;
  const double m = *std::max_element(z.begin(), z.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

inline std::vector<double> softmax(std::span<const double> z) {
  if (z.empty()) throw InputError("softmax of an empty vector");
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - m);
    s += p[i];
  }
  for (auto& v : p) v /= s;
  return p;
}

// s[k] = sum_{j >= k} z[j]
inline std::vector<double> suffix_sums(std::span<const double> z) {
  std::vector<double> s(z.size());
  double acc = 0.0;
  for (std::size_t k = z.size(); k-- > 0;) {
    acc += z[k];
    s[k] = acc;
  }
  return s;
}

// Multi-task logistic regression parameterization: p(k) ∝ exp(sum_{j>=k} z_j).
inline std::vector<double> mtlr_pmf(std::span<const double> logits) { return softmax(suffix_sums(logits)); }

}  // namespace survtrust::ndsm
