#pragma once

// Hosmer-Lemeshow style statistic of one group against its own KM curve:
//   HL = sum_{i <= t_max} (KM_i - p_i)^2 n_i / (p_i (1 - p_i))
// with p_i the mean predicted survival at bin i, KM_i the group KM survival
// after bin i and n_i the number at risk entering bin i.

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "survtrust/core/error.hpp"
#include "survtrust/core/labels.hpp"
#include "survtrust/km.hpp"
#include "survtrust/ndsm/isd.hpp"

namespace survtrust::fairness {

inline double hl_term(double km, double p, double n) { return (km - p) * (km - p) * n / (p * (1.0 - p)); }

struct HlResult {
  double value = 0.0;
  int bins_used = 0;
  std::vector<int> skipped_bins;  // predicted survival at 0 or 1
};

inline HlResult hosmer_lemeshow(std::span<const ndsm::Isd> predictions, std::span<const EventLabel> labels,
                                std::span<const std::size_t> group) {
  if (predictions.size() != labels.size()) throw InputError("predictions and labels differ in length");
  if (group.empty()) throw InputError("Hosmer-Lemeshow of an empty group");
  const int T = predictions[group.front()].intervals();
  std::vector<EventLabel> g_labels;
  int t_max = 0;
  for (std::size_t i : group) {
    g_labels.push_back(labels[i]);
    t_max = std::max(t_max, labels[i].time_bin);
  }
  const auto km_curve = km::km_estimate(g_labels, T);
  const auto n = km::at_risk_counts(g_labels, T);
  HlResult r;
  for (int k = 0; k <= t_max; ++k) {
    double p = 0.0;
    for (std::size_t i : group) p += predictions[i].survival[static_cast<std::size_t>(k)];
    p /= static_cast<double>(group.size());
    if (!(p > 0.0 && p < 1.0)) {
      r.skipped_bins.push_back(k);
      continue;
    }
    r.value += hl_term(km_curve.after_bin(k), p, static_cast<double>(n[static_cast<std::size_t>(k)]));
    ++r.bins_used;
  }
  if (r.bins_used == 0) throw UndefinedMetric("Hosmer-Lemeshow undefined: every bin has predicted survival 0 or 1");
  return r;
}

}  // namespace survtrust::fairness
