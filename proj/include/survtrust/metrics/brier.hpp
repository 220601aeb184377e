#pragma once

// Inverse-probability-of-censoring weighted Brier score on the grid bins and
// its time average (IBS).
//
// At bin k subject i contributes w_i * (S_i(k) - 1{t_i > k})^2 with
//   w_i = 1 / G(after bin k)   if t_i > k
//   w_i = 1 / G(before t_i)    if t_i <= k and delta_i = 1
//   w_i = 0                    if t_i <= k and delta_i = 0
// where G is the censoring survival curve. The sum is divided by the number of
// subjects (Graf et al.).
//
// Decomposition per bin over equal-width forecast groups g with weighted
// outcome means o_g and overall mean o:
//   RES = sum_g W_g (o_g - o)^2 / N,   UNC = W o (1 - o) / N,
//   CAL = sum_g sum_{i in g} w_i [(f_i - o_i)^2 - (o_g - o_i)^2] / N.
// CAL reduces to the usual reliability term when forecasts are constant within
// a group, and BS = CAL - RES + UNC holds exactly in every case.

#include <algorithm>
#include <span>
#include <vector>

#include "survtrust/core/error.hpp"
#include "survtrust/core/labels.hpp"
#include "survtrust/km.hpp"
#include "survtrust/ndsm/isd.hpp"

namespace survtrust::metrics {

struct BrierDecomposition {
  double cal = 0.0;
  double res = 0.0;
  double unc = 0.0;
};

struct BrierOptions {
  bool ipcw = true;
  int forecast_groups = 10;
};

struct BrierReport {
  std::vector<double> per_bin;
  std::vector<BrierDecomposition> per_bin_decomposition;
  double ibs = 0.0;
  BrierDecomposition decomposition;
  std::size_t excluded = 0;  // subject-bin cells dropped for a zero censoring weight
};

inline BrierReport ibs(std::span<const ndsm::Isd> predictions, std::span<const EventLabel> labels,
                       const km::SurvivalCurve& censor_km, const BrierOptions& opt = {}) {
  if (predictions.size() != labels.size()) throw InputError("predictions and labels differ in length");
  if (labels.empty()) throw UndefinedMetric("Brier score of an empty cohort");
  const int T = predictions.front().intervals();
  if (opt.ipcw && censor_km.intervals() != T) throw InputError("censoring curve grid does not match predictions");
  check_labels(labels, T);
  const auto G = static_cast<std::size_t>(std::max(1, opt.forecast_groups));

  BrierReport rep;
  for (int k = 0; k < T; ++k) {
    std::vector<double> w(labels.size(), 0.0), f(labels.size()), o(labels.size());
    std::size_t used = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      f[i] = predictions[i].survival[static_cast<std::size_t>(k)];
      o[i] = labels[i].time_bin > k ? 1.0 : 0.0;
      double g = 1.0;
      if (labels[i].time_bin > k) {
        if (opt.ipcw) g = censor_km.after_bin(k);
      } else if (labels[i].event()) {
        if (opt.ipcw) g = censor_km.before_bin(labels[i].time_bin);
      } else {
        ++used;  // censored before the horizon: counted, zero weight
        continue;
      }
      if (!(g > 0.0)) {
        ++rep.excluded;
        continue;
      }
      w[i] = 1.0 / g;
      ++used;
    }
    if (used == 0) throw UndefinedMetric("Brier score undefined: every subject excluded at a bin");
    const double N = static_cast<double>(used);

    double bs = 0.0, W = 0.0, WO = 0.0;
    std::vector<double> wg(G, 0.0), wog(G, 0.0);
    std::vector<std::size_t> group(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const double r = f[i] - o[i];
      bs += w[i] * r * r;
      W += w[i];
      WO += w[i] * o[i];
      group[i] = std::min(G - 1, static_cast<std::size_t>(std::max(0.0, f[i]) * static_cast<double>(G)));
      wg[group[i]] += w[i];
      wog[group[i]] += w[i] * o[i];
    }
    bs /= N;
    BrierDecomposition d;
    const double obar = W > 0.0 ? WO / W : 0.0;
    std::vector<double> og(G, 0.0);
    for (std::size_t g = 0; g < G; ++g) {
      og[g] = wg[g] > 0.0 ? wog[g] / wg[g] : 0.0;
      d.res += wg[g] * (og[g] - obar) * (og[g] - obar);
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const double a = f[i] - o[i], b = og[group[i]] - o[i];
      d.cal += w[i] * (a * a - b * b);
    }
    d.unc = W * obar * (1.0 - obar);
    d.cal /= N;
    d.res /= N;
    d.unc /= N;

    rep.per_bin.push_back(bs);
    rep.per_bin_decomposition.push_back(d);
  }
  for (std::size_t k = 0; k < rep.per_bin.size(); ++k) {
    rep.ibs += rep.per_bin[k];
    rep.decomposition.cal += rep.per_bin_decomposition[k].cal;
    rep.decomposition.res += rep.per_bin_decomposition[k].res;
    rep.decomposition.unc += rep.per_bin_decomposition[k].unc;
  }
  const double nb = static_cast<double>(rep.per_bin.size());
  rep.ibs /= nb;
  rep.decomposition.cal /= nb;
  rep.decomposition.res /= nb;
  rep.decomposition.unc /= nb;
  return rep;
}

// Convenience: censoring curve estimated from the same labels.
inline BrierReport ibs(std::span<const ndsm::Isd> predictions, std::span<const EventLabel> labels,
                       const BrierOptions& opt = {}) {
  if (labels.empty()) throw UndefinedMetric("Brier score of an empty cohort");
  const int T = predictions.front().intervals();
  return ibs(predictions, labels, km::km_estimate(labels, T, km::Target::censoring), opt);
}

}  // namespace survtrust::metrics
