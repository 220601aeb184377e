#pragma once

// Training objectives for discrete-time survival networks.
//
// The pmf-level functions (loss_nll, loss_rps, loss_rank, loss_mtlr) evaluate
// the losses on a predicted distribution. The *_grad functions evaluate the
// same quantities from raw network outputs and also return d(loss)/d(logits)
// for back-propagation.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "survtrust/core/error.hpp"
#include "survtrust/core/labels.hpp"
#include "survtrust/ndsm/isd.hpp"

namespace survtrust::ndsm {

enum class Objective { nll, deephit, nmtlr, rps, rps_rank };

inline constexpr Objective kAllObjectives[] = {Objective::nll, Objective::deephit, Objective::nmtlr, Objective::rps,
                                               Objective::rps_rank};

inline const char* to_string(Objective o) {
  switch (o) {
    case Objective::nll: return "nll";
    case Objective::deephit: return "deephit";
    case Objective::nmtlr: return "nmtlr";
    case Objective::rps: return "rps";
    case Objective::rps_rank: return "rpsrank";
  }
  return "?";
}

inline Objective objective_from_string(const std::string& s) {
  for (auto o : kAllObjectives)
    if (s == to_string(o)) return o;
  throw InputError("unknown objective '" + s + "' (expected nll|deephit|nmtlr|rps|rpsrank)");
}

inline bool uses_ranking(Objective o) { return o == Objective::deephit || o == Objective::rps_rank; }

// Network outputs -> event-time pmf for the given objective.
inline std::vector<double> pmf_from_logits(Objective o, std::span<const double> logits) {
  return o == Objective::nmtlr ? mtlr_pmf(logits) : softmax(logits);
}

inline constexpr double kLogFloor = 1e-12;

// --------------------------------------------------------- pmf-level losses

inline double loss_nll(std::span<const double> pmf, int delta, int time_bin) {
  double mass = 0.0;
  if (delta == 1) {
    mass = pmf[static_cast<std::size_t>(time_bin)];
  } else {
    for (std::size_t k = static_cast<std::size_t>(time_bin) + 1; k < pmf.size(); ++k) mass += pmf[k];
  }
  return -std::log(std::max(mass, kLogFloor));
}

// Ranked probability score over the grid bins 0..T-1. Censored subjects are
// scored only up to their censoring bin, against an outcome of "no event".
inline double loss_rps(std::span<const double> pmf, int delta, int time_bin) {
  const std::size_t T = pmf.size() - 1;
  const auto t = static_cast<std::size_t>(time_bin);
  double cif = 0.0, loss = 0.0;
  for (std::size_t k = 0; k < T; ++k) {
    cif += pmf[k];
    if (delta == 1) {
      const double y = k >= t ? 1.0 : 0.0;
      loss += (cif - y) * (cif - y);
    } else if (k <= t) {
      loss += cif * cif;
    }
  }
  return loss;
}

struct RankItem {
  std::span<const double> cif;
  EventLabel label;
};

// Mean of exp(-(F_i(t_i) - F_j(t_i)) / sigma) over comparable pairs
// (delta_i = 1, t_i < t_j); 0 when there are none.
inline double loss_rank(std::span<const RankItem> batch, double sigma = 0.1) {
  double sum = 0.0;
  std::size_t pairs = 0;
  for (const auto& a : batch) {
    if (!a.label.event()) continue;
    const auto t = static_cast<std::size_t>(a.label.time_bin);
    for (const auto& b : batch) {
      if (b.label.time_bin <= a.label.time_bin) continue;
      sum += std::exp(-(a.cif[t] - b.cif[t]) / sigma);
      ++pairs;
    }
  }
  return pairs ? sum / static_cast<double>(pairs) : 0.0;
}

inline double loss_mtlr(std::span<const double> logits, int delta, int time_bin) {
  const auto s = suffix_sums(logits);
  const double norm = log_sum_exp(s);
  const auto t = static_cast<std::size_t>(time_bin);
  const double num = delta == 1 ? s[t] : log_sum_exp(std::span<const double>(s).subspan(t + 1));
  return std::min(norm - num, -std::log(kLogFloor));
}

// --------------------------------------------------- losses with gradients

// Given g = dL/dp for p = softmax(z), writes dL/dz (accumulating).
inline void softmax_backward(std::span<const double> p, std::span<const double> g, std::span<double> dz) {
  double dot = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) dot += p[k] * g[k];
  for (std::size_t k = 0; k < p.size(); ++k) dz[k] += p[k] * (g[k] - dot);
}

// Log-likelihood form of loss_nll from logits; accumulates scale * dL/dz.
inline double nll_grad(std::span<const double> z, EventLabel y, double scale, std::span<double> dz) {
  const auto t = static_cast<std::size_t>(y.time_bin);
  const double norm = log_sum_exp(z);
  const auto tail = z.subspan(t + 1);
  const double num = y.event() ? z[t] : log_sum_exp(tail);
  const double loss = norm - num;
  if (loss > -std::log(kLogFloor)) return -std::log(kLogFloor);  // floored: flat
  const double tail_norm = y.event() ? 0.0 : num;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double p = std::exp(z[k] - norm);
    double target = 0.0;
    if (y.event()) target = k == t ? 1.0 : 0.0;
    else if (k > t) target = std::exp(z[k] - tail_norm);
    dz[k] += scale * (p - target);
  }
  return loss;
}

// loss_rps on p = softmax(z); accumulates scale * dL/dz.
inline double rps_grad(std::span<const double> z, EventLabel y, double scale, std::span<double> dz) {
  const auto p = softmax(z);
  const std::size_t T = p.size() - 1;
  const auto t = static_cast<std::size_t>(y.time_bin);
  std::vector<double> dcif(T, 0.0);
  double cif = 0.0, loss = 0.0;
  for (std::size_t k = 0; k < T; ++k) {
    cif += p[k];
    if (y.event()) {
      const double r = cif - (k >= t ? 1.0 : 0.0);
      loss += r * r;
      dcif[k] = 2.0 * r;
    } else if (k <= t) {
      loss += cif * cif;
      dcif[k] = 2.0 * cif;
    }
  }
  // dL/dp_i = sum_{k >= i, k < T} dL/dcif_k
  std::vector<double> dp(T + 1, 0.0);
  double acc = 0.0;
  for (std::size_t k = T; k-- > 0;) {
    acc += dcif[k];
    dp[k] = scale * acc;
  }
  softmax_backward(p, dp, dz);
  return loss;
}

// loss_mtlr from logits; accumulates scale * dL/dz.
inline double mtlr_grad(std::span<const double> z, EventLabel y, double scale, std::span<double> dz) {
  const auto s = suffix_sums(z);
  const double norm = log_sum_exp(s);
  const auto t = static_cast<std::size_t>(y.time_bin);
  const double num = y.event() ? s[t] : log_sum_exp(std::span<const double>(s).subspan(t + 1));
  const double loss = norm - num;
  if (loss > -std::log(kLogFloor)) return -std::log(kLogFloor);
  // dL/ds_k = q_k - target_k, then dz_j = sum_{k <= j} dL/ds_k.
  double acc = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double q = std::exp(s[k] - norm);
    double target = 0.0;
    if (y.event()) target = k == t ? 1.0 : 0.0;
    else if (k > t) target = std::exp(s[k] - num);
    acc += q - target;
    dz[k] += scale * acc;
  }
  return loss;
}

// Ranking loss over a batch of softmax pmfs; accumulates scale * dL/dp into
// dpmf[i] for every item.
inline double rank_grad(std::span<const std::vector<double>> pmfs, std::span<const EventLabel> labels, double sigma,
                        double scale, std::span<std::vector<double>> dpmf) {
  const std::size_t n = pmfs.size();
  std::vector<std::vector<double>> cif(n);
  for (std::size_t i = 0; i < n; ++i) cif[i] = Isd::from_pmf(pmfs[i]).cif;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i].event())
      for (std::size_t j = 0; j < n; ++j) pairs += labels[j].time_bin > labels[i].time_bin ? 1 : 0;
  if (pairs == 0) return 0.0;
  const double inv = 1.0 / static_cast<double>(pairs);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!labels[i].event()) continue;
    const auto t = static_cast<std::size_t>(labels[i].time_bin);
    for (std::size_t j = 0; j < n; ++j) {
      if (labels[j].time_bin <= labels[i].time_bin) continue;
      const double e = std::exp(-(cif[i][t] - cif[j][t]) / sigma);
      sum += e;
      // d e / dF_i(t) = -e / sigma ; d e / dF_j(t) = +e / sigma ; dF(t)/dp_k = 1 for k <= t
      const double g = scale * inv * e / sigma;
      for (std::size_t k = 0; k <= t; ++k) {
        dpmf[i][k] -= g;
        dpmf[j][k] += g;
      }
    }
  }
  return sum * inv;
}

}  // namespace survtrust::ndsm
