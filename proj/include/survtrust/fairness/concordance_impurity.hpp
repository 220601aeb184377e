#pragma once

// Concordance fraction of a subgroup and the concordance impurity across
// subgroups. A comparable pair (delta_i = 1, t_i < t_j) is concordant when
// S_i(t_i) < S_j(t_i).

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "survtrust/core/error.hpp"
#include "survtrust/core/labels.hpp"
#include "survtrust/fairness/partition.hpp"
#include "survtrust/metrics/concordance.hpp"
#include "survtrust/ndsm/isd.hpp"

namespace survtrust::fairness {

enum class PairScope {
  within,  // both members of a pair in the group
  cross,   // event member in the group, partner anywhere
};

inline metrics::ConcordanceCounts concordance_fraction_counts(std::span<const ndsm::Isd> predictions,
                                                              std::span<const EventLabel> labels,
                                                              std::span<const std::size_t> group,
                                                              PairScope scope = PairScope::within) {
  if (predictions.size() != labels.size()) throw InputError("predictions and labels differ in length");
  const auto risk = [&](std::size_t i, int k) { return -predictions[i].survival[static_cast<std::size_t>(k)]; };
  if (scope == PairScope::within) return metrics::concordance_counts(labels, group, group, risk);
  const auto everyone = metrics::all_indices(labels.size());
  return metrics::concordance_counts(labels, group, everyone, risk);
}

inline double concordance_fraction(std::span<const ndsm::Isd> predictions, std::span<const EventLabel> labels,
                                   std::span<const std::size_t> group,
                                   metrics::TieMode ties = metrics::TieMode::half,
                                   PairScope scope = PairScope::within) {
  return concordance_fraction_counts(predictions, labels, group, scope).value(ties);
}

struct CiTdResult {
  std::vector<std::optional<double>> cf;  // per group, nullopt = skipped
  std::vector<std::string> notes;
  double value = 0.0;

  double percent() const noexcept { return 100.0 * value; }
};

struct CiTdOptions {
  metrics::TieMode ties = metrics::TieMode::half;
  PairScope scope = PairScope::within;
};

// max CF - min CF over groups with a defined concordance fraction.
inline double ci_td_from_fractions(std::span<const double> cf) {
  if (cf.size() < 2) throw UndefinedMetric("CI-td needs at least two groups with a defined concordance fraction");
  const auto [lo, hi] = std::minmax_element(cf.begin(), cf.end());
  return *hi - *lo;
}

inline CiTdResult ci_td(std::span<const ndsm::Isd> predictions, std::span<const EventLabel> labels,
                        const GroupPartition& partition, const CiTdOptions& opt = {}) {
  CiTdResult r;
  std::vector<double> defined;
  for (std::size_t g = 0; g < partition.groups(); ++g) {
    const auto c = concordance_fraction_counts(predictions, labels, partition.indices[g], opt.scope);
    if (c.pairs == 0) {
      r.cf.emplace_back();
      r.notes.push_back("group '" + partition.labels[g] + "' skipped: no comparable pair");
      continue;
    }
    r.cf.emplace_back(c.value(opt.ties));
    defined.push_back(*r.cf.back());
  }
  r.value = ci_td_from_fractions(defined);
  return r;
}

}  // namespace survtrust::fairness
