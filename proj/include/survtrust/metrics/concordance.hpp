#pragma once

// Time-dependent concordance on the discrete grid.
//
// A pair (i, j) is comparable when delta_i = 1 and t_i < t_j; it is concordant
// when subject i carries the higher predicted risk at bin t_i. Counting runs
// bin by bin: the candidates j for every event at bin k share the same score
// column, so one sort per bin answers all comparisons by binary search.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "survtrust/core/error.hpp"
#include "survtrust/core/labels.hpp"
#include "survtrust/ndsm/isd.hpp"

namespace survtrust::metrics {

enum class TieMode {
  half,    // exact score ties earn 1/2
  strict,  // exact score ties earn 0
};

struct ConcordanceCounts {
  std::uint64_t concordant = 0;
  std::uint64_t tied = 0;
  std::uint64_t pairs = 0;

  double value(TieMode mode) const {
    if (pairs == 0) throw UndefinedMetric("concordance undefined: no comparable pairs");
    const double num = static_cast<double>(concordant) + (mode == TieMode::half ? 0.5 * static_cast<double>(tied) : 0.0);
    return num / static_cast<double>(pairs);
  }
};

// Ordered comparable pairs (i, j) among `subset` (indices into labels).
inline std::vector<std::pair<std::size_t, std::size_t>> comparable_pairs(std::span<const EventLabel> labels,
                                                                         std::span<const std::size_t> subset) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i : subset) {
    if (!labels[i].event()) continue;
    for (std::size_t j : subset)
      if (labels[i].time_bin < labels[j].time_bin) out.emplace_back(i, j);
  }
  return out;
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

// risk(i, k): predicted risk of subject i at bin k; higher = earlier event.
// Anchors supply the events i, comparators the later subjects j.
template <class RiskFn>
ConcordanceCounts concordance_counts(std::span<const EventLabel> labels, std::span<const std::size_t> anchors,
                                     std::span<const std::size_t> comparators, RiskFn&& risk) {
  ConcordanceCounts c;
  if (anchors.empty() || comparators.empty()) return c;
  int max_bin = 0;
  for (std::size_t i : anchors) max_bin = std::max(max_bin, labels[i].time_bin);
  for (std::size_t j : comparators) max_bin = std::max(max_bin, labels[j].time_bin);
  std::vector<std::vector<std::size_t>> events(static_cast<std::size_t>(max_bin) + 1);
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(max_bin) + 1);
  for (std::size_t i : anchors)
    if (labels[i].event()) events[static_cast<std::size_t>(labels[i].time_bin)].push_back(i);
  for (std::size_t j : comparators) members[static_cast<std::size_t>(labels[j].time_bin)].push_back(j);
  std::vector<std::size_t> later;  // comparators with time_bin > k
  std::vector<double> scores;
  for (std::size_t k = members.size(); k-- > 0;) {
    if (!events[k].empty() && !later.empty()) {
      scores.clear();
      for (std::size_t j : later) scores.push_back(risk(j, static_cast<int>(k)));
      std::sort(scores.begin(), scores.end());
      for (std::size_t i : events[k]) {
        const double s = risk(i, static_cast<int>(k));
        const auto [lo, hi] = std::equal_range(scores.begin(), scores.end(), s);
        c.concordant += static_cast<std::uint64_t>(lo - scores.begin());
        c.tied += static_cast<std::uint64_t>(hi - lo);
        c.pairs += scores.size();
      }
    }
    later.insert(later.end(), members[k].begin(), members[k].end());
  }
  return c;
}

template <class RiskFn>
ConcordanceCounts concordance_counts(std::span<const EventLabel> labels, std::span<const std::size_t> subset,
                                     RiskFn&& risk) {
  return concordance_counts(labels, subset, subset, std::forward<RiskFn>(risk));
}

inline ConcordanceCounts c_td_counts(std::span<const ndsm::Isd> predictions, std::span<const EventLabel> labels,
                                     std::span<const std::size_t> subset) {
  if (predictions.size() != labels.size()) throw InputError("predictions and labels differ in length");
  return concordance_counts(labels, subset, [&](std::size_t i, int k) {
    return predictions[i].cif[static_cast<std::size_t>(k)];
  });
}

// Fraction of comparable pairs with F(t_i | X_i) > F(t_i | X_j).
inline double c_td(std::span<const ndsm::Isd> predictions, std::span<const EventLabel> labels,
                   TieMode ties = TieMode::half) {
  const auto idx = all_indices(labels.size());
  return c_td_counts(predictions, labels, idx).value(ties);
}

}  // namespace survtrust::metrics
