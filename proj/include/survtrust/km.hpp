#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "survtrust/core/error.hpp"
#include "survtrust/core/labels.hpp"

namespace survtrust::km {

// Step survival curve on the grid: values[k] is survival after bin k-1, so
// values[0] == 1 and values has T+1 entries.
struct SurvivalCurve {
  std::vector<double> values;

  int intervals() const noexcept { return static_cast<int>(values.size()) - 1; }
  double after_bin(int k) const { return values[static_cast<std::size_t>(k) + 1]; }
  double before_bin(int k) const { return values[static_cast<std::size_t>(k)]; }
};

enum class Target { event, censoring };

// Product-limit estimate. At-risk count entering bin k is the number of
// records with time_bin >= k; within a bin, events precede censorings. For the
// censoring target the indicator is flipped.
inline SurvivalCurve km_estimate(std::span<const EventLabel> labels, int intervals, Target target = Target::event) {
  if (labels.empty()) throw InputError("Kaplan-Meier estimate of an empty cohort");
  check_labels(labels, intervals);
  const auto T = static_cast<std::size_t>(intervals);
  std::vector<std::size_t> exits(T, 0), hits(T, 0);
  for (const auto& l : labels) {
    const auto k = static_cast<std::size_t>(l.time_bin);
    ++exits[k];
    const bool hit = target == Target::event ? l.delta == 1 : l.delta == 0;
    if (hit) ++hits[k];
  }
  // Between bins with removals other than targets the factors (n-d)/n
  // telescope, so S is evaluated as base * (n_k - d_k) / n_base over each such
  // stretch. Without censoring this is one division: exactly 1 - ECDF.
  SurvivalCurve c;
  c.values.assign(T + 1, 1.0);
  std::size_t at_risk = labels.size();
  double base = 1.0;
  std::size_t n_base = at_risk;
  for (std::size_t k = 0; k < T; ++k) {
    if (at_risk == 0) {
      c.values[k + 1] = c.values[k];
      continue;
    }
    c.values[k + 1] = base * (static_cast<double>(at_risk - hits[k]) / static_cast<double>(n_base));
    at_risk -= exits[k];
    if (exits[k] != hits[k]) {
      base = c.values[k + 1];
      n_base = at_risk;
    }
  }
  return c;
}

inline std::vector<std::size_t> at_risk_counts(std::span<const EventLabel> labels, int intervals) {
  std::vector<std::size_t> exits(static_cast<std::size_t>(intervals), 0);
  for (const auto& l : labels) ++exits[static_cast<std::size_t>(l.time_bin)];
  std::vector<std::size_t> n(static_cast<std::size_t>(intervals), 0);
  std::size_t at_risk = labels.size();
  for (std::size_t k = 0; k < n.size(); ++k) {
    n[k] = at_risk;
    at_risk -= exits[k];
  }
  return n;
}

}  // namespace survtrust::km
