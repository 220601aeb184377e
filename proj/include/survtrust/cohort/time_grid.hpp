#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "survtrust/core/error.hpp"
#include "survtrust/core/stats.hpp"

namespace survtrust::cohort {

enum class Binning { quantile, equal_width };

inline const char* to_string(Binning b) { return b == Binning::quantile ? "quantile" : "equal_width"; }

inline Binning binning_from_string(const std::string& s) {
  if (s == "quantile") return Binning::quantile;
  if (s == "equal_width") return Binning::equal_width;
  throw InputError("unknown binning scheme '" + s + "'");
}

// T intervals delimited by T+1 strictly increasing cut points starting at 0.
// Interval k is [cut[k], cut[k+1]); times at or past the last cut fall in T-1.
class TimeGrid {
 public:
  TimeGrid() = default;

  explicit TimeGrid(std::vector<double> cut_points) : cuts_(std::move(cut_points)) {
    if (cuts_.size() < 2) throw InputError("time grid needs at least two cut points");
    if (cuts_.front() != 0.0) throw InputError("time grid must start at 0");
    for (std::size_t i = 1; i < cuts_.size(); ++i)
      if (!(cuts_[i] > cuts_[i - 1]) || !std::isfinite(cuts_[i]))
        throw InputError("time grid cut points must be finite and strictly increasing");
  }

  static TimeGrid equal_width(double max_time, int intervals) {
    if (intervals < 1) throw InputError("number of intervals must be >= 1");
    if (!(max_time > 0.0)) throw InputError("equal-width grid needs a positive time span");
    std::vector<double> cuts(static_cast<std::size_t>(intervals) + 1);
    for (int i = 0; i <= intervals; ++i) cuts[static_cast<std::size_t>(i)] = max_time * i / intervals;
    return TimeGrid(std::move(cuts));
  }

  int intervals() const noexcept { return static_cast<int>(cuts_.size()) - 1; }
  std::span<const double> cut_points() const noexcept { return cuts_; }

  int bin_of(double t) const {
    if (!(t >= 0.0)) throw InputError("time must be >= 0");
    const auto it = std::upper_bound(cuts_.begin(), cuts_.end(), t);
    const int k = static_cast<int>(it - cuts_.begin()) - 1;
    return std::min(k, intervals() - 1);
  }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  std::vector<double> cuts_;
};

// Fits cut points to observed times. Quantile scheme: cuts at the i/T sample
// quantiles (type 7), cut[0] pinned to 0, duplicates collapsed, then the widest
// interval is split at its midpoint until there are T+1 cuts.
inline TimeGrid fit_time_grid(std::span<const double> times, int intervals = 10, Binning scheme = Binning::quantile) {
  if (intervals < 1) throw InputError("number of intervals must be >= 1");
  if (times.empty()) throw InputError("cannot fit a time grid to an empty cohort");
  std::vector<double> sorted(times.begin(), times.end());
  for (double t : sorted)
    if (!(t >= 0.0) || !std::isfinite(t)) throw InputError("observed times must be finite and >= 0");
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> uniq = sorted;
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (static_cast<int>(uniq.size()) < intervals)
    throw InputError("only " + std::to_string(uniq.size()) + " distinct observed times for " +
                     std::to_string(intervals) + " intervals; lower the number of intervals");

  if (scheme == Binning::equal_width) return TimeGrid::equal_width(sorted.back() > 0 ? sorted.back() : 1.0, intervals);

  std::vector<double> cuts;
  cuts.reserve(static_cast<std::size_t>(intervals) + 1);
  cuts.push_back(0.0);
  for (int i = 1; i <= intervals; ++i) cuts.push_back(quantile_sorted(sorted, static_cast<double>(i) / intervals));
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  if (cuts.size() == 1) cuts.push_back(1.0);
  while (static_cast<int>(cuts.size()) < intervals + 1) {
    std::size_t widest = 0;
    for (std::size_t i = 1; i + 1 < cuts.size(); ++i)
      if (cuts[i + 1] - cuts[i] > cuts[widest + 1] - cuts[widest]) widest = i;
    cuts.insert(cuts.begin() + static_cast<std::ptrdiff_t>(widest) + 1, 0.5 * (cuts[widest] + cuts[widest + 1]));
  }
  return TimeGrid(std::move(cuts));
}

}  // namespace survtrust::cohort
