#pragma once

#include <span>
#include <string>
#include <vector>

#include "survtrust/core/error.hpp"

namespace survtrust {

// Observed outcome on the discrete grid: event indicator and time-bin index.
struct EventLabel {
  int delta = 0;
  int time_bin = 0;

  bool event() const noexcept { return delta == 1; }
  friend bool operator==(const EventLabel&, const EventLabel&) = default;
};

inline void check_labels(std::span<const EventLabel> labels, int intervals) {
  for (const auto& l : labels) {
    if (l.delta != 0 && l.delta != 1) throw InputError("event indicator must be 0 or 1");
    if (l.time_bin < 0 || l.time_bin >= intervals)
      throw InputError("time bin " + std::to_string(l.time_bin) + " outside [0, " + std::to_string(intervals) + ")");
  }
}

}  // namespace survtrust
