#pragma once

// Bootstrapped KM-Fair decisions between subgroups.
//
// Each group is resampled B times (records drawn jointly with their
// predictions). Every resample yields the KM-Cal of the resampled group KM
// against the mean of the resampled predictions. For groups i and j the
// differences K_i[b] - K_j[b] give a percentile interval [a, b]; the decision
// is -1 when b < 0 (i better calibrated), +1 when a > 0, and 0 otherwise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "survtrust/core/error.hpp"
#include "survtrust/core/labels.hpp"
#include "survtrust/core/parallel.hpp"
#include "survtrust/core/random.hpp"
#include "survtrust/core/stats.hpp"
#include "survtrust/fairness/partition.hpp"
#include "survtrust/km.hpp"
#include "survtrust/metrics/km_cal.hpp"
#include "survtrust/ndsm/isd.hpp"

namespace survtrust::fairness {

enum class Resampling {
  bootstrap,  // with replacement, full group size
  subsample,  // without replacement, subsample_fraction of the group
};

struct KmFairOptions {
  int resamples = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  bool paired = true;
  Resampling resampling = Resampling::bootstrap;
  double subsample_fraction = 0.5;
  int max_redraws = 1000;
  int threads = 1;
};

struct GroupBootstrap {
  std::vector<double> km_cal;  // one value per resample
  std::size_t redraws = 0;
};

// KM-Cal of the records `pick` (labels already gathered into `y`).
inline double km_cal_subset(std::span<const ndsm::Isd> predictions, std::span<const EventLabel> y,
                            std::span<const std::size_t> pick, int T) {
  km::SurvivalCurve mean_curve;
  mean_curve.values.assign(static_cast<std::size_t>(T) + 1, 0.0);
  mean_curve.values[0] = 1.0;
  for (std::size_t i : pick)
    for (std::size_t k = 0; k < static_cast<std::size_t>(T); ++k) mean_curve.values[k + 1] += predictions[i].survival[k];
  for (std::size_t k = 1; k < mean_curve.values.size(); ++k) mean_curve.values[k] /= static_cast<double>(pick.size());
  return metrics::km_cal(km::km_estimate(y, T), mean_curve);
}

inline GroupBootstrap bootstrap_km_cal(std::span<const ndsm::Isd> predictions, std::span<const EventLabel> labels,
                                       std::span<const std::size_t> group, std::uint64_t stream,
                                       const KmFairOptions& opt) {
  if (group.size() < 2) throw InputError("KM-Fair needs at least two members per group");
  if (opt.resamples < 1) throw InputError("KM-Fair needs at least one resample");
  const int T = predictions[group.front()].intervals();
  std::size_t draw = group.size();
  if (opt.resampling == Resampling::subsample) {
    if (!(opt.subsample_fraction > 0.0 && opt.subsample_fraction <= 1.0))
      throw InputError("subsample fraction must lie in (0, 1]");
    draw = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(opt.subsample_fraction * group.size())));
  }
  const auto B = static_cast<std::size_t>(opt.resamples);
  GroupBootstrap out;
  out.km_cal.resize(B);
  std::vector<std::size_t> redraws(B, 0);
  parallel_for(B, opt.threads, [&](std::size_t b) {
    std::vector<std::size_t> pick(draw);
    std::vector<EventLabel> y(draw);
    for (std::uint64_t attempt = 0;; ++attempt) {
      if (attempt > static_cast<std::uint64_t>(opt.max_redraws))
        throw UndefinedMetric("KM-Fair: too many degenerate bootstrap resamples");
      Rng rng(derive_seed(stream, {static_cast<std::uint64_t>(b), attempt}));
      if (opt.resampling == Resampling::bootstrap) {
        for (auto& k : pick) k = group[rng.below(group.size())];
      } else {
        const auto perm = rng.permutation(group.size());
        for (std::size_t k = 0; k < draw; ++k) pick[k] = group[perm[k]];
      }
      for (std::size_t k = 0; k < draw; ++k) y[k] = labels[pick[k]];
      const double v = km_cal_subset(predictions, y, pick, T);
      if (std::isfinite(v)) {
        out.km_cal[b] = v;
        break;
      }
      ++redraws[b];
    }
  });
  for (auto r : redraws) out.redraws += r;
  return out;
}

struct KmFairEntry {
  int decision = 0;
  double lower = 0.0;
  double upper = 0.0;
  double mean_diff = 0.0;
};

inline KmFairEntry km_fair_decision(std::span<const double> diffs, double alpha) {
  if (diffs.empty()) throw InputError("KM-Fair decision of no differences");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  KmFairEntry e;
  std::vector<double> sorted(diffs.begin(), diffs.end());
  std::sort(sorted.begin(), sorted.end());
  e.lower = quantile_sorted(sorted, alpha / 2.0);
  e.upper = quantile_sorted(sorted, 1.0 - alpha / 2.0);
  e.mean_diff = mean(diffs);
  e.decision = e.upper < 0.0 ? -1 : (e.lower > 0.0 ? 1 : 0);
  return e;
}

inline KmFairEntry km_fair_pair(std::span<const double> k_i, std::span<const double> k_j, double alpha,
                                std::span<const std::size_t> pairing = {}) {
  if (k_i.size() != k_j.size()) throw InputError("KM-Fair resample vectors differ in length");
  std::vector<double> d(k_i.size());
  for (std::size_t b = 0; b < d.size(); ++b) d[b] = k_i[b] - k_j[pairing.empty() ? b : pairing[b]];
  return km_fair_decision(d, alpha);
}

struct KmFairMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<KmFairEntry>> entries;  // entries[i][j]
  std::vector<double> mean_km_cal;                // per group, over resamples
  int resamples = 0;
  std::size_t redraws = 0;
};

inline std::uint64_t group_stream(std::uint64_t seed, const std::string& label) {
  return derive_seed(seed, {fnv1a(label)});
}

inline KmFairMatrix km_fair(std::span<const ndsm::Isd> predictions, std::span<const EventLabel> labels,
                            const GroupPartition& partition, const KmFairOptions& opt = {}) {
  if (predictions.size() != labels.size()) throw InputError("predictions and labels differ in length");
  const std::size_t G = partition.groups();
  KmFairMatrix m;
  m.labels = partition.labels;
  m.resamples = opt.resamples;
  m.entries.assign(G, std::vector<KmFairEntry>(G));
  std::vector<GroupBootstrap> boots;
  for (std::size_t g = 0; g < G; ++g) {
    boots.push_back(bootstrap_km_cal(predictions, labels, partition.indices[g],
                                     group_stream(opt.seed, partition.labels[g]), opt));
    m.redraws += boots.back().redraws;
    m.mean_km_cal.push_back(mean(boots.back().km_cal));
  }
  for (std::size_t i = 0; i < G; ++i) {
    for (std::size_t j = i + 1; j < G; ++j) {
      std::vector<std::size_t> pairing;
      if (!opt.paired) {
        Rng rng(derive_seed(opt.seed, {fnv1a(partition.labels[i]), fnv1a(partition.labels[j]), 0x554e50ULL}));
        pairing = rng.permutation(static_cast<std::size_t>(opt.resamples));
      }
      const auto e = km_fair_pair(boots[i].km_cal, boots[j].km_cal, opt.alpha, pairing);
      m.entries[i][j] = e;
      m.entries[j][i] = {-e.decision, -e.upper, -e.lower, -e.mean_diff};
    }
  }
  return m;
}

}  // namespace survtrust::fairness
