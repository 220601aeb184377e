#pragma once

// Permutation importance: the drop in held-out C-td when one parent feature's
// columns are shuffled across subjects. One-hot siblings move together under a
// single row permutation. Every (feature, repetition) draws its permutation
// from its own stream, so the report does not depend on the thread count.

#include <algorithm>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "survtrust/cohort/types.hpp"
#include "survtrust/core/csv.hpp"
#include "survtrust/core/error.hpp"
#include "survtrust/core/parallel.hpp"
#include "survtrust/core/random.hpp"
#include "survtrust/core/stats.hpp"
#include "survtrust/metrics/concordance.hpp"
#include "survtrust/ndsm/isd.hpp"
#include "survtrust/ndsm/network.hpp"

namespace survtrust::interpret {

using Predictor = std::function<ndsm::Isd(std::span<const double>)>;

struct ImportanceEntry {
  std::string feature;
  std::vector<std::size_t> columns;
  std::vector<double> deltas;  // baseline - permuted, one per kept repetition
  double mean_delta = 0.0;
  double std = 0.0;
  int discarded = 0;
};

struct ImportanceReport {
  double baseline = 0.0;
  int repetitions = 0;
  std::vector<ImportanceEntry> features;  // descending mean_delta
  std::vector<std::string> notes;
};

struct ImportanceOptions {
  int repetitions = 10;
  std::uint64_t seed = 0;
  int threads = 1;
};

inline std::vector<ndsm::Isd> predict_rows(const Predictor& predict, const std::vector<std::vector<double>>& rows) {
  std::vector<ndsm::Isd> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(predict(r));
  return out;
}

// C-td of the test set with `columns` taken from row perm[i] for each row i.
inline double permuted_c_td(const Predictor& predict, const cohort::Dataset& test, std::span<const std::size_t> columns,
                            std::span<const std::size_t> perm) {
  if (perm.size() != test.size()) throw InputError("permutation length does not match the test set");
  std::vector<std::vector<double>> rows(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    rows[i] = test.records[i].features;
    for (std::size_t c : columns) rows[i][c] = test.records[perm[i]].features[c];
  }
  const auto labels = test.labels();
  return metrics::c_td(predict_rows(predict, rows), labels);
}

inline std::vector<std::size_t> columns_of(const cohort::Dataset& ds, const std::string& parent) {
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < ds.parents.size(); ++c)
    if (ds.parents[c] == parent) cols.push_back(c);
  return cols;
}

inline std::vector<std::size_t> importance_permutation(std::uint64_t seed, const std::string& feature, int rep,
                                                       std::size_t n) {
  Rng rng(derive_seed(seed, {fnv1a(feature), static_cast<std::uint64_t>(rep)}));
  return rng.permutation(n);
}

inline ImportanceReport permutation_importance(const Predictor& predict, const cohort::Dataset& test,
                                               const ImportanceOptions& opt = {}) {
  if (opt.repetitions < 1) throw InputError("permutation importance needs at least one repetition");
  if (test.parents.size() != test.dim()) throw InputError("test set lacks parent-feature metadata");
  const auto labels = test.labels();
  std::vector<std::vector<double>> rows;
  for (const auto& r : test.records) rows.push_back(r.features);
  ImportanceReport rep;
  rep.repetitions = opt.repetitions;
  rep.baseline = metrics::c_td(predict_rows(predict, rows), labels);

  const auto parents = test.parent_features();
  const auto R = static_cast<std::size_t>(opt.repetitions);
  std::vector<double> cell(parents.size() * R);
  std::vector<char> ok(cell.size(), 0);
  parallel_for(cell.size(), opt.threads, [&](std::size_t t) {
    const std::size_t f = t / R;
    const int r = static_cast<int>(t % R);
    const auto perm = importance_permutation(opt.seed, parents[f], r, test.size());
    try {
      cell[t] = rep.baseline - permuted_c_td(predict, test, columns_of(test, parents[f]), perm);
      ok[t] = 1;
    } catch (const UndefinedMetric&) {
    }
  });
  for (std::size_t f = 0; f < parents.size(); ++f) {
    ImportanceEntry e;
    e.feature = parents[f];
    e.columns = columns_of(test, parents[f]);
    for (std::size_t r = 0; r < R; ++r) {
      if (ok[f * R + r]) e.deltas.push_back(cell[f * R + r]);
      else ++e.discarded;
    }
    if (e.discarded > 0)
      rep.notes.push_back(e.feature + ": " + std::to_string(e.discarded) + " repetitions discarded (undefined C-td)");
    if (!e.deltas.empty()) {
      e.mean_delta = mean(e.deltas);
      e.std = sample_std(e.deltas);
    }
    rep.features.push_back(std::move(e));
  }
  std::stable_sort(rep.features.begin(), rep.features.end(),
                   [](const ImportanceEntry& a, const ImportanceEntry& b) { return a.mean_delta > b.mean_delta; });
  return rep;
}

inline ImportanceReport permutation_importance(const ndsm::ModelState& model, const cohort::Dataset& test,
                                               const ImportanceOptions& opt = {}) {
  return permutation_importance([&](std::span<const double> x) { return ndsm::predict_isd(model, x); }, test, opt);
}

inline std::string importance_csv(const ImportanceReport& r) {
  csv::Writer w({"feature", "mean_delta", "std"});
  for (const auto& e : r.features) w.row({e.feature, csv::format_double(e.mean_delta), csv::format_double(e.std)});
  return w.str();
}

inline std::string importance_top_k_csv(const ImportanceReport& r, std::size_t k) {
  csv::Writer w({"rank", "feature", "mean_delta", "std"});
  for (std::size_t i = 0; i < std::min(k, r.features.size()); ++i) {
    const auto& e = r.features[i];
    w.row({std::to_string(i + 1), e.feature, csv::format_double(e.mean_delta), csv::format_double(e.std)});
  }
  return w.str();
}

}  // namespace survtrust::interpret
