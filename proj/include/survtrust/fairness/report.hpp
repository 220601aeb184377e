#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "survtrust/core/csv.hpp"
#include "survtrust/core/error.hpp"
#include "survtrust/fairness/concordance_impurity.hpp"
#include "survtrust/fairness/hosmer_lemeshow.hpp"
#include "survtrust/fairness/km_fair.hpp"
#include "survtrust/fairness/partition.hpp"

namespace survtrust::fairness {

struct FairnessOptions {
  CiTdOptions ci_td;
  KmFairOptions km_fair;
  bool hosmer_lemeshow = true;
};

struct FairnessReport {
  std::string attribute;
  std::vector<std::string> labels;
  std::vector<std::size_t> sizes;
  std::vector<std::optional<double>> cf;
  std::optional<double> ci_td;
  KmFairMatrix km_fair;
  std::vector<std::optional<double>> hosmer_lemeshow;
  std::vector<std::string> notes;
};

inline FairnessReport fairness_report(std::span<const ndsm::Isd> predictions, std::span<const EventLabel> labels,
                                      const GroupPartition& partition, const FairnessOptions& opt = {}) {
  FairnessReport r;
  r.attribute = partition.attribute;
  r.labels = partition.labels;
  for (const auto& idx : partition.indices) r.sizes.push_back(idx.size());
  try {
    auto c = ci_td(predictions, labels, partition, opt.ci_td);
    r.cf = c.cf;
    r.ci_td = c.value;
    r.notes = c.notes;
  } catch (const UndefinedMetric& e) {
    r.cf.assign(partition.groups(), std::nullopt);
    for (std::size_t g = 0; g < partition.groups(); ++g) {
      const auto c = concordance_fraction_counts(predictions, labels, partition.indices[g], opt.ci_td.scope);
      if (c.pairs > 0) r.cf[g] = c.value(opt.ci_td.ties);
    }
    r.notes.emplace_back(e.what());
  }
  r.km_fair = km_fair(predictions, labels, partition, opt.km_fair);
  if (r.km_fair.redraws > 0) r.notes.push_back(std::to_string(r.km_fair.redraws) + " degenerate resamples redrawn");
  if (opt.hosmer_lemeshow) {
    for (std::size_t g = 0; g < partition.groups(); ++g) {
      try {
        const auto hl = hosmer_lemeshow(predictions, labels, partition.indices[g]);
        r.hosmer_lemeshow.emplace_back(hl.value);
        if (!hl.skipped_bins.empty())
          r.notes.push_back("group '" + partition.labels[g] + "': " + std::to_string(hl.skipped_bins.size()) +
                            " Hosmer-Lemeshow bins skipped");
      } catch (const UndefinedMetric& e) {
        r.hosmer_lemeshow.emplace_back();
        r.notes.push_back("group '" + partition.labels[g] + "': " + e.what());
      }
    }
  }
  return r;
}

inline nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

inline nlohmann::json to_json(const FairnessReport& r) {
  nlohmann::json groups = nlohmann::json::array();
  for (std::size_t g = 0; g < r.labels.size(); ++g) {
    nlohmann::json row{{"label", r.labels[g]}, {"size", r.sizes[g]}, {"cf", optional_json(r.cf[g])},
                       {"km_cal_mean", r.km_fair.mean_km_cal[g]}};
    if (!r.hosmer_lemeshow.empty()) row["hosmer_lemeshow"] = optional_json(r.hosmer_lemeshow[g]);
    groups.push_back(row);
  }
  nlohmann::json matrix = nlohmann::json::array();
  for (std::size_t i = 0; i < r.labels.size(); ++i)
    for (std::size_t j = 0; j < r.labels.size(); ++j) {
      const auto& e = r.km_fair.entries[i][j];
      matrix.push_back({{"row", r.labels[i]}, {"col", r.labels[j]}, {"decision", e.decision},
                        {"lower", e.lower}, {"upper", e.upper}, {"mean_diff", e.mean_diff}});
    }
  return {{"attribute", r.attribute},
          {"groups", groups},
          {"ci_td", optional_json(r.ci_td)},
          {"ci_td_x100", r.ci_td ? nlohmann::json(100.0 * *r.ci_td) : nlohmann::json()},
          {"km_fair", {{"resamples", r.km_fair.resamples}, {"redraws", r.km_fair.redraws}, {"entries", matrix}}},
          {"notes", r.notes}};
}

inline FairnessReport fairness_report_from_json(const nlohmann::json& j) {
  FairnessReport r;
  r.attribute = j.at("attribute").get<std::string>();
  const auto opt = [](const nlohmann::json& v) { return v.is_null() ? std::optional<double>() : v.get<double>(); };
  for (const auto& g : j.at("groups")) {
    r.labels.push_back(g.at("label").get<std::string>());
    r.sizes.push_back(g.at("size").get<std::size_t>());
    r.cf.push_back(opt(g.at("cf")));
    r.km_fair.mean_km_cal.push_back(g.at("km_cal_mean").get<double>());
    if (g.contains("hosmer_lemeshow")) r.hosmer_lemeshow.push_back(opt(g.at("hosmer_lemeshow")));
  }
  r.ci_td = opt(j.at("ci_td"));
  r.km_fair.labels = r.labels;
  r.km_fair.resamples = j.at("km_fair").at("resamples").get<int>();
  r.km_fair.redraws = j.at("km_fair").at("redraws").get<std::size_t>();
  const std::size_t G = r.labels.size();
  r.km_fair.entries.assign(G, std::vector<KmFairEntry>(G));
  const auto& entries = j.at("km_fair").at("entries");
  if (entries.size() != G * G) throw InputError("fairness report matrix is not square");
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& e = entries[k];
    r.km_fair.entries[k / G][k % G] = {e.at("decision").get<int>(), e.at("lower").get<double>(),
                                       e.at("upper").get<double>(), e.at("mean_diff").get<double>()};
  }
  r.notes = j.at("notes").get<std::vector<std::string>>();
  return r;
}

// Square matrix, rows and columns labelled by group; cells are decisions (or
// their mean over runs).
inline std::string decision_matrix_csv(std::span<const std::string> labels,
                                       const std::vector<std::vector<double>>& cells) {
  std::vector<std::string> header{"group"};
  header.insert(header.end(), labels.begin(), labels.end());
  csv::Writer w(header);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::vector<std::string> row{labels[i]};
    for (double v : cells[i]) row.push_back(csv::format_double(v));
    w.row(row);
  }
  return w.str();
}

inline std::vector<std::vector<double>> decision_cells(const KmFairMatrix& m) {
  std::vector<std::vector<double>> cells(m.labels.size(), std::vector<double>(m.labels.size()));
  for (std::size_t i = 0; i < m.labels.size(); ++i)
    for (std::size_t j = 0; j < m.labels.size(); ++j) cells[i][j] = m.entries[i][j].decision;
  return cells;
}

// Long-form signed values for heat-map rendering.
inline std::string km_fair_plot_csv(const KmFairMatrix& m) {
  csv::Writer w({"row", "col", "decision", "lower", "upper", "mean_diff"});
  for (std::size_t i = 0; i < m.labels.size(); ++i)
    for (std::size_t j = 0; j < m.labels.size(); ++j) {
      const auto& e = m.entries[i][j];
      w.row({m.labels[i], m.labels[j], std::to_string(e.decision), csv::format_double(e.lower),
             csv::format_double(e.upper), csv::format_double(e.mean_diff)});
    }
  return w.str();
}

}  // namespace survtrust::fairness
