#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "survtrust/core/error.hpp"
#include "survtrust/core/labels.hpp"

namespace survtrust::cohort {

enum class FeatureKind { continuous, categorical };

inline const char* to_string(FeatureKind k) { return k == FeatureKind::continuous ? "continuous" : "categorical"; }

inline FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "continuous") return FeatureKind::continuous;
  if (s == "categorical") return FeatureKind::categorical;
  throw InputError("unknown feature kind '" + s + "'");
}

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  // Declared level order for categorical features; empty means "sorted
  // distinct training values".
  std::vector<std::string> levels;
  // Sensitive attributes define fairness groups.
  bool sensitive = false;
  // Whether the column is fed to the model (a sensitive attribute may be
  // label-only).
  bool model_input = true;
};

struct CohortSchema {
  std::vector<FeatureSpec> features;

  const FeatureSpec* find(const std::string& name) const {
    for (const auto& f : features)
      if (f.name == name) return &f;
    return nullptr;
  }

  std::vector<std::string> sensitive_attributes() const {
    std::vector<std::string> out;
    for (const auto& f : features)
      if (f.sensitive) out.push_back(f.name);
    return out;
  }
};

enum class Diagnosis { negative, positive };

struct VisitRow {
  std::string subject_id;
  double visit_time = 0.0;  // months since baseline
  Diagnosis diagnosis = Diagnosis::negative;
  // One entry per RawVisitTable::feature_names; nullopt = missing.
  std::vector<std::optional<std::string>> values;
};

struct RawVisitTable {
  std::vector<std::string> feature_names;
  std::vector<VisitRow> rows;
};

struct SurvivalLabel {
  std::string subject_id;
  int delta = 0;
  double time_raw = 0.0;

  friend bool operator==(const SurvivalLabel&, const SurvivalLabel&) = default;
};

// One modeled subject after encoding and binning.
struct SurvivalRecord {
  std::string subject_id;
  std::vector<double> features;
  int delta = 0;
  int time_bin = 0;
  double time_raw = 0.0;
  std::map<std::string, std::string> groups;  // attribute -> label; absent = missing

  EventLabel label() const { return {delta, time_bin}; }
};

// Encoded records with column metadata. `parents[j]` names the source feature
// of column j; one-hot siblings share a parent.
struct Dataset {
  std::vector<std::string> columns;
  std::vector<std::string> parents;
  std::vector<SurvivalRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  std::size_t dim() const noexcept { return columns.size(); }

  std::vector<EventLabel> labels() const {
    std::vector<EventLabel> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.label());
    return out;
  }

  // Distinct parent features in column order.
  std::vector<std::string> parent_features() const {
    std::vector<std::string> out;
    for (const auto& p : parents)
      if (out.empty() || std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
    return out;
  }
};

}  // namespace survtrust::cohort
