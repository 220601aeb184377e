#pragma once

// Baseline feature extraction, imputation, min-max scaling and one-hot
// encoding. Every transform is split into fit (on the training split) and
// apply (reusing the fitted statistics on any split).

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "survtrust/cohort/labels.hpp"
#include "survtrust/cohort/time_grid.hpp"
#include "survtrust/cohort/types.hpp"
#include "survtrust/core/csv.hpp"

namespace survtrust::cohort {

struct FeatureColumn {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  std::vector<std::optional<double>> numeric;       // used when continuous
  std::vector<std::optional<std::string>> category;  // used when categorical

  std::size_t size() const { return kind == FeatureKind::continuous ? numeric.size() : category.size(); }

  bool missing(std::size_t i) const {
    return kind == FeatureKind::continuous ? !numeric[i].has_value() : !category[i].has_value();
  }

  std::size_t missing_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < size(); ++i) n += missing(i) ? 1 : 0;
    return n;
  }

  static FeatureColumn continuous(std::string name, std::vector<std::optional<double>> values) {
    return {std::move(name), FeatureKind::continuous, std::move(values), {}};
  }
  static FeatureColumn categorical(std::string name, std::vector<std::optional<std::string>> values) {
    return {std::move(name), FeatureKind::categorical, {}, std::move(values)};
  }
};

struct FeatureFrame {
  std::vector<FeatureColumn> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }

  const FeatureColumn* find(const std::string& name) const {
    for (const auto& c : columns)
      if (c.name == name) return &c;
    return nullptr;
  }

  FeatureFrame select_rows(std::span<const std::size_t> idx) const {
    FeatureFrame out;
    for (const auto& c : columns) {
      FeatureColumn d{c.name, c.kind, {}, {}};
      for (std::size_t i : idx) {
        if (c.kind == FeatureKind::continuous) d.numeric.push_back(c.numeric[i]);
        else d.category.push_back(c.category[i]);
      }
      out.columns.push_back(std::move(d));
    }
    return out;
  }
};

// Feature values taken from each subject's first (baseline) visit, one row per
// entry of `subject_ids`, columns in schema order.
inline FeatureFrame extract_baseline(const RawVisitTable& table, const CohortSchema& schema,
                                     std::span<const std::string> subject_ids) {
  std::unordered_map<std::string, const VisitRow*> baseline;
  for (const auto& row : table.rows) baseline.try_emplace(row.subject_id, &row);
  for (const auto& name : table.feature_names)
    if (!schema.find(name)) throw InputError("column '" + name + "' is not declared in the schema");

  FeatureFrame frame;
  for (const auto& spec : schema.features) {
    const auto pos = std::find(table.feature_names.begin(), table.feature_names.end(), spec.name);
    if (pos == table.feature_names.end()) throw InputError("schema feature '" + spec.name + "' missing from table");
    const auto col = static_cast<std::size_t>(pos - table.feature_names.begin());
    FeatureColumn fc{spec.name, spec.kind, {}, {}};
    for (const auto& id : subject_ids) {
      const auto it = baseline.find(id);
      if (it == baseline.end()) throw InputError("no visits for subject " + id);
      const auto& raw = it->second->values[col];
      if (spec.kind == FeatureKind::continuous) {
        if (!raw) {
          fc.numeric.emplace_back();
          continue;
        }
        const auto v = csv::parse_double(*raw);
        if (!v || !std::isfinite(*v))
          throw InputError("feature '" + spec.name + "' for subject " + id + ": '" + *raw + "' is not a finite number");
        fc.numeric.push_back(*v);
      } else {
        fc.category.push_back(raw);
      }
    }
    frame.columns.push_back(std::move(fc));
  }
  return frame;
}

// ---------------------------------------------------------------- imputation

struct ImputationStat {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  double missing_fraction = 0.0;
  bool dropped = false;
  std::string drop_reason;
  double mean = 0.0;
  std::string mode;
};

struct ImputationModel {
  double threshold = 0.30;
  std::vector<ImputationStat> stats;
  std::vector<std::string> warnings;

  const ImputationStat* find(const std::string& name) const {
    for (const auto& s : stats)
      if (s.name == name) return &s;
    return nullptr;
  }
};

// Most frequent observed category; ties go to the category seen first.
inline std::optional<std::string> mode_first_seen(std::span<const std::optional<std::string>> values) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& v : values) {
    if (!v) continue;
    if (counts[*v]++ == 0) order.push_back(*v);
  }
  if (order.empty()) return std::nullopt;
  std::string best = order.front();
  for (const auto& c : order)
    if (counts[c] > counts[best]) best = c;
  return best;
}

inline ImputationModel fit_imputation(const FeatureFrame& train, double missing_threshold = 0.30) {
  ImputationModel model;
  model.threshold = missing_threshold;
  const auto n = static_cast<double>(train.rows());
  for (const auto& col : train.columns) {
    ImputationStat s;
    s.name = col.name;
    s.kind = col.kind;
    const std::size_t missing = col.missing_count();
    s.missing_fraction = n > 0 ? static_cast<double>(missing) / n : 1.0;
    if (missing == col.size()) {
      s.dropped = true;
      s.drop_reason = "no observed values";
      model.warnings.push_back("feature '" + col.name + "' has no observed values; dropped");
    } else if (s.missing_fraction > missing_threshold) {
      s.dropped = true;
      s.drop_reason = "missing fraction above threshold";
    } else if (col.kind == FeatureKind::continuous) {
      double sum = 0.0;
      for (const auto& v : col.numeric)
        if (v) sum += *v;
      s.mean = sum / static_cast<double>(col.size() - missing);
    } else {
      s.mode = *mode_first_seen(col.category);
    }
    model.stats.push_back(std::move(s));
  }
  return model;
}

inline FeatureFrame apply_imputation(const ImputationModel& model, const FeatureFrame& frame) {
  FeatureFrame out;
  for (const auto& col : frame.columns) {
    const auto* s = model.find(col.name);
    if (!s) throw InputError("imputation model has no entry for '" + col.name + "'");
    if (s->dropped) continue;
    FeatureColumn filled = col;
    for (auto& v : filled.numeric)
      if (!v) v = s->mean;
    for (auto& v : filled.category)
      if (!v) v = s->mode;
    out.columns.push_back(std::move(filled));
  }
  return out;
}

inline FeatureFrame impute(const FeatureFrame& frame, double missing_threshold = 0.30) {
  return apply_imputation(fit_imputation(frame, missing_threshold), frame);
}

// ------------------------------------------------------------ normalization

struct MinMax {
  double min = 0.0;
  double max = 0.0;

  // Constant columns map to 0; values outside the fitted range are clipped.
  double apply(double x) const {
    if (!(max > min)) return 0.0;
    return std::clamp((x - min) / (max - min), 0.0, 1.0);
  }
};

inline MinMax fit_minmax(std::span<const double> column) {
  if (column.empty()) throw InputError("cannot fit min-max scaling to an empty column");
  MinMax m{column.front(), column.front()};
  for (double x : column) {
    if (!std::isfinite(x)) throw InputError("min-max scaling requires finite values");
    m.min = std::min(m.min, x);
    m.max = std::max(m.max, x);
  }
  return m;
}

inline std::vector<double> normalize_minmax(std::span<const double> column) {
  const MinMax m = fit_minmax(column);
  std::vector<double> out;
  out.reserve(column.size());
  for (double x : column) out.push_back(m.apply(x));
  return out;
}

// ---------------------------------------------------------- one-hot encoding

struct OneHotEncoder {
  std::vector<std::string> levels;

  // Two (or fewer) levels encode as one 0/1 column: 1 for levels[1].
  bool binary() const { return levels.size() <= 2; }
  std::size_t width() const { return binary() ? 1 : levels.size(); }

  std::vector<std::string> column_names(const std::string& parent) const {
    if (binary()) return {parent};
    std::vector<std::string> out;
    for (const auto& l : levels) out.push_back(parent + "=" + l);
    return out;
  }

  // Writes width() values; returns false for a category unseen in training
  // (encoded as all zeros).
  bool encode(const std::string& value, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const auto it = std::find(levels.begin(), levels.end(), value);
    if (it == levels.end()) return false;
    const auto k = static_cast<std::size_t>(it - levels.begin());
    if (binary()) out[0] = k == 1 ? 1.0 : 0.0;
    else out[k] = 1.0;
    return true;
  }
};

// Levels: the declared order when given (training values must be a subset),
// otherwise the sorted distinct training values.
inline OneHotEncoder fit_one_hot(std::span<const std::string> train_values, std::span<const std::string> declared = {}) {
  OneHotEncoder enc;
  if (!declared.empty()) {
    enc.levels.assign(declared.begin(), declared.end());
  } else {
    std::set<std::string> uniq(train_values.begin(), train_values.end());
    enc.levels.assign(uniq.begin(), uniq.end());
  }
  if (enc.levels.empty()) throw InputError("categorical column has no levels");
  return enc;
}

struct OneHotResult {
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
  std::size_t unseen = 0;
};

inline OneHotResult one_hot(std::span<const std::string> column, std::span<const std::string> declared_levels = {}) {
  const auto enc = fit_one_hot(column, declared_levels);
  OneHotResult r;
  r.names = enc.column_names("x");
  for (const auto& v : column) {
    std::vector<double> row(enc.width());
    if (!enc.encode(v, row)) ++r.unseen;
    r.rows.push_back(std::move(row));
  }
  return r;
}

// ------------------------------------------------------------------ pipeline

struct PreprocessOptions {
  double missing_threshold = 0.30;
  int intervals = 10;
  Binning binning = Binning::quantile;
  std::vector<std::string> drop_inputs;  // parent features withheld from the model
};

// Everything fitted on the training split and needed to encode other splits.
struct PreprocessModel {
  PreprocessOptions options;
  ImputationModel imputation;
  std::map<std::string, MinMax> scalers;
  std::map<std::string, OneHotEncoder> encoders;
  std::vector<std::string> columns;
  std::vector<std::string> parents;
  std::vector<std::string> sensitive_attributes;
  std::vector<std::string> excluded_inputs;
  TimeGrid grid;
  std::vector<std::string> warnings;
};

inline bool contains(std::span<const std::string> xs, const std::string& x) {
  return std::find(xs.begin(), xs.end(), x) != xs.end();
}

inline PreprocessModel fit_preprocessing(const FeatureFrame& train, std::span<const SurvivalLabel> train_labels,
                                         const CohortSchema& schema, const PreprocessOptions& options) {
  PreprocessModel m;
  m.options = options;
  m.sensitive_attributes = schema.sensitive_attributes();
  for (const auto& d : options.drop_inputs)
    if (!schema.find(d)) throw InputError("cannot withhold '" + d + "': not in the cohort schema");

  m.imputation = fit_imputation(train, options.missing_threshold);
  m.warnings = m.imputation.warnings;
  const FeatureFrame filled = apply_imputation(m.imputation, train);
  for (const auto& col : filled.columns) {
    const auto* spec = schema.find(col.name);
    if (!spec->model_input || contains(options.drop_inputs, col.name)) {
      m.excluded_inputs.push_back(col.name);
      continue;
    }
    if (col.kind == FeatureKind::continuous) {
      std::vector<double> xs;
      for (const auto& v : col.numeric) xs.push_back(*v);
      m.scalers[col.name] = fit_minmax(xs);
      m.columns.push_back(col.name);
      m.parents.push_back(col.name);
    } else {
      std::vector<std::string> xs;
      for (const auto& v : col.category) xs.push_back(*v);
      const auto enc = fit_one_hot(xs, spec->levels);
      for (const auto& name : enc.column_names(col.name)) {
        m.columns.push_back(name);
        m.parents.push_back(col.name);
      }
      m.encoders[col.name] = enc;
    }
  }
  if (m.columns.empty()) throw InputError("no model input columns remain after preprocessing");

  std::vector<double> times;
  for (const auto& l : train_labels) times.push_back(l.time_raw);
  m.grid = fit_time_grid(times, options.intervals, options.binning);
  return m;
}

// Encodes subjects into a Dataset. `raw_groups` must be the pre-imputation
// frame so missing sensitive labels stay missing.
inline Dataset apply_preprocessing(const PreprocessModel& m, const FeatureFrame& frame,
                                   std::span<const SurvivalLabel> labels, std::vector<std::string>* warnings = nullptr) {
  if (frame.rows() != labels.size()) throw InputError("feature frame and labels differ in length");
  const FeatureFrame filled = apply_imputation(m.imputation, frame);
  Dataset ds;
  ds.columns = m.columns;
  ds.parents = m.parents;
  std::map<std::string, std::size_t> unseen;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    SurvivalRecord r;
    r.subject_id = labels[i].subject_id;
    r.delta = labels[i].delta;
    r.time_raw = labels[i].time_raw;
    r.time_bin = m.grid.bin_of(labels[i].time_raw);
    r.features.reserve(m.columns.size());
    for (const auto& col : filled.columns) {
      if (auto s = m.scalers.find(col.name); s != m.scalers.end()) {
        r.features.push_back(s->second.apply(*col.numeric[i]));
      } else if (auto e = m.encoders.find(col.name); e != m.encoders.end()) {
        std::vector<double> enc(e->second.width());
        if (!e->second.encode(*col.category[i], enc)) ++unseen[col.name];
        r.features.insert(r.features.end(), enc.begin(), enc.end());
      }
    }
    for (const auto& attr : m.sensitive_attributes) {
      const auto* raw = frame.find(attr);
      if (raw && raw->kind == FeatureKind::categorical && raw->category[i]) r.groups[attr] = *raw->category[i];
    }
    ds.records.push_back(std::move(r));
  }
  if (warnings)
    for (const auto& [name, count] : unseen)
      warnings->push_back("feature '" + name + "': " + std::to_string(count) +
                          " value(s) unseen in training encoded as all zeros");
  return ds;
}

}  // namespace survtrust::cohort
