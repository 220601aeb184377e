#pragma once

// File formats for the cohort stage:
//  - visit CSV: subject_id, visit_time, diagnosis, <feature columns...>
//  - schema JSON sidecar declaring feature kinds and sensitive attributes
//  - preprocessed cohort CSV: subject_id, delta, time_bin, time_raw,
//    group.<attr>..., f0..f{D-1}
//  - manifest JSON with every statistic fitted on the training split

#include <algorithm>
#include <cctype>
#include <string>
#include <vector>

#include "json.hpp"
#include "survtrust/cohort/generator.hpp"
#include "survtrust/cohort/preprocess.hpp"
#include "survtrust/core/csv.hpp"

namespace survtrust::cohort {

inline bool is_missing_token(const std::string& s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "?" || s == "null";
}

inline Diagnosis parse_diagnosis(std::string s, const std::string& subject) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "positive" || s == "pos" || s == "1" || s == "true" || s == "yes") return Diagnosis::positive;
  if (s == "negative" || s == "neg" || s == "0" || s == "false" || s == "no") return Diagnosis::negative;
  throw InputError("subject " + subject + ": missing or unrecognized diagnosis '" + s + "'");
}

inline RawVisitTable visit_table_from_csv(const csv::Table& t) {
  const auto id = t.column("subject_id");
  const auto time = t.column("visit_time");
  const auto diag = t.column("diagnosis");
  if (!id || !time || !diag) throw InputError("visit CSV needs subject_id, visit_time and diagnosis columns");
  RawVisitTable table;
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (c != *id && c != *time && c != *diag) {
      feature_cols.push_back(c);
      table.feature_names.push_back(t.header[c]);
    }
  for (const auto& row : t.rows) {
    VisitRow v;
    v.subject_id = row[*id];
    const auto vt = csv::parse_double(row[*time]);
    if (!vt) throw InputError("subject " + v.subject_id + ": invalid visit_time '" + row[*time] + "'");
    v.visit_time = *vt;
    v.diagnosis = parse_diagnosis(row[*diag], v.subject_id);
    for (auto c : feature_cols)
      v.values.push_back(is_missing_token(row[c]) ? std::nullopt : std::optional<std::string>(row[c]));
    table.rows.push_back(std::move(v));
  }
  return table;
}

inline RawVisitTable read_visit_table(const std::string& path) { return visit_table_from_csv(csv::read(path)); }

inline std::string visit_table_to_csv(const RawVisitTable& table) {
  std::vector<std::string> header{"subject_id", "visit_time", "diagnosis"};
  header.insert(header.end(), table.feature_names.begin(), table.feature_names.end());
  csv::Writer w(header);
  for (const auto& r : table.rows) {
    std::vector<std::string> f{r.subject_id, csv::format_double(r.visit_time),
                               r.diagnosis == Diagnosis::positive ? "positive" : "negative"};
    for (const auto& v : r.values) f.push_back(v.value_or(""));
    w.row(f);
  }
  return w.str();
}

inline nlohmann::json to_json(const CohortSchema& s) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : s.features) {
    nlohmann::json j{{"name", f.name}, {"kind", to_string(f.kind)}};
    if (!f.levels.empty()) j["levels"] = f.levels;
    if (f.sensitive) j["sensitive"] = true;
    if (!f.model_input) j["model_input"] = false;
    features.push_back(std::move(j));
  }
  return {{"features", features}};
}

inline CohortSchema schema_from_json(const nlohmann::json& j) {
  CohortSchema s;
  for (const auto& f : j.at("features")) {
    FeatureSpec spec;
    spec.name = f.at("name").get<std::string>();
    spec.kind = feature_kind_from_string(f.value("kind", std::string("continuous")));
    spec.levels = f.value("levels", std::vector<std::string>{});
    spec.sensitive = f.value("sensitive", false);
    spec.model_input = f.value("model_input", true);
    if (spec.sensitive && spec.kind != FeatureKind::categorical)
      throw InputError("sensitive attribute '" + spec.name + "' must be categorical");
    s.features.push_back(std::move(spec));
  }
  return s;
}

inline nlohmann::json truth_to_json_row(const SubjectTruth& t) {
  return {{"subject_id", t.subject_id}, {"event_interval", t.event_interval}, {"censor_interval", t.censor_interval},
          {"delta", t.delta}, {"time_raw", t.time_raw}};
}

inline std::string truth_to_csv(const GeneratedCohort& g) {
  std::vector<std::string> header{"subject_id", "event_interval", "censor_interval", "delta", "time_raw"};
  csv::Writer w(header);
  for (const auto& t : g.truth)
    w.row({t.subject_id, std::to_string(t.event_interval), std::to_string(t.censor_interval), std::to_string(t.delta),
           csv::format_double(t.time_raw)});
  return w.str();
}

// ------------------------------------------------------- preprocessed cohort

inline std::string dataset_to_csv(const Dataset& ds, std::span<const std::string> attributes) {
  std::vector<std::string> header{"subject_id", "delta", "time_bin", "time_raw"};
  for (const auto& a : attributes) header.push_back("group." + a);
  for (std::size_t j = 0; j < ds.dim(); ++j) header.push_back("f" + std::to_string(j));
  csv::Writer w(header);
  for (const auto& r : ds.records) {
    std::vector<std::string> f{r.subject_id, std::to_string(r.delta), std::to_string(r.time_bin),
                               csv::format_double(r.time_raw)};
    for (const auto& a : attributes) {
      const auto it = r.groups.find(a);
      f.push_back(it == r.groups.end() ? "" : it->second);
    }
    for (double x : r.features) f.push_back(csv::format_double(x));
    w.row(f);
  }
  return w.str();
}

// Column names and parents come from the manifest; the CSV only carries f<j>.
inline Dataset dataset_from_csv(const csv::Table& t, std::vector<std::string> columns, std::vector<std::string> parents) {
  const auto need = [&](const char* name) {
    const auto c = t.column(name);
    if (!c) throw InputError(std::string("preprocessed CSV lacks column ") + name);
    return *c;
  };
  const auto id = need("subject_id"), delta = need("delta"), bin = need("time_bin"), raw = need("time_raw");
  std::vector<std::pair<std::string, std::size_t>> groups;
  std::vector<std::size_t> feats;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (t.header[c].rfind("group.", 0) == 0) groups.emplace_back(t.header[c].substr(6), c);
    if (t.header[c].size() > 1 && t.header[c][0] == 'f' && std::isdigit(static_cast<unsigned char>(t.header[c][1])))
      feats.push_back(c);
  }
  if (feats.size() != columns.size())
    throw InputError("preprocessed CSV has " + std::to_string(feats.size()) + " feature columns, manifest lists " +
                     std::to_string(columns.size()));
  Dataset ds;
  ds.columns = std::move(columns);
  ds.parents = std::move(parents);
  for (const auto& row : t.rows) {
    SurvivalRecord r;
    r.subject_id = row[id];
    r.delta = std::stoi(row[delta]);
    r.time_bin = std::stoi(row[bin]);
    r.time_raw = csv::parse_double(row[raw]).value_or(0.0);
    for (const auto& [name, c] : groups)
      if (!row[c].empty()) r.groups[name] = row[c];
    for (auto c : feats) {
      const auto v = csv::parse_double(row[c]);
      if (!v) throw InputError("subject " + r.subject_id + ": non-numeric feature value '" + row[c] + "'");
      r.features.push_back(*v);
    }
    ds.records.push_back(std::move(r));
  }
  return ds;
}

// ----------------------------------------------------------------- manifest

inline nlohmann::json to_json(const PreprocessModel& m) {
  nlohmann::json imputation = nlohmann::json::array();
  nlohmann::json dropped = nlohmann::json::array();
  for (const auto& s : m.imputation.stats) {
    nlohmann::json j{{"name", s.name}, {"kind", to_string(s.kind)}, {"missing_fraction", s.missing_fraction}};
    if (s.dropped) {
      j["dropped"] = true;
      dropped.push_back({{"name", s.name}, {"reason", s.drop_reason}});
    } else if (s.kind == FeatureKind::continuous) {
      j["mean"] = s.mean;
    } else {
      j["mode"] = s.mode;
    }
    imputation.push_back(std::move(j));
  }
  nlohmann::json scalers = nlohmann::json::object();
  for (const auto& [name, mm] : m.scalers) scalers[name] = {{"min", mm.min}, {"max", mm.max}};
  nlohmann::json encoders = nlohmann::json::object();
  for (const auto& [name, e] : m.encoders) encoders[name] = e.levels;
  nlohmann::json cols = nlohmann::json::array();
  for (std::size_t j = 0; j < m.columns.size(); ++j)
    cols.push_back({{"field", "f" + std::to_string(j)}, {"name", m.columns[j]}, {"parent", m.parents[j]}});
  const auto cuts = m.grid.cut_points();
  return {{"format", "survtrust-manifest"},
          {"version", 1},
          {"missing_threshold", m.options.missing_threshold},
          {"intervals", m.options.intervals},
          {"binning", to_string(m.options.binning)},
          {"cut_points", std::vector<double>(cuts.begin(), cuts.end())},
          {"imputation", imputation},
          {"dropped_columns", dropped},
          {"minmax", scalers},
          {"one_hot_levels", encoders},
          {"columns", cols},
          {"sensitive_attributes", m.sensitive_attributes},
          {"excluded_inputs", m.excluded_inputs},
          {"withheld_attributes", m.options.drop_inputs},
          {"warnings", m.warnings}};
}

inline PreprocessModel preprocess_model_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "survtrust-manifest") throw InputError("not a preprocessing manifest");
  PreprocessModel m;
  m.options.missing_threshold = j.at("missing_threshold").get<double>();
  m.options.intervals = j.at("intervals").get<int>();
  m.options.binning = binning_from_string(j.at("binning").get<std::string>());
  m.options.drop_inputs = j.value("withheld_attributes", std::vector<std::string>{});
  m.grid = TimeGrid(j.at("cut_points").get<std::vector<double>>());
  m.imputation.threshold = m.options.missing_threshold;
  for (const auto& s : j.at("imputation")) {
    ImputationStat st;
    st.name = s.at("name").get<std::string>();
    st.kind = feature_kind_from_string(s.at("kind").get<std::string>());
    st.missing_fraction = s.at("missing_fraction").get<double>();
    st.dropped = s.value("dropped", false);
    st.mean = s.value("mean", 0.0);
    st.mode = s.value("mode", std::string());
    m.imputation.stats.push_back(std::move(st));
  }
  for (const auto& d : j.at("dropped_columns"))
    for (auto& st : m.imputation.stats)
      if (st.name == d.at("name").get<std::string>()) st.drop_reason = d.at("reason").get<std::string>();
  for (const auto& [name, v] : j.at("minmax").items()) m.scalers[name] = {v.at("min").get<double>(), v.at("max").get<double>()};
  for (const auto& [name, v] : j.at("one_hot_levels").items()) m.encoders[name] = {v.get<std::vector<std::string>>()};
  for (const auto& c : j.at("columns")) {
    m.columns.push_back(c.at("name").get<std::string>());
    m.parents.push_back(c.at("parent").get<std::string>());
  }
  m.sensitive_attributes = j.at("sensitive_attributes").get<std::vector<std::string>>();
  m.excluded_inputs = j.value("excluded_inputs", std::vector<std::string>{});
  m.warnings = j.value("warnings", std::vector<std::string>{});
  return m;
}

}  // namespace survtrust::cohort
