#pragma once

// Pipeline stages. Each stage reads and writes plain files so it can run on
// its own from the command line or as part of run_pipeline.
//
// Layout under the output directory:
//   cohort/     visits.csv schema.json truth.csv cohort_config.json
//   data/seed-<s>/  manifest.json train.csv val.csv test.csv
//   runs/<objective>/seed-<s>/
//               model.json history.csv metrics.json metrics_row.csv
//               fairness-<attr>.json km_fair-<attr>.csv km_fair_plot-<attr>.csv
//               importance.csv importance_top.csv
//   report/     per_seed.csv summary.csv table.csv km_fair-<objective>-<attr>.csv report.json
//
// A stage directory holds a stamp (stage.json, or train.stage.json and
// eval.stage.json in run directories): the canonical description of the stage
// inputs. A stage is skipped when its stamp matches and all outputs exist.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "survtrust/cohort/generator.hpp"
#include "survtrust/cohort/io.hpp"
#include "survtrust/cohort/labels.hpp"
#include "survtrust/cohort/preprocess.hpp"
#include "survtrust/core/csv.hpp"
#include "survtrust/core/error.hpp"
#include "survtrust/core/random.hpp"
#include "survtrust/fairness/report.hpp"
#include "survtrust/interpret/permutation_importance.hpp"
#include "survtrust/metrics/brier.hpp"
#include "survtrust/metrics/concordance.hpp"
#include "survtrust/metrics/km_cal.hpp"
#include "survtrust/ndsm/checkpoint.hpp"
#include "survtrust/ndsm/train.hpp"
#include "survtrust/pipeline/config.hpp"

namespace survtrust::pipeline {

namespace fs = std::filesystem;

inline void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path.string());
  f << text;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

inline nlohmann::json read_json(const fs::path& path) {
  if (!fs::exists(path)) throw InputError("missing file " + path.string());
  return nlohmann::json::parse(csv::read_file(path.string()));
}

// ------------------------------------------------------------------ caching

inline bool stage_current(const fs::path& dir, const nlohmann::json& key, std::initializer_list<const char*> outputs,
                          const char* stamp_name = "stage.json") {
  const auto stamp = dir / stamp_name;
  if (!fs::exists(stamp)) return false;
  for (const char* o : outputs)
    if (!fs::exists(dir / o)) return false;
  try {
    return read_json(stamp) == key;
  } catch (const std::exception&) {
    return false;
  }
}

inline void mark_stage(const fs::path& dir, const nlohmann::json& key, const char* stamp_name = "stage.json") {
  write_json(dir / stamp_name, key);
}

// --------------------------------------------------------------- generation

inline void write_cohort(const cohort::GeneratedCohort& g, const cohort::CohortConfig& cfg, const fs::path& dir) {
  write_text(dir / "visits.csv", cohort::visit_table_to_csv(g.table));
  write_json(dir / "schema.json", cohort::to_json(g.schema));
  write_text(dir / "truth.csv", cohort::truth_to_csv(g));
  write_json(dir / "cohort_config.json", cohort::to_json(cfg));
}

inline nlohmann::json generate_key(const cohort::CohortConfig& cfg) { return {{"stage", "generate"}, {"cohort", cohort::to_json(cfg)}}; }

inline bool generate_stage(const cohort::CohortConfig& cfg, const fs::path& dir) {
  const auto key = generate_key(cfg);
  if (stage_current(dir, key, {"visits.csv", "schema.json", "truth.csv"})) return false;
  write_cohort(cohort::generate_cohort(cfg), cfg, dir);
  mark_stage(dir, key);
  return true;
}

// ------------------------------------------------------------ preprocessing

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

// Split stratified by the event indicator. Within each stratum a seeded shuffle
// assigns the first round(f_train n) records to train and the next
// round(f_val n) to validation; each split keeps the input order.
inline SplitIndices stratified_split(std::span<const int> delta, double train_fraction, double val_fraction,
                                     std::uint64_t seed) {
  SplitIndices s;
  for (int stratum = 0; stratum <= 1; ++stratum) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < delta.size(); ++i)
      if (delta[i] == stratum) idx.push_back(i);
    Rng rng(derive_seed(seed, {0x53504c4954ULL, static_cast<std::uint64_t>(stratum)}));
    rng.shuffle(std::span<std::size_t>(idx));
    const auto n = static_cast<double>(idx.size());
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * n));
    const auto n_val = std::min(idx.size() - n_train, static_cast<std::size_t>(std::llround(val_fraction * n)));
    s.train.insert(s.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.insert(s.val.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                 idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.insert(s.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

struct PreparedData {
  cohort::PreprocessModel model;
  cohort::Dataset train, val, test;
};

struct PreprocessSettings {
  cohort::PreprocessOptions options;
  cohort::EventAnchor anchor = cohort::EventAnchor::final_positive_run;
  std::uint64_t split_seed = 0;
  double train_fraction = 0.70;
  double val_fraction = 0.15;
};

// Settings for the data of run seed `seed`. With split_per_seed the split is
// drawn from (split_seed, seed); otherwise every seed shares split_seed.
inline PreprocessSettings preprocess_settings(const RunConfig& c, std::uint64_t seed) {
  const std::uint64_t split = c.split_per_seed ? derive_seed(c.split_seed, {seed}) : c.split_seed;
  return {c.preprocess, c.anchor, split, c.train_fraction, c.val_fraction};
}

inline nlohmann::json to_json(const PreprocessSettings& s) {
  return {{"missing_threshold", s.options.missing_threshold},
          {"intervals", s.options.intervals},
          {"binning", to_string(s.options.binning)},
          {"drop_inputs", s.options.drop_inputs},
          {"event_anchor", to_string(s.anchor)},
          {"split_seed", s.split_seed},
          {"train_fraction", s.train_fraction},
          {"val_fraction", s.val_fraction}};
}

// Labels, truncation of baseline converters, stratified split, then every
// statistic fitted on the training split only.
inline PreparedData prepare(const cohort::RawVisitTable& table, const cohort::CohortSchema& schema,
                            const PreprocessSettings& s, nlohmann::json* summary = nullptr) {
  const auto all_labels = cohort::build_survival_labels(table, s.anchor);
  const auto labels = cohort::truncate_at_risk(all_labels);
  if (labels.empty()) throw InputError("no subjects at risk after removing baseline converters");
  std::vector<int> delta;
  for (const auto& l : labels) delta.push_back(l.delta);
  const auto split = stratified_split(delta, s.train_fraction, s.val_fraction, s.split_seed);
  if (split.train.empty()) throw InputError("training split is empty");

  const auto pick = [&](const std::vector<std::size_t>& idx) {
    std::vector<cohort::SurvivalLabel> out;
    for (auto i : idx) out.push_back(labels[i]);
    return out;
  };
  const auto ids = [](const std::vector<cohort::SurvivalLabel>& ls) {
    std::vector<std::string> out;
    for (const auto& l : ls) out.push_back(l.subject_id);
    return out;
  };
  const auto train_labels = pick(split.train), val_labels = pick(split.val), test_labels = pick(split.test);
  const auto train_frame = cohort::extract_baseline(table, schema, ids(train_labels));
  PreparedData d;
  d.model = cohort::fit_preprocessing(train_frame, train_labels, schema, s.options);
  d.train = cohort::apply_preprocessing(d.model, train_frame, train_labels, &d.model.warnings);
  d.val = cohort::apply_preprocessing(d.model, cohort::extract_baseline(table, schema, ids(val_labels)), val_labels,
                                      &d.model.warnings);
  d.test = cohort::apply_preprocessing(d.model, cohort::extract_baseline(table, schema, ids(test_labels)), test_labels,
                                       &d.model.warnings);
  if (summary)
    *summary = {{"subjects", all_labels.size()},
                {"baseline_converters_removed", all_labels.size() - labels.size()},
                {"train", d.train.size()},
                {"val", d.val.size()},
                {"test", d.test.size()}};
  return d;
}

inline void write_prepared(const PreparedData& d, const fs::path& dir, const nlohmann::json& summary = {}) {
  auto manifest = cohort::to_json(d.model);
  if (!summary.is_null()) manifest["split"] = summary;
  write_json(dir / "manifest.json", manifest);
  const auto& attrs = d.model.sensitive_attributes;
  write_text(dir / "train.csv", cohort::dataset_to_csv(d.train, attrs));
  write_text(dir / "val.csv", cohort::dataset_to_csv(d.val, attrs));
  write_text(dir / "test.csv", cohort::dataset_to_csv(d.test, attrs));
}

inline cohort::Dataset load_split(const fs::path& csv_path, const cohort::PreprocessModel& m) {
  return cohort::dataset_from_csv(csv::read(csv_path.string()), m.columns, m.parents);
}

inline PreparedData load_prepared(const fs::path& dir) {
  PreparedData d;
  d.model = cohort::preprocess_model_from_json(read_json(dir / "manifest.json"));
  d.train = load_split(dir / "train.csv", d.model);
  d.val = load_split(dir / "val.csv", d.model);
  d.test = load_split(dir / "test.csv", d.model);
  return d;
}

inline bool preprocess_stage(const fs::path& cohort_dir, const PreprocessSettings& s, const fs::path& dir) {
  nlohmann::json key{{"stage", "preprocess"}, {"settings", to_json(s)}};
  key["cohort"] = read_json(cohort_dir / "stage.json");
  if (stage_current(dir, key, {"manifest.json", "train.csv", "val.csv", "test.csv"})) return false;
  const auto table = cohort::read_visit_table((cohort_dir / "visits.csv").string());
  const auto schema = cohort::schema_from_json(read_json(cohort_dir / "schema.json"));
  nlohmann::json summary;
  const auto d = prepare(table, schema, s, &summary);
  write_prepared(d, dir, summary);
  mark_stage(dir, key);
  return true;
}

// ----------------------------------------------------------------- training

inline nlohmann::json to_json(const ndsm::TrainOptions& t) {
  return {{"epochs", t.epochs},       {"batch_size", t.batch_size},   {"learning_rate", t.adam.lr},
          {"beta1", t.adam.beta1},    {"beta2", t.adam.beta2},        {"adam_epsilon", t.adam.eps},
          {"hidden", t.arch.hidden},  {"activation", ndsm::to_string(t.arch.activation)},
          {"rank_sigma", t.loss.rank_sigma}, {"rank_weight", t.loss.rank_weight}, {"seed", t.seed}};
}

inline std::string history_csv(const ndsm::TrainResult& r) {
  csv::Writer w({"epoch", "train_loss", "val_c_td", "selected"});
  for (const auto& e : r.history)
    w.row({std::to_string(e.epoch), csv::format_double(e.train_loss),
           e.val_c_td ? csv::format_double(*e.val_c_td) : std::string(), e.epoch == r.best_epoch ? "1" : "0"});
  return w.str();
}

inline ndsm::TrainResult fit_model(const PreparedData& d, ndsm::Objective objective, const ndsm::TrainOptions& opt) {
  auto r = ndsm::train(d.train, d.val, objective, d.model.grid.intervals(), opt);
  const auto cuts = d.model.grid.cut_points();
  r.model.cut_points.assign(cuts.begin(), cuts.end());
  return r;
}

inline void write_training(const ndsm::TrainResult& r, const fs::path& dir) {
  fs::create_directories(dir);
  ndsm::save_model(r.model, (dir / "model.json").string());
  write_text(dir / "history.csv", history_csv(r));
}

// --------------------------------------------------------------- evaluation

inline std::vector<ndsm::Isd> predict_dataset(const ndsm::ModelState& m, const cohort::Dataset& ds, int threads = 1) {
  if (m.input_dim() != ds.dim())
    throw InputError("model expects " + std::to_string(m.input_dim()) + " inputs, data has " + std::to_string(ds.dim()));
  std::vector<ndsm::Isd> out(ds.size());
  parallel_for(ds.size(), threads, [&](std::size_t i) { out[i] = ndsm::predict_isd(m, ds.records[i].features); });
  return out;
}

struct MetricReport {
  std::optional<double> c_td;
  double ibs = 0.0;
  metrics::BrierDecomposition decomposition;
  double km_cal = 0.0;
  std::size_t ipcw_excluded = 0;
  std::vector<std::string> notes;
};

inline MetricReport evaluate(std::span<const ndsm::Isd> preds, std::span<const EventLabel> labels,
                             const metrics::BrierOptions& opt) {
  MetricReport r;
  try {
    r.c_td = metrics::c_td(preds, labels);
  } catch (const UndefinedMetric& e) {
    r.notes.emplace_back(e.what());
  }
  const auto b = metrics::ibs(preds, labels, opt);
  r.ibs = b.ibs;
  r.decomposition = b.decomposition;
  r.ipcw_excluded = b.excluded;
  r.km_cal = metrics::km_cal(preds, labels);
  return r;
}

inline nlohmann::json to_json(const MetricReport& r) {
  return {{"c_td", r.c_td ? nlohmann::json(*r.c_td) : nlohmann::json()},
          {"ibs", r.ibs},
          {"ibs_cal", r.decomposition.cal},
          {"ibs_res", r.decomposition.res},
          {"ibs_unc", r.decomposition.unc},
          {"km_cal", r.km_cal},
          {"ipcw_excluded", r.ipcw_excluded},
          {"notes", r.notes}};
}

// Presentation row: C-td and IBS scaled by 100.
inline std::string metrics_row_csv(const MetricReport& r) {
  csv::Writer w({"c_td_x100", "ibs_x100", "km_cal"});
  w.row({r.c_td ? csv::format_double(100.0 * *r.c_td) : std::string(), csv::format_double(100.0 * r.ibs),
         csv::format_double(r.km_cal)});
  return w.str();
}

inline void write_metrics(const MetricReport& r, const fs::path& dir) {
  write_json(dir / "metrics.json", to_json(r));
  write_text(dir / "metrics_row.csv", metrics_row_csv(r));
}

inline fairness::FairnessReport fairness_for(std::span<const ndsm::Isd> preds, const cohort::Dataset& test,
                                             const std::string& attribute, fairness::FairnessOptions opt,
                                             std::uint64_t seed) {
  opt.km_fair.seed = derive_seed(seed, {fnv1a(attribute)});
  const auto labels = test.labels();
  return fairness::fairness_report(preds, labels, fairness::partition_by(test, attribute), opt);
}

inline void write_fairness(const fairness::FairnessReport& r, const fs::path& dir) {
  write_json(dir / ("fairness-" + r.attribute + ".json"), fairness::to_json(r));
  write_text(dir / ("km_fair-" + r.attribute + ".csv"),
             fairness::decision_matrix_csv(r.labels, fairness::decision_cells(r.km_fair)));
  write_text(dir / ("km_fair_plot-" + r.attribute + ".csv"), fairness::km_fair_plot_csv(r.km_fair));
}

inline void write_importance(const interpret::ImportanceReport& r, std::size_t top_k, const fs::path& dir) {
  write_text(dir / "importance.csv", interpret::importance_csv(r));
  write_text(dir / "importance_top.csv", interpret::importance_top_k_csv(r, top_k));
}

inline std::vector<std::string> fairness_attributes(const RunConfig& c, const cohort::PreprocessModel& m) {
  if (c.sensitive_attributes.empty()) return m.sensitive_attributes;
  for (const auto& a : c.sensitive_attributes)
    if (!cohort::contains(m.sensitive_attributes, a))
      throw InputError("'" + a + "' is not a sensitive attribute of the cohort");
  return c.sensitive_attributes;
}

}  // namespace survtrust::pipeline
