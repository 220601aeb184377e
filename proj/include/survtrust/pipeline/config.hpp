#pragma once

// Flat run configuration. Every key is optional except the cohort; see the
// README for the full list.

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "survtrust/cohort/generator.hpp"
#include "survtrust/cohort/labels.hpp"
#include "survtrust/cohort/preprocess.hpp"
#include "survtrust/core/csv.hpp"
#include "survtrust/core/error.hpp"
#include "survtrust/fairness/report.hpp"
#include "survtrust/metrics/brier.hpp"
#include "survtrust/ndsm/losses.hpp"
#include "survtrust/ndsm/train.hpp"

namespace survtrust::pipeline {

struct RunConfig {
  std::string output_dir = "out";
  std::string cohort_config;  // path; resolved relative to the run config file
  cohort::CohortConfig cohort;
  std::vector<ndsm::Objective> objectives{std::begin(ndsm::kAllObjectives), std::end(ndsm::kAllObjectives)};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<std::string> sensitive_attributes;  // empty = every sensitive attribute in the schema
  std::vector<std::string> drop_attributes;       // withheld from model inputs

  // preprocessing
  cohort::PreprocessOptions preprocess;
  cohort::EventAnchor anchor = cohort::EventAnchor::final_positive_run;
  std::uint64_t split_seed = 0;
  bool split_per_seed = true;  // each run seed draws its own train/val/test split
  double train_fraction = 0.70;
  double val_fraction = 0.15;

  // training
  ndsm::TrainOptions train;

  // evaluation
  metrics::BrierOptions brier;
  fairness::FairnessOptions fairness;
  int importance_repetitions = 10;
  std::size_t importance_top_k = 10;
  int threads = 1;
};

inline std::vector<ndsm::Objective> parse_objectives(const nlohmann::json& j) {
  std::vector<ndsm::Objective> out;
  std::set<ndsm::Objective> seen;
  for (const auto& v : j) {
    const auto o = ndsm::objective_from_string(v.get<std::string>());
    if (seen.insert(o).second) out.push_back(o);
  }
  return out;
}

inline metrics::TieMode tie_mode_from_string(const std::string& s) {
  if (s == "half") return metrics::TieMode::half;
  if (s == "strict") return metrics::TieMode::strict;
  throw InputError("unknown tie mode '" + s + "' (expected half|strict)");
}

inline const char* to_string(metrics::TieMode t) { return t == metrics::TieMode::half ? "half" : "strict"; }

inline RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {},
                                      bool require_cohort = true) {
  static const std::set<std::string> known{
      "output_dir", "cohort_config", "cohort", "objectives", "seeds", "sensitive_attributes", "drop_attributes",
      "missing_threshold", "intervals", "binning", "event_anchor", "split_seed", "split_per_seed", "train_fraction", "val_fraction",
      "epochs", "batch_size", "learning_rate", "beta1", "beta2", "adam_epsilon", "hidden", "activation",
      "rank_sigma", "rank_weight", "ipcw", "brier_groups", "ci_td_ties", "ci_td_scope", "km_fair_resamples",
      "km_fair_alpha", "km_fair_paired", "km_fair_resampling", "km_fair_subsample_fraction", "hosmer_lemeshow",
      "importance_repetitions", "importance_top_k", "threads"};
  if (!j.is_object()) throw InputError("run config must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw InputError("run config: unknown key '" + k + "'");

  RunConfig c;
  c.output_dir = j.value("output_dir", c.output_dir);
  if (j.contains("cohort")) {
    c.cohort = cohort::cohort_config_from_json(j.at("cohort"));
  } else if (j.contains("cohort_config")) {
    std::filesystem::path p = j.at("cohort_config").get<std::string>();
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    c.cohort_config = p.string();
    c.cohort = cohort::cohort_config_from_json(nlohmann::json::parse(csv::read_file(c.cohort_config)));
  } else if (require_cohort) {
    throw InputError("run config: one of 'cohort' or 'cohort_config' is required");
  }
  if (j.contains("objectives")) c.objectives = parse_objectives(j.at("objectives"));
  if (c.objectives.empty()) throw InputError("run config: objectives must be nonempty");
  c.seeds = j.value("seeds", c.seeds);
  if (c.seeds.empty()) throw InputError("run config: seeds must be nonempty");
  if (std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size())
    throw InputError("run config: seeds must be distinct");
  c.sensitive_attributes = j.value("sensitive_attributes", c.sensitive_attributes);
  c.drop_attributes = j.value("drop_attributes", c.drop_attributes);

  c.preprocess.missing_threshold = j.value("missing_threshold", c.preprocess.missing_threshold);
  c.preprocess.intervals = j.value("intervals", c.preprocess.intervals);
  if (j.contains("binning")) c.preprocess.binning = cohort::binning_from_string(j.at("binning").get<std::string>());
  if (j.contains("event_anchor"))
    c.anchor = cohort::event_anchor_from_string(j.at("event_anchor").get<std::string>());
  c.split_seed = j.value("split_seed", c.split_seed);
  c.split_per_seed = j.value("split_per_seed", c.split_per_seed);
  c.train_fraction = j.value("train_fraction", c.train_fraction);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  if (!(c.train_fraction > 0.0 && c.val_fraction >= 0.0 && c.train_fraction + c.val_fraction < 1.0))
    throw InputError("run config: need train_fraction > 0, val_fraction >= 0 and their sum < 1");

  c.train.epochs = j.value("epochs", c.train.epochs);
  c.train.batch_size = j.value("batch_size", c.train.batch_size);
  c.train.adam.lr = j.value("learning_rate", c.train.adam.lr);
  c.train.adam.beta1 = j.value("beta1", c.train.adam.beta1);
  c.train.adam.beta2 = j.value("beta2", c.train.adam.beta2);
  c.train.adam.eps = j.value("adam_epsilon", c.train.adam.eps);
  c.train.arch.hidden = j.value("hidden", c.train.arch.hidden);
  if (j.contains("activation")) c.train.arch.activation = ndsm::activation_from_string(j.at("activation").get<std::string>());
  c.train.loss.rank_sigma = j.value("rank_sigma", c.train.loss.rank_sigma);
  c.train.loss.rank_weight = j.value("rank_weight", c.train.loss.rank_weight);

  c.brier.ipcw = j.value("ipcw", c.brier.ipcw);
  c.brier.forecast_groups = j.value("brier_groups", c.brier.forecast_groups);
  if (j.contains("ci_td_ties")) c.fairness.ci_td.ties = tie_mode_from_string(j.at("ci_td_ties").get<std::string>());
  if (j.contains("ci_td_scope")) {
    const auto s = j.at("ci_td_scope").get<std::string>();
    if (s == "within") c.fairness.ci_td.scope = fairness::PairScope::within;
    else if (s == "cross") c.fairness.ci_td.scope = fairness::PairScope::cross;
    else throw InputError("run config: ci_td_scope must be within|cross");
  }
  auto& kf = c.fairness.km_fair;
  kf.resamples = j.value("km_fair_resamples", kf.resamples);
  kf.alpha = j.value("km_fair_alpha", kf.alpha);
  kf.paired = j.value("km_fair_paired", kf.paired);
  if (j.contains("km_fair_resampling")) {
    const auto s = j.at("km_fair_resampling").get<std::string>();
    if (s == "bootstrap") kf.resampling = fairness::Resampling::bootstrap;
    else if (s == "subsample") kf.resampling = fairness::Resampling::subsample;
    else throw InputError("run config: km_fair_resampling must be bootstrap|subsample");
  }
  kf.subsample_fraction = j.value("km_fair_subsample_fraction", kf.subsample_fraction);
  c.fairness.hosmer_lemeshow = j.value("hosmer_lemeshow", c.fairness.hosmer_lemeshow);
  c.importance_repetitions = j.value("importance_repetitions", c.importance_repetitions);
  c.importance_top_k = j.value("importance_top_k", c.importance_top_k);
  c.threads = j.value("threads", c.threads);
  if (c.threads < 1) throw InputError("run config: threads must be >= 1");
  c.train.threads = c.threads;
  kf.threads = c.threads;
  c.preprocess.drop_inputs = c.drop_attributes;
  return c;
}

inline RunConfig load_run_config(const std::string& path, bool require_cohort = true) {
  return run_config_from_json(nlohmann::json::parse(csv::read_file(path)), std::filesystem::path(path).parent_path(),
                              require_cohort);
}

}  // namespace survtrust::pipeline
