// survtrust: command-line front end for the survival modeling and audit stages.

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "survtrust/cohort/generator.hpp"
#include "survtrust/cohort/io.hpp"
#include "survtrust/core/error.hpp"
#include "survtrust/km.hpp"
#include "survtrust/pipeline/run.hpp"

namespace st = survtrust;
namespace fs = std::filesystem;
using st::pipeline::RunConfig;

namespace {

struct Common {
  std::string config;
  int threads = 0;
};

RunConfig base_config(const Common& c, bool require_cohort) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : st::pipeline::load_run_config(c.config, require_cohort);
  if (c.threads > 0) {
    cfg.threads = c.threads;
    cfg.train.threads = c.threads;
    cfg.fairness.km_fair.threads = c.threads;
  }
  return cfg;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

st::cohort::Dataset load_split(const std::string& data_dir, const std::string& split,
                               st::cohort::PreprocessModel* manifest = nullptr) {
  if (split != "train" && split != "val" && split != "test") throw st::InputError("split must be train|val|test");
  const auto m = st::cohort::preprocess_model_from_json(st::pipeline::read_json(fs::path(data_dir) / "manifest.json"));
  if (manifest) *manifest = m;
  return st::pipeline::load_split(fs::path(data_dir) / (split + ".csv"), m);
}

void log_line(const std::string& s) { std::cerr << s << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-time neural survival models with calibration, fairness and importance audits"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--threads", common.threads, "Worker threads (results do not depend on this)");

  // generate
  auto* gen = app.add_subcommand("generate", "Simulate a censored visit-level cohort");
  std::string gen_cfg, gen_out;
  gen->add_option("--cohort", gen_cfg, "Cohort config JSON")->required();
  gen->add_option("--out", gen_out, "Output directory")->required();

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Labels, split, imputation, scaling, encoding and time grid");
  std::string pre_cohort, pre_out, pre_drop, pre_binning;
  int pre_intervals = 0;
  double pre_missing = -1.0;
  pre->add_option("--config", common.config, "Run config JSON (flat keys)");
  pre->add_option("--cohort-dir", pre_cohort, "Directory written by 'generate'")->required();
  pre->add_option("--out", pre_out, "Output directory")->required();
  pre->add_option("--intervals", pre_intervals, "Number of time intervals");
  pre->add_option("--binning", pre_binning, "quantile|equal_width");
  pre->add_option("--missing-threshold", pre_missing, "Drop features missing above this fraction");
  pre->add_option("--drop", pre_drop, "Comma-separated attributes withheld from model inputs");
  std::uint64_t pre_seed = 1;
  pre->add_option("--seed", pre_seed, "Run seed the split belongs to (see split_per_seed)");

  // train
  auto* tr = app.add_subcommand("train", "Train one model");
  std::string tr_data, tr_out, tr_objective = "nll";
  std::uint64_t tr_seed = 1;
  int tr_epochs = -1, tr_batch = 0;
  double tr_lr = 0.0;
  tr->add_option("--config", common.config, "Run config JSON (flat keys)");
  tr->add_option("--data", tr_data, "Directory written by 'preprocess'")->required();
  tr->add_option("--out", tr_out, "Output directory")->required();
  tr->add_option("--objective", tr_objective, "nll|deephit|nmtlr|rps|rpsrank");
  tr->add_option("--seed", tr_seed, "Seed");
  tr->add_option("--epochs", tr_epochs, "Epochs");
  tr->add_option("--lr", tr_lr, "Adam learning rate");
  tr->add_option("--batch", tr_batch, "Batch size");

  // evaluate / fairness / importance / km share model + data arguments
  std::string ev_model, ev_data, ev_out, ev_split = "test";
  auto* ev = app.add_subcommand("evaluate", "C-td, IBS with decomposition, KM-Cal");
  ev->add_option("--config", common.config, "Run config JSON (flat keys)");
  ev->add_option("--model", ev_model, "model.json")->required();
  ev->add_option("--data", ev_data, "Directory written by 'preprocess'")->required();
  ev->add_option("--split", ev_split, "train|val|test");
  ev->add_option("--out", ev_out, "Output directory")->required();

  auto* fa = app.add_subcommand("fairness", "Concordance impurity, KM-Fair matrix, Hosmer-Lemeshow");
  std::string fa_attrs;
  std::uint64_t fa_seed = 1;
  int fa_resamples = 0;
  double fa_alpha = 0.0;
  fa->add_option("--config", common.config, "Run config JSON (flat keys)");
  fa->add_option("--model", ev_model, "model.json")->required();
  fa->add_option("--data", ev_data, "Directory written by 'preprocess'")->required();
  fa->add_option("--split", ev_split, "train|val|test");
  fa->add_option("--out", ev_out, "Output directory")->required();
  fa->add_option("--attributes", fa_attrs, "Comma-separated sensitive attributes (default: all)");
  fa->add_option("--seed", fa_seed, "Bootstrap seed");
  fa->add_option("--resamples", fa_resamples, "Bootstrap resamples");
  fa->add_option("--alpha", fa_alpha, "Interval level");

  auto* im = app.add_subcommand("importance", "Permutation feature importance");
  std::uint64_t im_seed = 1;
  int im_reps = 0;
  std::size_t im_top = 0;
  im->add_option("--config", common.config, "Run config JSON (flat keys)");
  im->add_option("--model", ev_model, "model.json")->required();
  im->add_option("--data", ev_data, "Directory written by 'preprocess'")->required();
  im->add_option("--split", ev_split, "train|val|test");
  im->add_option("--out", ev_out, "Output directory")->required();
  im->add_option("--seed", im_seed, "Permutation seed");
  im->add_option("--reps", im_reps, "Repetitions per feature");
  im->add_option("--top-k", im_top, "Rows in the top-k plot file");

  auto* kmc = app.add_subcommand("km", "Kaplan-Meier curve of a preprocessed split");
  std::string km_target = "event", km_out;
  kmc->add_option("--data", ev_data, "Directory written by 'preprocess'")->required();
  kmc->add_option("--split", ev_split, "train|val|test");
  kmc->add_option("--target", km_target, "event|censoring");
  kmc->add_option("--out", km_out, "Output CSV")->required();

  // whole pipeline
  auto* run = app.add_subcommand("run", "All stages for every objective and seed, then the report");
  run->add_option("--config", common.config, "Run config JSON (flat keys)")->required();
  auto* rep = app.add_subcommand("report", "Aggregate existing per-seed artifacts");
  rep->add_option("--config", common.config, "Run config JSON (flat keys)")->required();
  auto* abl = app.add_subcommand("ablate", "Baseline plus a run with attributes withheld from the inputs");
  std::string abl_drop;
  abl->add_option("--config", common.config, "Run config JSON (flat keys)")->required();
  abl->add_option("--drop", abl_drop, "Comma-separated attributes to withhold")->required();

  CLI11_PARSE(app, argc, argv);

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    if (*gen) {
      const auto cfg = st::cohort::cohort_config_from_json(st::pipeline::read_json(gen_cfg));
      st::pipeline::write_cohort(st::cohort::generate_cohort(cfg), cfg, gen_out);
      st::pipeline::mark_stage(gen_out, st::pipeline::generate_key(cfg));
    } else if (*pre) {
      auto cfg = base_config(common, false);
      auto s = st::pipeline::preprocess_settings(cfg, pre_seed);
      if (pre_intervals > 0) s.options.intervals = pre_intervals;
      if (!pre_binning.empty()) s.options.binning = st::cohort::binning_from_string(pre_binning);
      if (pre_missing >= 0.0) s.options.missing_threshold = pre_missing;
      if (!pre_drop.empty()) s.options.drop_inputs = split_list(pre_drop);
      st::pipeline::preprocess_stage(pre_cohort, s, pre_out);
    } else if (*tr) {
      auto cfg = base_config(common, false);
      auto opt = cfg.train;
      opt.seed = tr_seed;
      if (tr_epochs >= 0) opt.epochs = tr_epochs;
      if (tr_lr > 0.0) opt.adam.lr = tr_lr;
      if (tr_batch > 0) opt.batch_size = tr_batch;
      const auto data = st::pipeline::load_prepared(tr_data);
      const auto result = st::pipeline::fit_model(data, st::ndsm::objective_from_string(tr_objective), opt);
      st::pipeline::write_training(result, tr_out);
      std::cerr << "selected epoch " << result.best_epoch << '\n';
    } else if (*ev) {
      const auto cfg = base_config(common, false);
      const auto model = st::ndsm::load_model(ev_model);
      const auto ds = load_split(ev_data, ev_split);
      const auto preds = st::pipeline::predict_dataset(model, ds, cfg.threads);
      const auto labels = ds.labels();
      const auto r = st::pipeline::evaluate(preds, labels, cfg.brier);
      st::pipeline::write_metrics(r, ev_out);
      std::cout << st::pipeline::to_json(r).dump(2) << '\n';
    } else if (*fa) {
      auto cfg = base_config(common, false);
      if (fa_resamples > 0) cfg.fairness.km_fair.resamples = fa_resamples;
      if (fa_alpha > 0.0) cfg.fairness.km_fair.alpha = fa_alpha;
      if (!fa_attrs.empty()) cfg.sensitive_attributes = split_list(fa_attrs);
      st::cohort::PreprocessModel manifest;
      const auto ds = load_split(ev_data, ev_split, &manifest);
      const auto model = st::ndsm::load_model(ev_model);
      const auto preds = st::pipeline::predict_dataset(model, ds, cfg.threads);
      for (const auto& a : st::pipeline::fairness_attributes(cfg, manifest))
        st::pipeline::write_fairness(st::pipeline::fairness_for(preds, ds, a, cfg.fairness, fa_seed), ev_out);
    } else if (*im) {
      auto cfg = base_config(common, false);
      if (im_reps > 0) cfg.importance_repetitions = im_reps;
      if (im_top > 0) cfg.importance_top_k = im_top;
      const auto ds = load_split(ev_data, ev_split);
      const auto model = st::ndsm::load_model(ev_model);
      const auto r = st::interpret::permutation_importance(
          model, ds, {cfg.importance_repetitions, im_seed, cfg.threads});
      st::pipeline::write_importance(r, cfg.importance_top_k, ev_out);
      for (const auto& n : r.notes) std::cerr << n << '\n';
    } else if (*kmc) {
      st::cohort::PreprocessModel manifest;
      const auto ds = load_split(ev_data, ev_split, &manifest);
      const auto labels = ds.labels();
      if (km_target != "event" && km_target != "censoring") throw st::InputError("target must be event|censoring");
      const auto T = manifest.grid.intervals();
      const auto curve = st::km::km_estimate(labels, T, km_target == "event" ? st::km::Target::event
                                                                              : st::km::Target::censoring);
      const auto at_risk = st::km::at_risk_counts(labels, T);
      const auto cuts = manifest.grid.cut_points();
      st::csv::Writer w({"bin", "start", "end", "at_risk", "survival"});
      for (int k = 0; k < T; ++k)
        w.row({std::to_string(k), st::csv::format_double(cuts[static_cast<std::size_t>(k)]),
               st::csv::format_double(cuts[static_cast<std::size_t>(k) + 1]),
               std::to_string(at_risk[static_cast<std::size_t>(k)]), st::csv::format_double(curve.after_bin(k))});
      st::pipeline::write_text(km_out, w.str());
    } else if (*run) {
      const auto cfg = base_config(common, true);
      const auto r = st::pipeline::run_pipeline(cfg, log_line);
      std::cout << st::pipeline::to_json(r).dump(2) << '\n';
    } else if (*rep) {
      const auto cfg = base_config(common, false);
      const st::pipeline::RunPaths paths{cfg.output_dir};
      const auto data = st::pipeline::load_prepared(paths.data(cfg.seeds.front()));
      const auto attrs = st::pipeline::fairness_attributes(cfg, data.model);
      const auto r = st::pipeline::aggregate(paths, cfg.objectives, cfg.seeds, attrs);
      st::pipeline::write_report(r, paths.report());
      std::cout << st::pipeline::to_json(r).dump(2) << '\n';
    } else if (*abl) {
      const auto cfg = base_config(common, true);
      const auto r = st::pipeline::run_ablation(cfg, split_list(abl_drop), log_line);
      std::cout << st::pipeline::ablation_csv(r.deltas);
      std::cerr << r.significant_count() << " significant deltas\n";
    }
  } catch (const st::StageError& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "[" << stage << "] " << e.what() << '\n';
    return 1;
  }
  return 0;
}
