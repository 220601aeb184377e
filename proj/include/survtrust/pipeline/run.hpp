#pragma once

// End-to-end driver and the seed aggregate. The aggregate is computed only from
// persisted per-seed files, so a report always matches the artifacts on disk.

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "survtrust/core/error.hpp"
#include "survtrust/core/stats.hpp"
#include "survtrust/pipeline/config.hpp"
#include "survtrust/pipeline/stages.hpp"

namespace survtrust::pipeline {

using Log = std::function<void(const std::string&)>;

struct RunPaths {
  fs::path root;

  fs::path cohort() const { return root / "cohort"; }
  fs::path data(std::uint64_t seed) const { return root / "data" / ("seed-" + std::to_string(seed)); }
  fs::path run(ndsm::Objective o, std::uint64_t seed) const {
    return root / "runs" / ndsm::to_string(o) / ("seed-" + std::to_string(seed));
  }
  fs::path report() const { return root / "report"; }
};

inline nlohmann::json train_key(const nlohmann::json& data_key, ndsm::Objective o, ndsm::TrainOptions opt) {
  return {{"stage", "train"}, {"data", data_key}, {"objective", ndsm::to_string(o)}, {"options", to_json(opt)}};
}

inline nlohmann::json eval_key(const nlohmann::json& train_key, const RunConfig& c,
                               const std::vector<std::string>& attributes) {
  const auto& kf = c.fairness.km_fair;
  return {{"stage", "evaluate"},
          {"train", train_key},
          {"ipcw", c.brier.ipcw},
          {"brier_groups", c.brier.forecast_groups},
          {"attributes", attributes},
          {"ci_td_ties", to_string(c.fairness.ci_td.ties)},
          {"ci_td_scope", c.fairness.ci_td.scope == fairness::PairScope::within ? "within" : "cross"},
          {"km_fair_resamples", kf.resamples},
          {"km_fair_alpha", kf.alpha},
          {"km_fair_paired", kf.paired},
          {"km_fair_resampling", kf.resampling == fairness::Resampling::bootstrap ? "bootstrap" : "subsample"},
          {"km_fair_subsample_fraction", kf.subsample_fraction},
          {"hosmer_lemeshow", c.fairness.hosmer_lemeshow},
          {"importance_repetitions", c.importance_repetitions},
          {"importance_top_k", c.importance_top_k}};
}

// Evaluation, fairness and importance of one trained model on the test split.
inline void evaluate_run(const ndsm::ModelState& model, const cohort::Dataset& test, const RunConfig& c,
                         const std::vector<std::string>& attributes, std::uint64_t seed, const fs::path& dir) {
  const auto preds = predict_dataset(model, test, c.threads);
  const auto labels = test.labels();
  write_metrics(evaluate(preds, labels, c.brier), dir);
  for (const auto& a : attributes) write_fairness(fairness_for(preds, test, a, c.fairness, seed), dir);
  interpret::ImportanceOptions io{c.importance_repetitions, seed, c.threads};
  write_importance(interpret::permutation_importance(model, test, io), c.importance_top_k, dir);
}

// ---------------------------------------------------------------- aggregate

struct MetricSummary {
  std::string metric;
  std::vector<std::optional<double>> values;  // one per seed
  std::optional<double> mean;
  std::optional<double> std;
};

struct ObjectiveSummary {
  ndsm::Objective objective{};
  std::vector<std::uint64_t> seeds;
  std::vector<MetricSummary> metrics;
  // attribute -> (group labels, mean decision matrix over seeds)
  std::map<std::string, std::pair<std::vector<std::string>, std::vector<std::vector<double>>>> km_fair;

  const MetricSummary* find(const std::string& m) const {
    for (const auto& s : metrics)
      if (s.metric == m) return &s;
    return nullptr;
  }
};

struct AggregateReport {
  std::vector<std::string> attributes;
  std::vector<ObjectiveSummary> objectives;

  const ObjectiveSummary* find(ndsm::Objective o) const {
    for (const auto& s : objectives)
      if (s.objective == o) return &s;
    return nullptr;
  }
};

inline std::vector<std::string> headline_metrics(const std::vector<std::string>& attributes) {
  std::vector<std::string> m{"c_td", "ibs", "km_cal"};
  for (const auto& a : attributes) m.push_back("ci_td." + a);
  return m;
}

inline std::vector<std::string> reported_metrics(const std::vector<std::string>& attributes) {
  std::vector<std::string> m{"c_td", "ibs", "ibs_cal", "ibs_res", "ibs_unc", "km_cal"};
  for (const auto& a : attributes) m.push_back("ci_td." + a);
  return m;
}

inline std::optional<double> json_number(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

inline void summarize(MetricSummary& s) {
  std::vector<double> xs;
  for (const auto& v : s.values)
    if (v) xs.push_back(*v);
  if (xs.size() != s.values.size() || xs.empty()) return;  // undefined in some seed
  s.mean = mean(xs);
  s.std = sample_std(xs);
}

inline AggregateReport aggregate(const RunPaths& paths, const std::vector<ndsm::Objective>& objectives,
                                 const std::vector<std::uint64_t>& seeds, const std::vector<std::string>& attributes) {
  AggregateReport rep;
  rep.attributes = attributes;
  for (auto o : objectives) {
    ObjectiveSummary os;
    os.objective = o;
    os.seeds = seeds;
    for (const auto& m : reported_metrics(attributes)) os.metrics.push_back({m, {}, {}, {}});
    for (auto seed : seeds) {
      const auto dir = paths.run(o, seed);
      const auto mj = read_json(dir / "metrics.json");
      std::map<std::string, std::optional<double>> row;
      for (const char* k : {"c_td", "ibs", "ibs_cal", "ibs_res", "ibs_unc", "km_cal"}) row[k] = json_number(mj.at(k));
      for (const auto& a : attributes) {
        const auto fr = fairness::fairness_report_from_json(read_json(dir / ("fairness-" + a + ".json")));
        row["ci_td." + a] = fr.ci_td;
        auto& [labels, cells] = os.km_fair[a];
        if (labels.empty()) {
          labels = fr.labels;
          cells.assign(labels.size(), std::vector<double>(labels.size(), 0.0));
        }
        if (fr.labels != labels) throw InputError("group labels differ between seeds for '" + a + "'");
        for (std::size_t i = 0; i < labels.size(); ++i)
          for (std::size_t j = 0; j < labels.size(); ++j)
            cells[i][j] += fr.km_fair.entries[i][j].decision / static_cast<double>(seeds.size());
      }
      for (auto& s : os.metrics) s.values.push_back(row.at(s.metric));
    }
    for (auto& s : os.metrics) summarize(s);
    rep.objectives.push_back(std::move(os));
  }
  return rep;
}

inline std::string optional_cell(const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); }

// "mean (std)" with fixed decimals, scaled for presentation.
inline std::string mean_std_cell(const MetricSummary* s, double scale, int decimals) {
  if (!s || !s->mean) return "";
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.*f (%.*f)", decimals, scale * *s->mean, decimals, scale * *s->std);
  return buf;
}

inline nlohmann::json to_json(const AggregateReport& r) {
  nlohmann::json objs = nlohmann::json::array();
  for (const auto& o : r.objectives) {
    nlohmann::json metrics = nlohmann::json::object();
    for (const auto& m : o.metrics) {
      nlohmann::json vals = nlohmann::json::array();
      for (const auto& v : m.values) vals.push_back(v ? nlohmann::json(*v) : nlohmann::json());
      metrics[m.metric] = {{"values", vals},
                           {"mean", m.mean ? nlohmann::json(*m.mean) : nlohmann::json()},
                           {"std", m.std ? nlohmann::json(*m.std) : nlohmann::json()}};
    }
    nlohmann::json kf = nlohmann::json::object();
    for (const auto& [a, lc] : o.km_fair) kf[a] = {{"labels", lc.first}, {"mean_decision", lc.second}};
    objs.push_back({{"objective", ndsm::to_string(o.objective)}, {"seeds", o.seeds}, {"metrics", metrics}, {"km_fair", kf}});
  }
  return {{"attributes", r.attributes}, {"std_basis", "sample"}, {"objectives", objs}};
}

inline void write_report(const AggregateReport& r, const fs::path& dir) {
  csv::Writer per_seed({"objective", "seed", "metric", "value"});
  csv::Writer summary({"objective", "metric", "n", "mean", "std"});
  std::vector<std::string> th{"objective", "c_td_x100", "ibs_x100", "km_cal"};
  for (const auto& a : r.attributes) th.push_back("ci_td_" + a + "_x100");
  csv::Writer table(th);
  for (const auto& o : r.objectives) {
    const std::string name = ndsm::to_string(o.objective);
    for (const auto& m : o.metrics) {
      for (std::size_t s = 0; s < o.seeds.size(); ++s)
        per_seed.row({name, std::to_string(o.seeds[s]), m.metric, optional_cell(m.values[s])});
      summary.row({name, m.metric, std::to_string(m.values.size()), optional_cell(m.mean), optional_cell(m.std)});
    }
    std::vector<std::string> row{name, mean_std_cell(o.find("c_td"), 100.0, 2), mean_std_cell(o.find("ibs"), 100.0, 2),
                                 mean_std_cell(o.find("km_cal"), 1.0, 4)};
    for (const auto& a : r.attributes) row.push_back(mean_std_cell(o.find("ci_td." + a), 100.0, 2));
    table.row(row);
    for (const auto& [a, lc] : o.km_fair)
      write_text(dir / ("km_fair-" + name + "-" + a + ".csv"), fairness::decision_matrix_csv(lc.first, lc.second));
  }
  write_text(dir / "per_seed.csv", per_seed.str());
  write_text(dir / "summary.csv", summary.str());
  write_text(dir / "table.csv", table.str());
  write_json(dir / "report.json", to_json(r));
}

// ------------------------------------------------------------------ driver

template <class Fn>
auto stage(const std::string& name, long long seed, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, seed, e.what());
  }
}

inline AggregateReport run_pipeline(const RunConfig& c, const Log& log = {}) {
  const RunPaths paths{c.output_dir};
  const auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  stage("generate", -1, [&] {
    say(generate_stage(c.cohort, paths.cohort()) ? "generate: wrote cohort" : "generate: cached");
    return 0;
  });
  std::vector<std::string> attributes;
  for (auto seed : c.seeds) {
    const auto sd = static_cast<long long>(seed);
    const auto data_dir = paths.data(seed);
    stage("preprocess", sd, [&] {
      say(preprocess_stage(paths.cohort(), preprocess_settings(c, seed), data_dir)
              ? "preprocess seed " + std::to_string(seed) + ": wrote splits"
              : "preprocess seed " + std::to_string(seed) + ": cached");
      return 0;
    });
    const auto data = stage("preprocess", sd, [&] { return load_prepared(data_dir); });
    const auto data_key = read_json(data_dir / "stage.json");
    attributes = stage("evaluate", sd, [&] { return fairness_attributes(c, data.model); });

    for (auto o : c.objectives) {
      const auto dir = paths.run(o, seed);
      const std::string tag = std::string(ndsm::to_string(o)) + " seed " + std::to_string(seed);
      auto opt = c.train;
      opt.seed = seed;
      const auto tk = train_key(data_key, o, opt);
      stage("train", sd, [&] {
        if (stage_current(dir, tk, {"model.json", "history.csv"}, "train.stage.json")) {
          say("train " + tag + ": cached");
        } else {
          write_training(fit_model(data, o, opt), dir);
          mark_stage(dir, tk, "train.stage.json");
          say("train " + tag + ": done");
        }
        return 0;
      });
      const auto ek = eval_key(tk, c, attributes);
      stage("evaluate", sd, [&] {
        if (stage_current(dir, ek, {"metrics.json", "importance.csv"}, "eval.stage.json")) {
          say("evaluate " + tag + ": cached");
        } else {
          evaluate_run(ndsm::load_model((dir / "model.json").string()), data.test, c, attributes, seed, dir);
          mark_stage(dir, ek, "eval.stage.json");
          say("evaluate " + tag + ": done");
        }
        return 0;
      });
    }
  }
  return stage("report", -1, [&] {
    auto rep = aggregate(paths, c.objectives, c.seeds, attributes);
    write_report(rep, paths.report());
    return rep;
  });
}

// ----------------------------------------------------------------- ablation

struct AblationDelta {
  std::string objective;
  std::string metric;
  double baseline_mean = 0.0;
  double baseline_std = 0.0;
  double ablated_mean = 0.0;
  double delta = 0.0;  // ablated - baseline
  bool significant = false;
  int direction = 0;  // +1 improved, -1 worse, 0 not significant
};

// A change counts when it leaves the baseline's one-standard-deviation band.
inline bool significant_delta(double delta, double baseline_std) { return std::abs(delta) > baseline_std; }

inline bool higher_is_better(const std::string& metric) { return metric == "c_td"; }

struct AblationReport {
  std::vector<std::string> dropped;
  AggregateReport baseline;
  AggregateReport ablated;
  std::vector<AblationDelta> deltas;

  std::size_t significant_count() const {
    std::size_t n = 0;
    for (const auto& d : deltas) n += d.significant;
    return n;
  }
};

inline std::vector<AblationDelta> ablation_deltas(const AggregateReport& base, const AggregateReport& abl) {
  std::vector<AblationDelta> out;
  for (const auto& bo : base.objectives) {
    const auto* ao = abl.find(bo.objective);
    if (!ao) continue;
    for (const auto& m : headline_metrics(base.attributes)) {
      const auto* b = bo.find(m);
      const auto* a = ao->find(m);
      if (!b || !a || !b->mean || !a->mean) continue;
      AblationDelta d;
      d.objective = ndsm::to_string(bo.objective);
      d.metric = m;
      d.baseline_mean = *b->mean;
      d.baseline_std = *b->std;
      d.ablated_mean = *a->mean;
      d.delta = d.ablated_mean - d.baseline_mean;
      d.significant = significant_delta(d.delta, d.baseline_std);
      if (d.significant) d.direction = ((d.delta > 0) == higher_is_better(m)) ? 1 : -1;
      out.push_back(d);
    }
  }
  return out;
}

inline std::string ablation_csv(const std::vector<AblationDelta>& ds) {
  csv::Writer w({"objective", "metric", "baseline_mean", "baseline_std", "ablated_mean", "delta", "significant",
                 "direction"});
  for (const auto& d : ds)
    w.row({d.objective, d.metric, csv::format_double(d.baseline_mean), csv::format_double(d.baseline_std),
           csv::format_double(d.ablated_mean), csv::format_double(d.delta), d.significant ? "1" : "0",
           std::to_string(d.direction)});
  return w.str();
}

inline std::string ablation_dir_name(const std::vector<std::string>& drop) {
  std::string s = "ablation";
  for (const auto& d : drop) s += "-" + d;
  return s;
}

// Baseline with cfg.drop_attributes as given, then a paired run with `drop`
// withheld from the inputs under the same seeds. Fairness still uses the
// withheld labels.
inline AblationReport run_ablation(const RunConfig& cfg, const std::vector<std::string>& drop, const Log& log = {}) {
  if (drop.empty()) throw StageError("ablate", -1, "no attribute to drop");
  stage("ablate", -1, [&] {
    const auto schema = cohort::schema_of(cfg.cohort);
    for (const auto& d : drop)
      if (!schema.find(d)) throw InputError("cannot drop '" + d + "': not in the cohort schema");
    return 0;
  });
  AblationReport r;
  r.dropped = drop;
  r.baseline = run_pipeline(cfg, log);
  RunConfig ab = cfg;
  ab.output_dir = (fs::path(cfg.output_dir) / ablation_dir_name(drop)).string();
  for (const auto& d : drop)
    if (!cohort::contains(ab.drop_attributes, d)) ab.drop_attributes.push_back(d);
  ab.preprocess.drop_inputs = ab.drop_attributes;
  if (ab.sensitive_attributes.empty()) ab.sensitive_attributes = r.baseline.attributes;
  r.ablated = run_pipeline(ab, log);
  r.deltas = ablation_deltas(r.baseline, r.ablated);
  stage("ablate", -1, [&] {
    write_text(fs::path(ab.output_dir) / "report" / "ablation_deltas.csv", ablation_csv(r.deltas));
    return 0;
  });
  return r;
}

}  // namespace survtrust::pipeline
