#pragma once

// Synthetic censored cohorts with a known discrete-time hazard.
//
// Each subject draws group labels and baseline covariates, then an event
// interval from h(k|x) = sigmoid(b0[k] + eta(x) + gamma[group]) and an
// independent dropout interval from the censoring hazard. The event is
// observed when it happens no later than the dropout interval (events precede
// censorings within an interval, matching the Kaplan-Meier tie rule). Visit
// rows are emitted every interval so the last-known-diagnosis labeling
// recovers the sampled (delta, time).

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "survtrust/cohort/preprocess.hpp"
#include "survtrust/cohort/time_grid.hpp"
#include "survtrust/cohort/types.hpp"
#include "survtrust/core/csv.hpp"
#include "survtrust/core/random.hpp"

namespace survtrust::cohort {

struct SimulatedFeature {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  double mean = 0.0;
  double sd = 1.0;
  double beta = 0.0;  // hazard logit per unit (continuous)
  std::vector<std::string> levels;
  std::vector<double> probs;
  std::vector<double> level_beta;  // hazard logit per level (categorical)
  double missing_rate = 0.0;
  // attribute -> level -> additive shift of the continuous mean
  std::map<std::string, std::map<std::string, double>> group_shift;
};

struct SimulatedAttribute {
  std::string name;
  std::vector<std::string> levels;
  std::vector<double> prevalence;
  std::vector<double> gamma;  // hazard logit offset per level
  bool model_input = true;
};

struct CohortConfig {
  std::size_t n_subjects = 1000;
  std::uint64_t seed = 0;
  double horizon_months = 120.0;
  int intervals = 20;
  std::vector<double> baseline_logit{-3.0};  // one value broadcasts to every interval
  std::vector<double> censor_hazard{0.03};   // in [0, 1]; one value broadcasts
  std::vector<SimulatedFeature> features;
  std::vector<SimulatedAttribute> attributes;
  double flip_rate = 0.0;  // transient positive visits that revert before the end

  double interval_width() const { return horizon_months / intervals; }
  double baseline_at(int k) const { return baseline_logit.size() == 1 ? baseline_logit[0] : baseline_logit[k]; }
  double censor_at(int k) const { return censor_hazard.size() == 1 ? censor_hazard[0] : censor_hazard[k]; }
};

struct SubjectTruth {
  std::string subject_id;
  std::map<std::string, std::string> groups;
  std::vector<double> hazard;  // per interval
  int event_interval = 0;      // == intervals when no event within the horizon
  int censor_interval = 0;
  int delta = 0;
  double time_raw = 0.0;
};

struct GeneratedCohort {
  RawVisitTable table;
  CohortSchema schema;
  std::vector<SubjectTruth> truth;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline void validate(const CohortConfig& cfg) {
  if (cfg.n_subjects == 0) throw InputError("cohort config: n_subjects must be positive");
  if (cfg.intervals < 1) throw InputError("cohort config: intervals must be >= 1");
  if (!(cfg.horizon_months > 0.0)) throw InputError("cohort config: horizon_months must be positive");
  const auto per_interval = [&](const std::vector<double>& v, const char* what) {
    if (v.size() != 1 && v.size() != static_cast<std::size_t>(cfg.intervals))
      throw InputError(std::string("cohort config: ") + what + " needs 1 or `intervals` values");
  };
  per_interval(cfg.baseline_logit, "baseline_logit");
  per_interval(cfg.censor_hazard, "censor_hazard");
  for (double c : cfg.censor_hazard)
    if (!(c >= 0.0 && c <= 1.0)) throw InputError("cohort config: censor_hazard must lie in [0, 1]");
  for (double b : cfg.baseline_logit)
    if (!std::isfinite(b)) throw InputError("cohort config: baseline_logit must be finite");
  if (!(cfg.flip_rate >= 0.0 && cfg.flip_rate < 1.0)) throw InputError("cohort config: flip_rate must lie in [0, 1)");
  for (const auto& a : cfg.attributes) {
    if (a.levels.empty() || a.levels.size() != a.prevalence.size())
      throw InputError("attribute '" + a.name + "': levels and prevalence differ in length");
    if (!a.gamma.empty() && a.gamma.size() != a.levels.size())
      throw InputError("attribute '" + a.name + "': gamma needs one value per level");
    double s = 0.0;
    for (double p : a.prevalence) {
      if (!(p >= 0.0)) throw InputError("attribute '" + a.name + "': negative prevalence");
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-9) throw InputError("attribute '" + a.name + "': prevalences must sum to 1");
  }
  for (const auto& f : cfg.features) {
    if (!(f.missing_rate >= 0.0 && f.missing_rate < 1.0))
      throw InputError("feature '" + f.name + "': missing_rate must lie in [0, 1)");
    if (f.kind == FeatureKind::categorical) {
      if (f.levels.empty() || f.levels.size() != f.probs.size())
        throw InputError("feature '" + f.name + "': levels and probs differ in length");
      if (!f.level_beta.empty() && f.level_beta.size() != f.levels.size())
        throw InputError("feature '" + f.name + "': level_beta needs one value per level");
    } else if (!(f.sd >= 0.0) || !std::isfinite(f.beta) || !std::isfinite(f.mean)) {
      throw InputError("feature '" + f.name + "': invalid mean/sd/beta");
    }
    for (const auto& [attr, shifts] : f.group_shift) {
      const auto it = std::find_if(cfg.attributes.begin(), cfg.attributes.end(),
                                   [&](const auto& a) { return a.name == attr; });
      if (it == cfg.attributes.end()) throw InputError("feature '" + f.name + "': shift by unknown attribute " + attr);
    }
  }
}

inline CohortSchema schema_of(const CohortConfig& cfg) {
  CohortSchema s;
  for (const auto& a : cfg.attributes) s.features.push_back({a.name, FeatureKind::categorical, a.levels, true, a.model_input});
  for (const auto& f : cfg.features)
    s.features.push_back({f.name, f.kind, f.kind == FeatureKind::categorical ? f.levels : std::vector<std::string>{}});
  return s;
}

inline GeneratedCohort generate_cohort(const CohortConfig& cfg) {
  validate(cfg);
  GeneratedCohort out;
  out.schema = schema_of(cfg);
  for (const auto& f : out.schema.features) out.table.feature_names.push_back(f.name);

  const int K = cfg.intervals;
  const double width = cfg.interval_width();
  const std::size_t id_width = std::to_string(cfg.n_subjects).size();
  for (std::size_t s = 0; s < cfg.n_subjects; ++s) {
    Rng rng(derive_seed(cfg.seed, {s}));
    SubjectTruth t;
    std::string num = std::to_string(s + 1);
    t.subject_id = "S" + std::string(id_width - num.size(), '0') + num;

    std::vector<std::optional<std::string>> values;
    double eta = 0.0;
    for (const auto& a : cfg.attributes) {
      const auto k = rng.categorical(a.prevalence);
      t.groups[a.name] = a.levels[k];
      values.emplace_back(a.levels[k]);
      if (!a.gamma.empty()) eta += a.gamma[k];
    }
    for (const auto& f : cfg.features) {
      std::string value;
      if (f.kind == FeatureKind::continuous) {
        double mu = f.mean;
        for (const auto& [attr, shifts] : f.group_shift)
          if (auto it = shifts.find(t.groups[attr]); it != shifts.end()) mu += it->second;
        const double x = rng.normal(mu, f.sd);
        eta += f.beta * x;
        value = csv::format_double(x);
      } else {
        const auto k = rng.categorical(f.probs);
        if (!f.level_beta.empty()) eta += f.level_beta[k];
        value = f.levels[k];
      }
      const bool missing = f.missing_rate > 0.0 && rng.bernoulli(f.missing_rate);
      values.push_back(missing ? std::nullopt : std::optional<std::string>(value));
    }

    t.hazard.resize(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
      const double h = sigmoid(cfg.baseline_at(k) + eta);
      if (!(h > 0.0 && h < 1.0))
        throw InputError("hazard coefficients give h = " + csv::format_double(h) + " outside (0, 1) for subject " +
                         t.subject_id);
      t.hazard[static_cast<std::size_t>(k)] = h;
    }
    t.event_interval = K;
    for (int k = 0; k < K; ++k)
      if (rng.bernoulli(t.hazard[static_cast<std::size_t>(k)])) {
        t.event_interval = k;
        break;
      }
    t.censor_interval = K - 1;
    for (int k = 0; k < K; ++k)
      if (rng.bernoulli(cfg.censor_at(k))) {
        t.censor_interval = k;
        break;
      }
    t.delta = t.event_interval <= t.censor_interval ? 1 : 0;
    const int observed = t.delta ? t.event_interval : t.censor_interval;
    t.time_raw = observed * width;

    // Visits 0..censor_interval; positive from the event onwards.
    const int last = t.censor_interval;
    const int flip_limit = t.delta ? t.event_interval - 1 : last;
    for (int v = 0; v <= last; ++v) {
      Diagnosis d = (t.delta && v >= t.event_interval) ? Diagnosis::positive : Diagnosis::negative;
      if (cfg.flip_rate > 0.0 && rng.bernoulli(cfg.flip_rate) && v < flip_limit) d = Diagnosis::positive;
      out.table.rows.push_back({t.subject_id, v * width, d, values});
    }
    out.truth.push_back(std::move(t));
  }
  return out;
}

// True event-time distribution of a subject mapped onto `grid`: T+1 entries,
// the last holding the mass beyond the simulation horizon. With
// `given_at_risk`, conditions on no conversion in the baseline interval (the
// population left after truncation).
inline std::vector<double> oracle_pmf(const SubjectTruth& t, const TimeGrid& grid, double interval_width,
                                      bool given_at_risk = true) {
  const int T = grid.intervals();
  std::vector<double> pmf(static_cast<std::size_t>(T) + 1, 0.0);
  double alive = 1.0;
  double total = 0.0;
  for (std::size_t k = 0; k < t.hazard.size(); ++k) {
    const double p = alive * t.hazard[k];
    alive *= 1.0 - t.hazard[k];
    if (given_at_risk && k == 0) continue;
    pmf[static_cast<std::size_t>(grid.bin_of(static_cast<double>(k) * interval_width))] += p;
    total += p;
  }
  pmf.back() += alive;
  total += alive;
  for (auto& p : pmf) p /= total;
  return pmf;
}

// ---------------------------------------------------------------- JSON I/O

inline CohortConfig cohort_config_from_json(const nlohmann::json& j) {
  CohortConfig c;
  c.n_subjects = j.value("n_subjects", c.n_subjects);
  c.seed = j.value("seed", c.seed);
  c.horizon_months = j.value("horizon_months", c.horizon_months);
  c.intervals = j.value("intervals", c.intervals);
  const auto scalar_or_list = [&](const char* key, std::vector<double>& dst) {
    if (!j.contains(key)) return;
    if (j[key].is_array()) dst = j[key].get<std::vector<double>>();
    else dst = {j[key].get<double>()};
  };
  scalar_or_list("baseline_logit", c.baseline_logit);
  scalar_or_list("censor_hazard", c.censor_hazard);
  c.flip_rate = j.value("flip_rate", c.flip_rate);
  for (const auto& a : j.value("attributes", nlohmann::json::array())) {
    SimulatedAttribute attr;
    attr.name = a.at("name").get<std::string>();
    attr.levels = a.at("levels").get<std::vector<std::string>>();
    attr.prevalence = a.at("prevalence").get<std::vector<double>>();
    attr.gamma = a.value("gamma", std::vector<double>{});
    attr.model_input = a.value("model_input", true);
    c.attributes.push_back(std::move(attr));
  }
  for (const auto& f : j.value("features", nlohmann::json::array())) {
    SimulatedFeature feat;
    feat.name = f.at("name").get<std::string>();
    feat.kind = feature_kind_from_string(f.value("kind", std::string("continuous")));
    feat.mean = f.value("mean", 0.0);
    feat.sd = f.value("sd", 1.0);
    feat.beta = f.value("beta", 0.0);
    feat.levels = f.value("levels", std::vector<std::string>{});
    feat.probs = f.value("probs", std::vector<double>{});
    feat.level_beta = f.value("level_beta", std::vector<double>{});
    feat.missing_rate = f.value("missing_rate", 0.0);
    if (f.contains("group_shift"))
      feat.group_shift = f["group_shift"].get<std::map<std::string, std::map<std::string, double>>>();
    c.features.push_back(std::move(feat));
  }
  validate(c);
  return c;
}

inline nlohmann::json to_json(const CohortConfig& c) {
  nlohmann::json attrs = nlohmann::json::array();
  for (const auto& a : c.attributes)
    attrs.push_back({{"name", a.name}, {"levels", a.levels}, {"prevalence", a.prevalence}, {"gamma", a.gamma},
                     {"model_input", a.model_input}});
  nlohmann::json feats = nlohmann::json::array();
  for (const auto& f : c.features) {
    nlohmann::json j{{"name", f.name}, {"kind", to_string(f.kind)}, {"missing_rate", f.missing_rate}};
    if (f.kind == FeatureKind::continuous) {
      j["mean"] = f.mean;
      j["sd"] = f.sd;
      j["beta"] = f.beta;
    } else {
      j["levels"] = f.levels;
      j["probs"] = f.probs;
      j["level_beta"] = f.level_beta;
    }
    if (!f.group_shift.empty()) j["group_shift"] = f.group_shift;
    feats.push_back(std::move(j));
  }
  return {{"n_subjects", c.n_subjects}, {"seed", c.seed}, {"horizon_months", c.horizon_months},
          {"intervals", c.intervals}, {"baseline_logit", c.baseline_logit}, {"censor_hazard", c.censor_hazard},
          {"flip_rate", c.flip_rate}, {"attributes", attrs}, {"features", feats}};
}

}  // namespace survtrust::cohort
