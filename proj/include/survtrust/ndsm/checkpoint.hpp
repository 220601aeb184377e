#pragma once

// Versioned JSON checkpoint: architecture header, objective, seed, grid cut
// points, feature names, parameters and optimizer moments. Doubles are written
// in shortest round-trip form, so save/load is exact.

#include <fstream>
#include <string>

#include "json.hpp"
#include "survtrust/core/csv.hpp"
#include "survtrust/core/error.hpp"
#include "survtrust/ndsm/network.hpp"

namespace survtrust::ndsm {

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json to_json(const ModelState& m) {
  return {{"format", "survtrust-model"},
          {"version", kCheckpointVersion},
          {"architecture", {{"widths", m.widths}, {"activation", to_string(m.activation)}}},
          {"objective", to_string(m.objective)},
          {"seed", m.seed},
          {"cut_points", m.cut_points},
          {"feature_names", m.feature_names},
          {"params", m.params},
          {"adam", {{"step", m.adam.step}, {"m", m.adam.m}, {"v", m.adam.v}}}};
}

inline ModelState model_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "survtrust-model") throw InputError("not a survtrust model checkpoint");
  if (j.value("version", 0) != kCheckpointVersion)
    throw InputError("unsupported checkpoint version " + std::to_string(j.value("version", 0)));
  ModelState m;
  m.widths = j.at("architecture").at("widths").get<std::vector<int>>();
  m.activation = activation_from_string(j.at("architecture").at("activation").get<std::string>());
  m.objective = objective_from_string(j.at("objective").get<std::string>());
  m.seed = j.at("seed").get<std::uint64_t>();
  m.cut_points = j.at("cut_points").get<std::vector<double>>();
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  m.params = j.at("params").get<std::vector<double>>();
  m.adam.step = j.at("adam").at("step").get<std::uint64_t>();
  m.adam.m = j.at("adam").at("m").get<std::vector<double>>();
  m.adam.v = j.at("adam").at("v").get<std::vector<double>>();
  if (m.widths.size() < 2 || m.params.size() != ModelState::parameter_count(m.widths))
    throw InputError("checkpoint parameter count does not match its architecture");
  if (m.cut_points.size() != m.output_dim())
    throw InputError("checkpoint grid has " + std::to_string(m.cut_points.size()) + " cut points for " +
                     std::to_string(m.output_dim()) + " outputs");
  return m;
}

inline void save_model(const ModelState& m, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path);
  f << to_json(m).dump() << '\n';
}

inline ModelState load_model(const std::string& path) {
  return model_from_json(nlohmann::json::parse(csv::read_file(path)));
}

}  // namespace survtrust::ndsm
