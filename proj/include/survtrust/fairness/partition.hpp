#pragma once

#include <map>
#include <string>
#include <vector>

#include "survtrust/cohort/types.hpp"
#include "survtrust/core/error.hpp"

namespace survtrust::fairness {

// Records split by one sensitive attribute. Groups are ordered by label;
// records with a missing label belong to no group.
struct GroupPartition {
  std::string attribute;
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> indices;

  std::size_t groups() const noexcept { return labels.size(); }
};

inline GroupPartition partition_by(const cohort::Dataset& ds, const std::string& attribute) {
  std::map<std::string, std::vector<std::size_t>> by_label;
  bool seen = false;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto it = ds.records[i].groups.find(attribute);
    if (it == ds.records[i].groups.end()) continue;
    seen = true;
    by_label[it->second].push_back(i);
  }
  if (!seen) throw InputError("no record carries sensitive attribute '" + attribute + "'");
  GroupPartition p;
  p.attribute = attribute;
  for (auto& [label, idx] : by_label) {
    p.labels.push_back(label);
    p.indices.push_back(std::move(idx));
  }
  return p;
}

}  // namespace survtrust::fairness
