#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "survtrust/cohort/types.hpp"

namespace survtrust::cohort {

// Where the event time sits for a subject whose last diagnosis is positive.
enum class EventAnchor {
  final_positive_run,  // first visit of the uninterrupted positive run ending at the last visit
  first_positive,      // first positive visit ever
};

inline const char* to_string(EventAnchor a) {
  return a == EventAnchor::final_positive_run ? "final_positive_run" : "first_positive";
}

inline EventAnchor event_anchor_from_string(const std::string& s) {
  if (s == "final_positive_run") return EventAnchor::final_positive_run;
  if (s == "first_positive") return EventAnchor::first_positive;
  throw InputError("unknown event anchor '" + s + "' (expected final_positive_run|first_positive)");
}

struct SubjectVisits {
  std::string subject_id;
  std::vector<const VisitRow*> visits;
};

// Groups rows by subject in first-appearance order and validates that visit
// times are >= 0 and strictly increasing per subject.
inline std::vector<SubjectVisits> group_visits(const RawVisitTable& table) {
  std::vector<SubjectVisits> subjects;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& row : table.rows) {
    if (row.subject_id.empty()) throw InputError("visit row without subject_id");
    if (!(row.visit_time >= 0.0)) throw InputError("subject " + row.subject_id + ": negative or invalid visit time");
    auto [it, inserted] = index.try_emplace(row.subject_id, subjects.size());
    if (inserted) subjects.push_back({row.subject_id, {}});
    auto& s = subjects[it->second];
    if (!s.visits.empty() && !(row.visit_time > s.visits.back()->visit_time))
      throw InputError("subject " + row.subject_id + ": visit times must be strictly increasing");
    s.visits.push_back(&row);
  }
  return subjects;
}

// Last-known-diagnosis labeling. A negative final diagnosis censors the
// subject at the last visit; a positive one records an event at the anchor
// visit of the final positive run.
inline SurvivalLabel label_subject(const SubjectVisits& s, EventAnchor anchor = EventAnchor::final_positive_run) {
  if (s.visits.empty()) throw InputError("subject " + s.subject_id + " has no visits");
  const auto& last = *s.visits.back();
  if (last.diagnosis == Diagnosis::negative) return {s.subject_id, 0, last.visit_time};
  std::size_t start = s.visits.size() - 1;
  if (anchor == EventAnchor::final_positive_run) {
    while (start > 0 && s.visits[start - 1]->diagnosis == Diagnosis::positive) --start;
  } else {
    start = 0;
    while (s.visits[start]->diagnosis != Diagnosis::positive) ++start;
  }
  return {s.subject_id, 1, s.visits[start]->visit_time};
}

inline std::vector<SurvivalLabel> build_survival_labels(const RawVisitTable& table,
                                                        EventAnchor anchor = EventAnchor::final_positive_run) {
  std::vector<SurvivalLabel> out;
  for (const auto& s : group_visits(table)) out.push_back(label_subject(s, anchor));
  return out;
}

inline bool converted_at_baseline(const SurvivalLabel& l) { return l.delta == 1 && l.time_raw == 0.0; }

// Drops subjects already converted at their baseline visit; order preserved.
template <class Record>
std::vector<Record> truncate_at_risk(std::span<const Record> records) {
  std::vector<Record> out;
  out.reserve(records.size());
  for (const auto& r : records)
    if (!(r.delta == 1 && r.time_raw == 0.0)) out.push_back(r);
  return out;
}

template <class Record>
std::vector<Record> truncate_at_risk(const std::vector<Record>& records) {
  return truncate_at_risk(std::span<const Record>(records));
}

}  // namespace survtrust::cohort
