#pragma once

#include <stdexcept>
#include <string>

namespace survtrust {

// Malformed input data or configuration.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A metric whose defining set is empty (no comparable pairs, fewer than two
// valid groups, ...).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Numerical failure during optimization (non-finite loss or parameters).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Error raised by a pipeline stage; carries the stage name and seed.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, long long seed, const std::string& what)
      : std::runtime_error("[" + stage + (seed >= 0 ? " seed=" + std::to_string(seed) : std::string()) + "] " + what),
        stage_(std::move(stage)),
        seed_(seed) {}

  const std::string& stage() const noexcept { return stage_; }
  long long seed() const noexcept { return seed_; }

 private:
  std::string stage_;
  long long seed_;
};

}  // namespace survtrust
