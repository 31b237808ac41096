#pragma once

#include <stdexcept>
#include <string>

namespace mfc {

// Invalid configuration value (bad dimensions, non-positive widths, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A saved artifact does not belong to the consuming problem.
class IncompatibleArtifact : public std::runtime_error {
 public:
  IncompatibleArtifact(std::string field, const std::string& detail)
      : std::runtime_error("incompatible artifact: " + field + " mismatch (" +
                           detail + ")"),
        field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class RolloutDiverged : public std::runtime_error {
 public:
  RolloutDiverged(int agent, int step)
      : std::runtime_error("rollout diverged at agent " + std::to_string(agent) +
                           ", step " + std::to_string(step)),
        agent_(agent),
        step_(step) {}
  int agent() const noexcept { return agent_; }
  int step() const noexcept { return step_; }

 private:
  int agent_;
  int step_;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mfc
