#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mfc/feature_map.hpp"
#include "mfc/problem.hpp"
#include "mfc/solvers.hpp"

namespace mfc {

struct ProblemConfig {
  DynamicsKind dynamics = DynamicsKind::double_integrator;
  QuadrotorParams quadrotor;
  TimeGrid grid;
  int agents = 100;
  CostSpec costs;
  InitialDistribution init;
};

struct KernelConfig {
  KernelSpec kernel;
  FeatureKind backend = FeatureKind::random_feature;
  int rank = 50;
  std::uint64_t seed = 1;
  MlpFitConfig mlp;
  std::string map_path;  // load a saved feature map instead of building one
  std::optional<Eigen::MatrixXd> kr;
};

struct CoupledConfig {
  OptimizerOptions optimizer;
  bool exact_kernel = false;
};

struct BenchConfig {
  std::vector<int> sizes{500, 1000, 2000, 4000};
  int repetitions = 3;
  std::uint64_t seed = 11;
};

struct ReuseConfig {
  std::vector<int> source_sizes{50, 100};
  int eval_size = 200;
  std::uint64_t eval_seed = 99;
};

struct RaceConfig {
  int agents = 50;
  int runs = 3;
  double threshold = 0.5;
  bool exact_kernel = false;
};

struct OutputConfig {
  std::string dir = "out";
  bool trajectories = true;
  bool history = true;
  bool coefficients = true;
  bool feature_map = true;
};

/// Every setting of an experiment. Serialized as JSON; unknown keys are
/// rejected at every level.
struct RunConfig {
  ProblemConfig problem;
  KernelConfig kernel;
  PrimalDualOptions solver;
  CoupledConfig coupled;
  BenchConfig bench;
  ReuseConfig reuse;
  RaceConfig race;
  OutputConfig output;
  int workers = 0;  // 0: available parallelism

  /// Desk-scale double integrator.
  static RunConfig defaults();

  static RunConfig from_json_string(std::string_view text);
  std::string to_json_string() const;

  /// Applies KEY=VALUE with a dotted key into the JSON form. VALUE is parsed
  /// as JSON when possible, else taken as a string. Throws ConfigError for
  /// unknown keys or ill-typed values.
  void apply_override(std::string_view assignment);

  /// FNV-1a of the canonical JSON form, output.dir excluded.
  std::string hash() const;
  int effective_workers() const;
  void validate() const;
};

RunConfig load_run_config(const std::string& path);

/// Builds (or loads) the feature map described by the kernel section. The
/// fit report is filled when a network is trained.
FeatureMap build_feature_map(const KernelConfig& cfg, FitReport* report = nullptr);

ProblemSpec build_problem(const ProblemConfig& cfg, const FeatureMap& map);
ProblemSpec build_problem(const ProblemConfig& cfg, const FeatureMap& map, int agents);

}  // namespace mfc
