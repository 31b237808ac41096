#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mfc/solvers.hpp"

namespace mfc {

struct TimingRecord {
  std::string label;  // "direct" or "features"
  int n = 0;
  int repetitions = 0;
  double seconds = 0.0;  // per evaluation, minimum over repetitions
  int workers = 1;
};

struct InteractionBench {
  std::vector<TimingRecord> records;
  double direct_slope = 0.0;  // log-log slope of seconds against N
  double feature_slope = 0.0;
};

/// Least-squares slope of log(y) against log(x); 0 for fewer than 2 points.
double loglog_slope(std::span<const double> x, std::span<const double> y);

/// Times the exact O(N^2) interaction and the O(N r) feature form on N
/// Gaussian positions for every size. Each repetition runs enough
/// evaluations to last about `min_seconds`.
InteractionBench bench_interaction(std::span<const int> sizes, const FeatureMap& map,
                                   int repetitions = 3, std::uint64_t seed = 11,
                                   int workers = 1, double min_seconds = 0.02);

struct ReuseReport {
  int source_n = 0;
  int eval_n = 0;
  double rel_traj_diff = 0.0;
  double rel_coeff_diff = 0.0;
  bool source_converged = false;
  bool primal_converged = false;  // stacked primal gradient <= eps_tol after the re-solve
};

struct ReuseStudy {
  std::vector<ReuseReport> reports;  // one per source size, then the reference itself
  DualCoefficients reference;
};

/// Solves the saddle point with every source size (instances drawn with
/// spec.init.seed) and with eval_n agents for the reference, then re-solves
/// only the primal problem on one fixed eval_n-agent set (eval_seed) for each
/// set of coefficients, from identical warm starts.
ReuseStudy reuse_study(std::span<const int> source_sizes, int eval_n, std::uint64_t eval_seed,
                       const ProblemSpec& spec, const PrimalDualOptions& opts);

/// Primal-only solve for fixed coefficients from the seeded warm start.
PrimalUpdateResult resolve_primal(const DualCoefficients& a, std::span<const Eigen::VectorXd> z0,
                                  const ProblemSpec& spec, const PrimalDualOptions& opts);

/// |A - B|_F / |B|_F over stacked trajectories.
double relative_difference(const Rollout& a, const Rollout& reference);
double relative_difference(const Eigen::MatrixXd& a, const Eigen::MatrixXd& reference);

struct RaceEntry {
  std::string solver;
  bool reached = false;
  double time_to_threshold_s = 0.0;  // fastest run
  SolveHistory history;              // of the fastest run
};

struct RaceReport {
  std::vector<RaceEntry> entries;  // primal_dual, coupled, optionally coupled_exact
  double threshold = 0.5;
  bool primal_dual_not_slower() const;
};

/// Runs each solver `runs` times from the same seed until the J_r gradient
/// norm reaches `threshold` and keeps the fastest run.
RaceReport solver_race(const ProblemSpec& spec, std::span<const Eigen::VectorXd> z0,
                       const PrimalDualOptions& pd, const CoupledOptions& coupled,
                       int runs = 3, double threshold = 0.5, bool include_exact = false);

void write_bench_csv(const InteractionBench& bench, const std::filesystem::path& path,
                     const std::string& config_hash = {});
void write_reuse_csv(const ReuseStudy& study, const std::filesystem::path& path,
                     const std::string& config_hash = {});
void write_race_csv(const RaceReport& race, const std::filesystem::path& path,
                    const std::string& config_hash = {});

}  // namespace mfc
