#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>

#include "mfc/optimizer.hpp"
#include "mfc/problem.hpp"

namespace mfc {

struct PrimalDualOptions {
  std::optional<double> gamma;  // unset: h_a = h * gamma = 0.5
  OptimizerOptions inner;
  std::optional<OptimizerOptions> polish;  // second inner stage, run after `inner`
  int max_outer_iters = 50;
  double eps_tol = 0.5;
  std::uint64_t seed = 0;
  int workers = 1;

  double effective_gamma(const TimeGrid& grid) const;
  void validate() const;
};

struct PrimalUpdateResult {
  ControlSchedule theta;
  std::vector<double> grad_sq;  // |grad Phi_l|^2 at the returned controls
  int line_search_fallbacks = 0;

  /// (1/N) sqrt(sum_l |grad Phi_l|^2)
  double grad_norm() const;
};

/// One decoupled minimization of Phi_l(.; a) per agent, warm-started at
/// theta_l. Agents run concurrently on `workers` threads.
PrimalUpdateResult primal_update(const DualCoefficients& a, const ControlSchedule& theta,
                                 std::span<const Eigen::VectorXd> z0,
                                 const ProblemSpec& spec, const OptimizerOptions& inner,
                                 const std::optional<OptimizerOptions>& polish = {},
                                 int workers = 1);

/// a' = (I + h_a Kr^-1)^-1 (a + h_a c) at every node, c given as r x n.
DualCoefficients dual_update(const DualCoefficients& a, const Eigen::MatrixXd& node_means,
                             const FeatureMap& map, double h_a);

/// Same, with c computed from the rollout and h_a = h * gamma.
DualCoefficients dual_update(const DualCoefficients& a, const Rollout& rollout,
                             const FeatureMap& map, const TimeGrid& grid, double gamma);

/// theta ~ N(0, 0.01) entrywise, then a ~ N(0, 0.01) entrywise.
std::pair<ControlSchedule, DualCoefficients> random_initialization(const ProblemSpec& spec,
                                                                   int agents,
                                                                   std::uint64_t seed);

/// Return true to stop the solve after this record.
using HistoryObserver = std::function<bool(const HistoryRecord&)>;

struct SolveResult {
  ControlSchedule theta;
  DualCoefficients a;
  SolveHistory history;
  StoppingStatus status;
  bool converged = false;
  bool stopped_by_observer = false;
  int outer_iterations = 0;
};

/// Alternates primal_update and dual_update from a random start. Iteration k
/// records stopping_check(theta^{k+1}, a^{k+1}) and returns that pair once all
/// three tests pass.
SolveResult primal_dual_solve(const ProblemSpec& spec, std::span<const Eigen::VectorXd> z0,
                              const PrimalDualOptions& opts,
                              const HistoryObserver& observer = {});

/// Samples spec.agents initial states from spec.init.
SolveResult primal_dual_solve(const ProblemSpec& spec, const PrimalDualOptions& opts,
                              const HistoryObserver& observer = {});

struct CoupledOptions {
  OptimizerOptions optimizer;
  InteractionModel model = InteractionModel::features;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct CoupledResult {
  ControlSchedule theta;
  SolveHistory history;
  double value = 0.0;
  double grad_norm = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Minimizes J_r jointly over all agents' controls, starting from the same
/// random controls as primal_dual_solve with the same seed.
CoupledResult coupled_solve(const ProblemSpec& spec, std::span<const Eigen::VectorXd> z0,
                            const CoupledOptions& opts);

/// Flattened views used by the joint optimizer.
Eigen::VectorXd flatten(const ControlSchedule& theta);
ControlSchedule unflatten(const Eigen::VectorXd& x, const ProblemSpec& spec, int agents);

}  // namespace mfc
