#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mfc/costs.hpp"
#include "mfc/dynamics.hpp"
#include "mfc/feature_map.hpp"

namespace mfc {

/// Isotropic Gaussian over the first `noisy_dims` state components; the
/// remaining components are fixed at the mean.
struct InitialDistribution {
  Eigen::VectorXd mean;
  double variance = 0.8;
  int noisy_dims = -1;  // -1: all components
  std::uint64_t seed = 0;
};

struct ProblemSpec {
  DynamicsModel model;
  TimeGrid grid;
  CostSpec costs;
  FeatureMap map;
  InitialDistribution init;
  int agents = 1;

  const KernelSpec& kernel() const { return map.kernel(); }
  void validate() const;
};

using InitialStates = std::vector<Eigen::VectorXd>;

/// Interaction coefficients a_{t_k}, one r-vector per grid node (r x n).
struct DualCoefficients {
  Eigen::MatrixXd values;
  std::string grid_fingerprint;
  std::string map_fingerprint;

  static DualCoefficients zeros(const ProblemSpec& spec);
  /// Throws IncompatibleArtifact naming the mismatched field.
  void check_compatible(const ProblemSpec& spec) const;
};

/// Controls for every agent (q x n each).
struct ControlSchedule {
  std::vector<AgentControls> agents;

  static ControlSchedule zeros(const ProblemSpec& spec, int count);
  std::size_t size() const { return agents.size(); }
  double squared_norm() const;
};

struct HistoryRecord {
  int iter = 0;
  double primal_grad_norm = 0.0;
  double dual_residual_max = 0.0;
  double jr_grad_norm = 0.0;
  double jr_value = 0.0;
  double wall_clock_s = 0.0;
};

using SolveHistory = std::vector<HistoryRecord>;

enum class InteractionModel { features, exact_kernel };

/// Minimization form of one agent's decoupled problem:
///   Phi(theta; a) = h sum_k [L(t_k, z_k, theta_k) + a_k^T zeta(z_k)] + G(z_T)
/// with its exact control gradient.
AgentObjective agent_cost(const DualCoefficients& a, const AgentControls& theta,
                          const Eigen::VectorXd& z0, const ProblemSpec& spec,
                          int agent = 0);

/// (h/2) sum_k a_k^T Kr^{-1} a_k.
double dual_quadratic(const DualCoefficients& a, const ProblemSpec& spec);

/// L_l(a, theta_l) = (h/2) sum a^T Kr^-1 a - h sum L - h sum a^T zeta - G.
double per_agent_objective(const DualCoefficients& a, const AgentControls& theta,
                           const Eigen::VectorXd& z0, const ProblemSpec& spec);

/// (1/N) sum_l L_l(a, theta_l).
double full_lagrangian(const DualCoefficients& a, const ControlSchedule& theta,
                       std::span<const Eigen::VectorXd> z0,
                       const ProblemSpec& spec, int workers = 1);

/// Node means c_k = (1/N) sum_l zeta(z_l(t_k)), r x n.
Eigen::MatrixXd node_mean_features(const Rollout& rollout, const FeatureMap& map);

struct JrEvaluation {
  double value = 0.0;
  ControlSchedule gradient;
  Eigen::MatrixXd node_means;  // c_k, features model only
};

/// J_r(theta) = h sum_k (1/N) sum_l L + h sum_k 1/2 c_k^T Kr c_k + (1/N) sum_l G.
double objective_jr(const ControlSchedule& theta, std::span<const Eigen::VectorXd> z0,
                    const ProblemSpec& spec,
                    InteractionModel model = InteractionModel::features,
                    int workers = 1);

JrEvaluation objective_jr_gradient(const ControlSchedule& theta,
                                   std::span<const Eigen::VectorXd> z0,
                                   const ProblemSpec& spec,
                                   InteractionModel model = InteractionModel::features,
                                   int workers = 1);

struct StoppingStatus {
  double primal_grad_norm = 0.0;
  double dual_residual_max = 0.0;
  double jr_grad_norm = 0.0;
  double jr_value = 0.0;
  bool primal_ok = false;
  bool dual_ok = false;
  bool mfc_ok = false;
  bool all() const { return primal_ok && dual_ok && mfc_ok; }
};

/// max_k |a_k - Kr c_k|.
double dual_residual_max(const DualCoefficients& a, const Eigen::MatrixXd& node_means,
                         const FeatureMap& map);

/// |grad_theta L(a, theta)| stacked over agents and nodes.
double primal_grad_norm(const DualCoefficients& a, const ControlSchedule& theta,
                        std::span<const Eigen::VectorXd> z0,
                        const ProblemSpec& spec, int workers = 1);

/// The three stopping tests at tolerance eps: primal gradient <= eps, dual
/// residual < eps at every node, J_r gradient < eps.
StoppingStatus stopping_check(const ControlSchedule& theta, const DualCoefficients& a,
                              std::span<const Eigen::VectorXd> z0,
                              const ProblemSpec& spec, double eps, int workers = 1);

}  // namespace mfc
