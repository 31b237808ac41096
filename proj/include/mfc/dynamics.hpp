#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mfc {

enum class DynamicsKind { double_integrator, quadrotor };

std::string_view to_string(DynamicsKind kind);
DynamicsKind dynamics_kind_from_string(std::string_view name);

struct QuadrotorParams {
  double mass = 1.0;      // kg
  double gravity = 9.81;  // m/s^2
  bool operator==(const QuadrotorParams&) const = default;
};

/// Agent dynamics f(t, z, theta).
///
/// double_integrator: z = (x, y, z, vx, vy, vz), theta = accelerations.
/// quadrotor: z = (x, y, z, psi, theta, phi, vx, vy, vz, vpsi, vtheta, vphi),
///            theta = (u, tau_psi, tau_theta, tau_phi).
/// The first three state components are always the spatial position.
class DynamicsModel {
 public:
  static DynamicsModel double_integrator();
  static DynamicsModel quadrotor(QuadrotorParams params = {});

  DynamicsKind kind() const { return kind_; }
  int state_dim() const { return kind_ == DynamicsKind::double_integrator ? 6 : 12; }
  int control_dim() const { return kind_ == DynamicsKind::double_integrator ? 3 : 4; }
  const QuadrotorParams& params() const { return params_; }

  void rhs(double t, const double* z, const double* u, double* out) const;
  Eigen::VectorXd rhs(double t, const Eigen::VectorXd& z, const Eigen::VectorXd& u) const;

  /// gz = (df/dz)^T lambda, gu = (df/du)^T lambda (both overwritten).
  void vjp(double t, const double* z, const double* u, const double* lambda,
           double* gz, double* gu) const;

  Eigen::MatrixXd jacobian_state(double t, const Eigen::VectorXd& z,
                                 const Eigen::VectorXd& u) const;
  Eigen::MatrixXd jacobian_control(double t, const Eigen::VectorXd& z,
                                   const Eigen::VectorXd& u) const;

  /// Column names for exported trajectories.
  std::vector<std::string> state_names() const;

  bool operator==(const DynamicsModel&) const = default;

 private:
  DynamicsKind kind_ = DynamicsKind::double_integrator;
  QuadrotorParams params_;
};

Eigen::VectorXd double_integrator_rhs(double t, const Eigen::VectorXd& z,
                                      const Eigen::VectorXd& theta);
Eigen::VectorXd quadrotor_rhs(double t, const Eigen::VectorXd& z,
                              const Eigen::VectorXd& theta,
                              const QuadrotorParams& params);

/// Uniform grid 0 = t_0 < ... < t_{n-1} = T.
struct TimeGrid {
  double horizon = 5.0;
  int nodes = 50;

  static TimeGrid make(double horizon, int nodes);
  double step() const { return horizon / (nodes - 1); }
  double time(int k) const { return k * step(); }
  std::string fingerprint() const;
  bool operator==(const TimeGrid&) const = default;
};

/// Per-agent trajectory: d x n, column k is the state at node k.
using Trajectory = Eigen::MatrixXd;
/// Per-agent controls: q x n, column k is the control at node k.
using AgentControls = Eigen::MatrixXd;

struct Rollout {
  std::vector<Trajectory> states;
};

/// Explicit Euler: z_{k+1} = z_k + h f(t_k, z_k, theta_k) for k < n-1. The
/// control at the last node does not enter the recursion. Throws
/// RolloutDiverged(agent, step) on a non-finite state.
Trajectory euler_rollout(const DynamicsModel& model, const Eigen::VectorXd& z0,
                         const AgentControls& theta, const TimeGrid& grid,
                         int agent = 0);

Rollout euler_rollout(const DynamicsModel& model,
                      std::span<const Eigen::VectorXd> z0,
                      std::span<const AgentControls> theta,
                      const TimeGrid& grid);

/// Running cost at node k: returns the value and writes d/dz (d entries) and
/// d/dtheta (q entries).
using RunningCostFn =
    std::function<double(int k, const double* z, const double* u, double* gz, double* gu)>;
/// Terminal cost: returns the value and writes d/dz.
using TerminalCostFn = std::function<double(const double* z, double* gz)>;

struct AgentObjective {
  double value = 0.0;
  AgentControls gradient;  // q x n
};

/// Value and exact gradient of h * sum_k l_k(z_k, theta_k) + G(z_{n-1}) with
/// respect to the controls, by a backward (adjoint) sweep through the Euler
/// recursion.
AgentObjective rollout_gradient(const DynamicsModel& model,
                                const Eigen::VectorXd& z0,
                                const AgentControls& theta,
                                const TimeGrid& grid,
                                const RunningCostFn& running,
                                const TerminalCostFn& terminal,
                                int agent = 0);

}  // namespace mfc
