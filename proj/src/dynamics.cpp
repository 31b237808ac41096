#include "mfc/dynamics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "mfc/errors.hpp"
#include "mfc/hash.hpp"

namespace mfc {

std::string_view to_string(DynamicsKind kind) {
  return kind == DynamicsKind::double_integrator ? "double_integrator" : "quadrotor";
}

DynamicsKind dynamics_kind_from_string(std::string_view name) {
  if (name == "double_integrator") return DynamicsKind::double_integrator;
  if (name == "quadrotor") return DynamicsKind::quadrotor;
  throw ConfigError("unknown dynamics: " + std::string(name));
}

DynamicsModel DynamicsModel::double_integrator() { return DynamicsModel{}; }

DynamicsModel DynamicsModel::quadrotor(QuadrotorParams params) {
  if (!(params.mass > 0.0) || !(params.gravity > 0.0))
    throw ConfigError("quadrotor mass and gravity must be positive");
  DynamicsModel m;
  m.kind_ = DynamicsKind::quadrotor;
  m.params_ = params;
  return m;
}

void DynamicsModel::rhs(double /*t*/, const double* z, const double* u,
                        double* out) const {
  if (kind_ == DynamicsKind::double_integrator) {
    for (int i = 0; i < 3; ++i) {
      out[i] = z[3 + i];
      out[3 + i] = u[i];
    }
    return;
  }
  const double spsi = std::sin(z[3]), cpsi = std::cos(z[3]);
  const double sth = std::sin(z[4]), cth = std::cos(z[4]);
  const double sphi = std::sin(z[5]), cphi = std::cos(z[5]);
  const double thrust = u[0] / params_.mass;
  for (int i = 0; i < 6; ++i) out[i] = z[6 + i];
  out[6] = thrust * (sphi * spsi + cphi * cpsi * sth);
  out[7] = thrust * (-cpsi * sphi + cphi * sth * spsi);
  out[8] = thrust * cth * cphi - params_.gravity;
  out[9] = u[1];
  out[10] = u[2];
  out[11] = u[3];
}

Eigen::VectorXd DynamicsModel::rhs(double t, const Eigen::VectorXd& z,
                                   const Eigen::VectorXd& u) const {
  if (z.size() != state_dim() || u.size() != control_dim())
    throw std::invalid_argument("dynamics: state/control dimension mismatch");
  Eigen::VectorXd out(state_dim());
  rhs(t, z.data(), u.data(), out.data());
  return out;
}

void DynamicsModel::vjp(double /*t*/, const double* z, const double* u,
                        const double* lam, double* gz, double* gu) const {
  if (kind_ == DynamicsKind::double_integrator) {
    for (int i = 0; i < 3; ++i) {
      gz[i] = 0.0;
      gz[3 + i] = lam[i];
      gu[i] = lam[3 + i];
    }
    return;
  }
  const double spsi = std::sin(z[3]), cpsi = std::cos(z[3]);
  const double sth = std::sin(z[4]), cth = std::cos(z[4]);
  const double sphi = std::sin(z[5]), cphi = std::cos(z[5]);
  const double inv_m = 1.0 / params_.mass;
  const double thrust = u[0] * inv_m;

  const double a = sphi * spsi + cphi * cpsi * sth;
  const double a_psi = sphi * cpsi - cphi * spsi * sth;
  const double a_th = cphi * cpsi * cth;
  const double a_phi = cphi * spsi - sphi * cpsi * sth;

  const double b = -cpsi * sphi + cphi * sth * spsi;
  const double b_psi = spsi * sphi + cphi * sth * cpsi;
  const double b_th = cphi * cth * spsi;
  const double b_phi = -cpsi * cphi - sphi * sth * spsi;

  const double c = cth * cphi;
  const double c_th = -sth * cphi;
  const double c_phi = -cth * sphi;

  gz[0] = gz[1] = gz[2] = 0.0;
  gz[3] = thrust * (lam[6] * a_psi + lam[7] * b_psi);
  gz[4] = thrust * (lam[6] * a_th + lam[7] * b_th + lam[8] * c_th);
  gz[5] = thrust * (lam[6] * a_phi + lam[7] * b_phi + lam[8] * c_phi);
  for (int i = 0; i < 6; ++i) gz[6 + i] = lam[i];
  gu[0] = inv_m * (lam[6] * a + lam[7] * b + lam[8] * c);
  gu[1] = lam[9];
  gu[2] = lam[10];
  gu[3] = lam[11];
}

Eigen::MatrixXd DynamicsModel::jacobian_state(double t, const Eigen::VectorXd& z,
                                              const Eigen::VectorXd& u) const {
  const int d = state_dim(), q = control_dim();
  Eigen::MatrixXd jac(d, d);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(d), gz(d), gu(q);
  for (int i = 0; i < d; ++i) {
    e.setZero();
    e[i] = 1.0;
    vjp(t, z.data(), u.data(), e.data(), gz.data(), gu.data());
    jac.row(i) = gz.transpose();
  }
  return jac;
}

Eigen::MatrixXd DynamicsModel::jacobian_control(double t, const Eigen::VectorXd& z,
                                                const Eigen::VectorXd& u) const {
  const int d = state_dim(), q = control_dim();
  Eigen::MatrixXd jac(d, q);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(d), gz(d), gu(q);
  for (int i = 0; i < d; ++i) {
    e.setZero();
    e[i] = 1.0;
    vjp(t, z.data(), u.data(), e.data(), gz.data(), gu.data());
    jac.row(i) = gu.transpose();
  }
  return jac;
}

std::vector<std::string> DynamicsModel::state_names() const {
  if (kind_ == DynamicsKind::double_integrator)
    return {"x", "y", "z", "vx", "vy", "vz"};
  return {"x",  "y",  "z",  "psi",  "theta",  "phi",
          "vx", "vy", "vz", "vpsi", "vtheta", "vphi"};
}

Eigen::VectorXd double_integrator_rhs(double t, const Eigen::VectorXd& z,
                                      const Eigen::VectorXd& theta) {
  return DynamicsModel::double_integrator().rhs(t, z, theta);
}

Eigen::VectorXd quadrotor_rhs(double t, const Eigen::VectorXd& z,
                              const Eigen::VectorXd& theta,
                              const QuadrotorParams& params) {
  return DynamicsModel::quadrotor(params).rhs(t, z, theta);
}

TimeGrid TimeGrid::make(double horizon, int nodes) {
  if (nodes < 2) throw ConfigError("time grid needs at least 2 nodes");
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw ConfigError("time horizon must be positive");
  return TimeGrid{horizon, nodes};
}

std::string TimeGrid::fingerprint() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "T=%.17g;n=%d", horizon, nodes);
  return hex64(fnv1a64(buf));
}

Trajectory euler_rollout(const DynamicsModel& model, const Eigen::VectorXd& z0,
                         const AgentControls& theta, const TimeGrid& grid,
                         int agent) {
  const int d = model.state_dim();
  const int n = grid.nodes;
  if (z0.size() != d || theta.rows() != model.control_dim() || theta.cols() != n)
    throw std::invalid_argument("euler_rollout: shape mismatch");
  const double h = grid.step();
  Trajectory z(d, n);
  z.col(0) = z0;
  Eigen::VectorXd f(d);
  for (int k = 0; k + 1 < n; ++k) {
    model.rhs(grid.time(k), z.col(k).data(), theta.col(k).data(), f.data());
    z.col(k + 1) = z.col(k) + h * f;
    if (!z.col(k + 1).allFinite()) throw RolloutDiverged(agent, k + 1);
  }
  return z;
}

Rollout euler_rollout(const DynamicsModel& model,
                      std::span<const Eigen::VectorXd> z0,
                      std::span<const AgentControls> theta,
                      const TimeGrid& grid) {
  if (z0.size() != theta.size())
    throw std::invalid_argument("euler_rollout: agent count mismatch");
  Rollout out;
  out.states.reserve(z0.size());
  for (std::size_t l = 0; l < z0.size(); ++l)
    out.states.push_back(
        euler_rollout(model, z0[l], theta[l], grid, static_cast<int>(l)));
  return out;
}

AgentObjective rollout_gradient(const DynamicsModel& model,
                                const Eigen::VectorXd& z0,
                                const AgentControls& theta,
                                const TimeGrid& grid,
                                const RunningCostFn& running,
                                const TerminalCostFn& terminal, int agent) {
  const int d = model.state_dim(), q = model.control_dim(), n = grid.nodes;
  const double h = grid.step();
  const Trajectory z = euler_rollout(model, z0, theta, grid, agent);

  AgentObjective out;
  out.gradient.resize(q, n);
  Eigen::VectorXd lam(d), gz(d), gu(q), fz(d), fu(q);

  // Last node: terminal cost plus the running cost, no dynamics.
  out.value = terminal(z.col(n - 1).data(), lam.data());
  out.value += h * running(n - 1, z.col(n - 1).data(), theta.col(n - 1).data(),
                           gz.data(), gu.data());
  lam += h * gz;
  out.gradient.col(n - 1) = h * gu;

  for (int k = n - 2; k >= 0; --k) {
    out.value += h * running(k, z.col(k).data(), theta.col(k).data(), gz.data(),
                             gu.data());
    model.vjp(grid.time(k), z.col(k).data(), theta.col(k).data(), lam.data(),
              fz.data(), fu.data());
    out.gradient.col(k) = h * (gu + fu);
    lam += h * (fz + gz);
  }
  return out;
}

}  // namespace mfc
