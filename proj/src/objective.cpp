#include <cmath>
#include <stdexcept>

#include "mfc/errors.hpp"
#include "mfc/parallel.hpp"
#include "mfc/problem.hpp"

namespace mfc {

void ProblemSpec::validate() const {
  const int d = model.state_dim();
  if (agents < 1) throw ConfigError("agent count must be >= 1");
  if (grid.nodes < 2 || !(grid.horizon > 0.0)) throw ConfigError("invalid time grid");
  costs.validate(d);
  map.kernel().validate();
  if (init.mean.size() != d)
    throw ConfigError("initial mean must have the state dimension");
  if (init.variance < 0.0) throw ConfigError("initial variance must be >= 0");
  if (init.noisy_dims < -1 || init.noisy_dims > d)
    throw ConfigError("init.noisy_dims out of range");
}

DualCoefficients DualCoefficients::zeros(const ProblemSpec& spec) {
  return {Eigen::MatrixXd::Zero(spec.map.rank(), spec.grid.nodes),
          spec.grid.fingerprint(), spec.map.fingerprint()};
}

void DualCoefficients::check_compatible(const ProblemSpec& spec) const {
  if (values.cols() != spec.grid.nodes || grid_fingerprint != spec.grid.fingerprint())
    throw IncompatibleArtifact("grid", grid_fingerprint + " vs " + spec.grid.fingerprint());
  if (values.rows() != spec.map.rank() || map_fingerprint != spec.map.fingerprint())
    throw IncompatibleArtifact("feature_map",
                               map_fingerprint + " vs " + spec.map.fingerprint());
}

ControlSchedule ControlSchedule::zeros(const ProblemSpec& spec, int count) {
  ControlSchedule s;
  s.agents.assign(count, AgentControls::Zero(spec.model.control_dim(), spec.grid.nodes));
  return s;
}

double ControlSchedule::squared_norm() const {
  double s = 0.0;
  for (const auto& a : agents) s += a.squaredNorm();
  return s;
}

namespace {

void check_shapes(const ControlSchedule& theta, std::span<const Eigen::VectorXd> z0,
                  const ProblemSpec& spec) {
  if (theta.size() != z0.size() || theta.size() == 0)
    throw std::invalid_argument("agent count mismatch between controls and initial states");
  for (const auto& t : theta.agents)
    if (t.rows() != spec.model.control_dim() || t.cols() != spec.grid.nodes)
      throw std::invalid_argument("control schedule shape mismatch");
}

void check_dual(const DualCoefficients& a, const ProblemSpec& spec) {
  if (a.values.rows() != spec.map.rank() || a.values.cols() != spec.grid.nodes)
    throw std::invalid_argument("dual coefficient shape mismatch");
}

TerminalCostFn scaled_terminal(const ProblemSpec& spec, double weight) {
  const int d = spec.model.state_dim();
  return [&spec, d, weight](const double* z, double* gz) {
    const double v = terminal_cost(z, d, spec.costs, gz);
    for (int i = 0; i < d; ++i) gz[i] *= weight;
    return weight * v;
  };
}

// Running cost weight * (L + coeff_k^T zeta(z)) where coeff is r x n.
RunningCostFn feature_running(const ProblemSpec& spec, const Eigen::MatrixXd& coeff,
                              double weight) {
  const int d = spec.model.state_dim(), q = spec.model.control_dim();
  const int r = spec.map.rank();
  return [&spec, &coeff, d, q, r, weight](int k, const double* z, const double* u,
                                          double* gz, double* gu) {
    double v = running_cost(z, u, d, q, spec.costs, gz, gu);
    thread_local std::vector<double> feat;
    feat.resize(r);
    const Vec3 g = spec.map.vjp(spatial(z), std::span<const double>(coeff.col(k).data(), r),
                                feat);
    double dot = 0.0;
    for (int i = 0; i < r; ++i) dot += coeff(i, k) * feat[i];
    v += dot;
    gz[0] += g[0];
    gz[1] += g[1];
    gz[2] += g[2];
    if (weight != 1.0) {
      for (int i = 0; i < d; ++i) gz[i] *= weight;
      for (int i = 0; i < q; ++i) gu[i] *= weight;
    }
    return weight * v;
  };
}

}  // namespace

AgentObjective agent_cost(const DualCoefficients& a, const AgentControls& theta,
                          const Eigen::VectorXd& z0, const ProblemSpec& spec, int agent) {
  check_dual(a, spec);
  return rollout_gradient(spec.model, z0, theta, spec.grid,
                          feature_running(spec, a.values, 1.0),
                          scaled_terminal(spec, 1.0), agent);
}

double dual_quadratic(const DualCoefficients& a, const ProblemSpec& spec) {
  check_dual(a, spec);
  double s = 0.0;
  for (int k = 0; k < spec.grid.nodes; ++k) {
    const Eigen::VectorXd ak = a.values.col(k);
    s += ak.dot(spec.map.solve_kr(ak));
  }
  return 0.5 * spec.grid.step() * s;
}

double per_agent_objective(const DualCoefficients& a, const AgentControls& theta,
                           const Eigen::VectorXd& z0, const ProblemSpec& spec) {
  return dual_quadratic(a, spec) - agent_cost(a, theta, z0, spec).value;
}

double full_lagrangian(const DualCoefficients& a, const ControlSchedule& theta,
                       std::span<const Eigen::VectorXd> z0, const ProblemSpec& spec,
                       int workers) {
  check_shapes(theta, z0, spec);
  std::vector<double> phi(theta.size());
  parallel_for(theta.size(), workers, [&](std::size_t l) {
    phi[l] = agent_cost(a, theta.agents[l], z0[l], spec, static_cast<int>(l)).value;
  });
  const double quad = dual_quadratic(a, spec);
  double total = 0.0;
  for (const double p : phi) total += quad - p;
  return total / static_cast<double>(theta.size());
}

Eigen::MatrixXd node_mean_features(const Rollout& rollout, const FeatureMap& map) {
  if (rollout.states.empty()) throw std::invalid_argument("empty rollout");
  const int r = map.rank();
  const Eigen::Index n = rollout.states.front().cols();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(r, n);
  Eigen::VectorXd f(r);
  for (const auto& z : rollout.states) {
    for (Eigen::Index k = 0; k < n; ++k) {
      map.evaluate(spatial(z.col(k).data()), std::span<double>(f.data(), r));
      c.col(k) += f;
    }
  }
  return c / static_cast<double>(rollout.states.size());
}

namespace {

struct ForwardPass {
  Rollout rollout;
  double local_value = 0.0;        // (1/N) sum_l [h sum_k L + G]
  double interaction_value = 0.0;  // h sum_k interaction_k
  Eigen::MatrixXd node_means;      // features model only
};

ForwardPass forward_pass(const ControlSchedule& theta, std::span<const Eigen::VectorXd> z0,
                         const ProblemSpec& spec, InteractionModel model, int workers) {
  check_shapes(theta, z0, spec);
  const std::size_t count = theta.size();
  const int d = spec.model.state_dim(), q = spec.model.control_dim();
  const int n = spec.grid.nodes, r = spec.map.rank();
  const double h = spec.grid.step();
  ForwardPass fp;
  fp.rollout.states.resize(count);
  std::vector<double> local(count);
  std::vector<Eigen::MatrixXd> feats(model == InteractionModel::features ? count : 0);
  parallel_for(count, workers, [&](std::size_t l) {
    const auto& th = theta.agents[l];
    auto& z = fp.rollout.states[l];
    z = euler_rollout(spec.model, z0[l], th, spec.grid, static_cast<int>(l));
    double v = 0.0;
    for (int k = 0; k < n; ++k)
      v += h * running_cost(z.col(k).data(), th.col(k).data(), d, q, spec.costs,
                            nullptr, nullptr);
    v += terminal_cost(z.col(n - 1).data(), d, spec.costs, nullptr);
    local[l] = v;
    if (model == InteractionModel::features) {
      feats[l].resize(r, n);
      for (int k = 0; k < n; ++k)
        spec.map.evaluate(spatial(z.col(k).data()),
                          std::span<double>(feats[l].col(k).data(), r));
    }
  });
  for (const double v : local) fp.local_value += v;
  fp.local_value /= static_cast<double>(count);

  if (model == InteractionModel::features) {
    fp.node_means = Eigen::MatrixXd::Zero(r, n);
    for (const auto& f : feats) fp.node_means += f;
    fp.node_means /= static_cast<double>(count);
    for (int k = 0; k < n; ++k) {
      const Eigen::VectorXd ck = fp.node_means.col(k);
      fp.interaction_value += h * 0.5 * ck.dot(spec.map.apply_kr(ck));
    }
  } else {
    std::vector<Vec3> pos(count);
    for (int k = 0; k < n; ++k) {
      for (std::size_t l = 0; l < count; ++l)
        pos[l] = spatial(fp.rollout.states[l].col(k).data());
      fp.interaction_value += h * interaction_direct(pos, spec.kernel());
    }
  }
  return fp;
}

}  // namespace

double objective_jr(const ControlSchedule& theta, std::span<const Eigen::VectorXd> z0,
                    const ProblemSpec& spec, InteractionModel model, int workers) {
  const ForwardPass fp = forward_pass(theta, z0, spec, model, workers);
  return fp.local_value + fp.interaction_value;
}

JrEvaluation objective_jr_gradient(const ControlSchedule& theta,
                                   std::span<const Eigen::VectorXd> z0,
                                   const ProblemSpec& spec, InteractionModel model,
                                   int workers) {
  const ForwardPass fp = forward_pass(theta, z0, spec, model, workers);
  const std::size_t count = theta.size();
  const double inv_n = 1.0 / static_cast<double>(count);
  const int d = spec.model.state_dim(), q = spec.model.control_dim();
  const int n = spec.grid.nodes;

  JrEvaluation out;
  out.value = fp.local_value + fp.interaction_value;
  out.gradient.agents.resize(count);

  if (model == InteractionModel::features) {
    out.node_means = fp.node_means;
    // d/dz_l of h 1/2 c^T Kr c is (h/N) J(z_l)^T Kr c: the per-agent problem
    // with a = Kr c, scaled by 1/N.
    Eigen::MatrixXd kc(fp.node_means.rows(), n);
    for (int k = 0; k < n; ++k) kc.col(k) = spec.map.apply_kr(fp.node_means.col(k));
    const RunningCostFn running = feature_running(spec, kc, inv_n);
    const TerminalCostFn terminal = scaled_terminal(spec, inv_n);
    parallel_for(count, workers, [&](std::size_t l) {
      out.gradient.agents[l] = rollout_gradient(spec.model, z0[l], theta.agents[l],
                                                spec.grid, running, terminal,
                                                static_cast<int>(l))
                                   .gradient;
    });
    return out;
  }

  // Exact kernel: force_l(k) = (1/N) sum_m grad_1 K(x_l, x_m).
  const KernelSpec& ks = spec.kernel();
  const double inv_bw2 = 1.0 / (ks.bandwidth * ks.bandwidth);
  std::vector<Eigen::Matrix3Xd> force(count, Eigen::Matrix3Xd::Zero(3, n));
  parallel_for(count, workers, [&](std::size_t l) {
    for (int k = 0; k < n; ++k) {
      const Vec3 xl = spatial(fp.rollout.states[l].col(k).data());
      Vec3 g = Vec3::Zero();
      for (std::size_t m = 0; m < count; ++m) {
        const Vec3 diff = xl - spatial(fp.rollout.states[m].col(k).data());
        g -= diff * (ks.alpha1 * std::exp(-0.5 * diff.squaredNorm() * inv_bw2) * inv_bw2);
      }
      force[l].col(k) = g * inv_n;
    }
  });
  const TerminalCostFn terminal = scaled_terminal(spec, inv_n);
  parallel_for(count, workers, [&](std::size_t l) {
    const RunningCostFn running = [&, l](int k, const double* z, const double* u,
                                         double* gz, double* gu) {
      const double v = running_cost(z, u, d, q, spec.costs, gz, gu);
      for (int i = 0; i < 3; ++i) gz[i] += force[l](i, k);
      for (int i = 0; i < d; ++i) gz[i] *= inv_n;
      for (int i = 0; i < q; ++i) gu[i] *= inv_n;
      return v * inv_n;
    };
    out.gradient.agents[l] = rollout_gradient(spec.model, z0[l], theta.agents[l],
                                              spec.grid, running, terminal,
                                              static_cast<int>(l))
                                 .gradient;
  });
  return out;
}

double dual_residual_max(const DualCoefficients& a, const Eigen::MatrixXd& node_means,
                         const FeatureMap& map) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < node_means.cols(); ++k) {
    const Eigen::VectorXd target = map.apply_kr(node_means.col(k));
    worst = std::max(worst, (a.values.col(k) - target).norm());
  }
  return worst;
}

double primal_grad_norm(const DualCoefficients& a, const ControlSchedule& theta,
                        std::span<const Eigen::VectorXd> z0, const ProblemSpec& spec,
                        int workers) {
  check_shapes(theta, z0, spec);
  std::vector<double> sq(theta.size());
  parallel_for(theta.size(), workers, [&](std::size_t l) {
    sq[l] = agent_cost(a, theta.agents[l], z0[l], spec, static_cast<int>(l))
                .gradient.squaredNorm();
  });
  double total = 0.0;
  for (const double s : sq) total += s;
  return std::sqrt(total) / static_cast<double>(theta.size());
}

StoppingStatus stopping_check(const ControlSchedule& theta, const DualCoefficients& a,
                              std::span<const Eigen::VectorXd> z0,
                              const ProblemSpec& spec, double eps, int workers) {
  StoppingStatus s;
  s.primal_grad_norm = primal_grad_norm(a, theta, z0, spec, workers);
  const Rollout rollout = euler_rollout(spec.model, z0, theta.agents, spec.grid);
  s.dual_residual_max = dual_residual_max(a, node_mean_features(rollout, spec.map), spec.map);
  const JrEvaluation jr = objective_jr_gradient(theta, z0, spec,
                                                InteractionModel::features, workers);
  s.jr_grad_norm = std::sqrt(jr.gradient.squared_norm());
  s.jr_value = jr.value;
  s.primal_ok = s.primal_grad_norm <= eps;
  s.dual_ok = s.dual_residual_max < eps;
  s.mfc_ok = s.jr_grad_norm < eps;
  return s;
}

}  // namespace mfc
