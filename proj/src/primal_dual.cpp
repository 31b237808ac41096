#include <chrono>
#include <cmath>
#include <random>
#include <string>

#include "mfc/errors.hpp"
#include "mfc/io.hpp"
#include "mfc/parallel.hpp"
#include "mfc/solvers.hpp"

namespace mfc {

double PrimalDualOptions::effective_gamma(const TimeGrid& grid) const {
  return gamma ? *gamma : 0.5 / grid.step();
}

void PrimalDualOptions::validate() const {
  if (gamma && !(*gamma > 0.0)) throw ConfigError("gamma must be > 0");
  if (!(eps_tol > 0.0)) throw ConfigError("eps_tol must be > 0");
  if (max_outer_iters < 0) throw ConfigError("max_outer_iters must be >= 0");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  inner.validate();
  if (polish) polish->validate();
}

double PrimalUpdateResult::grad_norm() const {
  double s = 0.0;
  for (const double g : grad_sq) s += g;
  return grad_sq.empty() ? 0.0 : std::sqrt(s) / static_cast<double>(grad_sq.size());
}

namespace {

Eigen::VectorXd as_vector(const AgentControls& theta) {
  return Eigen::Map<const Eigen::VectorXd>(theta.data(), theta.size());
}

AgentControls as_controls(const Eigen::VectorXd& x, Eigen::Index q, Eigen::Index n) {
  return Eigen::Map<const AgentControls>(x.data(), q, n);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

PrimalUpdateResult primal_update(const DualCoefficients& a, const ControlSchedule& theta,
                                 std::span<const Eigen::VectorXd> z0,
                                 const ProblemSpec& spec, const OptimizerOptions& inner,
                                 const std::optional<OptimizerOptions>& polish,
                                 int workers) {
  if (theta.size() != z0.size())
    throw std::invalid_argument("agent count mismatch between controls and initial states");
  const Eigen::Index q = spec.model.control_dim(), n = spec.grid.nodes;
  const std::size_t count = theta.size();
  PrimalUpdateResult out;
  out.theta.agents.resize(count);
  out.grad_sq.assign(count, 0.0);
  std::vector<int> fallbacks(count, 0);

  parallel_for(count, workers, [&](std::size_t l) {
    const int agent = static_cast<int>(l);
    const ObjectiveFn phi = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
      try {
        AgentObjective obj = agent_cost(a, as_controls(x, q, n), z0[l], spec, agent);
        g = as_vector(obj.gradient);
        return obj.value;
      } catch (const RolloutDiverged&) {
        g.setZero();
        return std::numeric_limits<double>::infinity();
      }
    };
    try {
      MinimizeResult res = minimize(phi, as_vector(theta.agents[l]), inner);
      fallbacks[l] += res.line_search_fallback;
      if (polish) {
        res = minimize(phi, std::move(res.x), *polish);
        fallbacks[l] += res.line_search_fallback;
      }
      out.grad_sq[l] = res.grad_norm * res.grad_norm;
      out.theta.agents[l] = as_controls(res.x, q, n);
    } catch (const SolverError& e) {
      throw SolverError("agent " + std::to_string(l) + ": " + e.what());
    }
  });
  for (const int f : fallbacks) out.line_search_fallbacks += f;
  return out;
}

DualCoefficients dual_update(const DualCoefficients& a, const Eigen::MatrixXd& node_means,
                             const FeatureMap& map, double h_a) {
  if (!(h_a >= 0.0) || !std::isfinite(h_a)) throw ConfigError("h_a must be >= 0");
  if (node_means.rows() != a.values.rows() || node_means.cols() != a.values.cols())
    throw std::invalid_argument("dual_update shape mismatch");
  DualCoefficients next = a;
  const Eigen::MatrixXd rhs = a.values + h_a * node_means;
  if (map.kr_is_identity()) {
    next.values = rhs / (1.0 + h_a);
    return next;
  }
  // (I + h_a Kr^-1)^-1 = (Kr + h_a I)^-1 Kr
  const Eigen::MatrixXd& kr = map.kr();
  const Eigen::LLT<Eigen::MatrixXd> llt(kr + h_a * Eigen::MatrixXd::Identity(kr.rows(), kr.cols()));
  if (llt.info() != Eigen::Success) throw ConfigError("Kr is not positive definite");
  next.values = llt.solve(kr * rhs);
  return next;
}

DualCoefficients dual_update(const DualCoefficients& a, const Rollout& rollout,
                             const FeatureMap& map, const TimeGrid& grid, double gamma) {
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
  return dual_update(a, node_mean_features(rollout, map), map, grid.step() * gamma);
}

std::pair<ControlSchedule, DualCoefficients> random_initialization(const ProblemSpec& spec,
                                                                   int agents,
                                                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.1);
  ControlSchedule theta = ControlSchedule::zeros(spec, agents);
  for (auto& t : theta.agents)
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = normal(rng);
  DualCoefficients a = DualCoefficients::zeros(spec);
  for (Eigen::Index i = 0; i < a.values.size(); ++i) a.values.data()[i] = normal(rng);
  return {std::move(theta), std::move(a)};
}

SolveResult primal_dual_solve(const ProblemSpec& spec, std::span<const Eigen::VectorXd> z0,
                              const PrimalDualOptions& opts, const HistoryObserver& observer) {
  spec.validate();
  opts.validate();
  const auto start = std::chrono::steady_clock::now();
  const int count = static_cast<int>(z0.size());
  const double h_a = spec.grid.step() * opts.effective_gamma(spec.grid);

  SolveResult res;
  std::tie(res.theta, res.a) = random_initialization(spec, count, opts.seed);

  for (int k = 0; k < opts.max_outer_iters; ++k) {
    PrimalUpdateResult pu =
        primal_update(res.a, res.theta, z0, spec, opts.inner, opts.polish, opts.workers);
    res.theta = std::move(pu.theta);
    const JrEvaluation jr = objective_jr_gradient(res.theta, z0, spec,
                                                  InteractionModel::features, opts.workers);
    res.a = dual_update(res.a, jr.node_means, spec.map, h_a);

    StoppingStatus& st = res.status;
    st.primal_grad_norm = primal_grad_norm(res.a, res.theta, z0, spec, opts.workers);
    st.dual_residual_max = dual_residual_max(res.a, jr.node_means, spec.map);
    st.jr_grad_norm = std::sqrt(jr.gradient.squared_norm());
    st.jr_value = jr.value;
    st.primal_ok = st.primal_grad_norm <= opts.eps_tol;
    st.dual_ok = st.dual_residual_max < opts.eps_tol;
    st.mfc_ok = st.jr_grad_norm < opts.eps_tol;
    res.outer_iterations = k + 1;
    res.history.push_back({k + 1, st.primal_grad_norm, st.dual_residual_max,
                           st.jr_grad_norm, st.jr_value, seconds_since(start)});
    if (st.all()) {
      res.converged = true;
      return res;
    }
    if (observer && observer(res.history.back())) {
      res.stopped_by_observer = true;
      return res;
    }
  }
  return res;
}

SolveResult primal_dual_solve(const ProblemSpec& spec, const PrimalDualOptions& opts,
                              const HistoryObserver& observer) {
  const InitialStates z0 = sample_initial_conditions(spec.init, spec.agents, spec.init.seed);
  return primal_dual_solve(spec, z0, opts, observer);
}

Eigen::VectorXd flatten(const ControlSchedule& theta) {
  Eigen::Index total = 0;
  for (const auto& t : theta.agents) total += t.size();
  Eigen::VectorXd x(total);
  Eigen::Index off = 0;
  for (const auto& t : theta.agents) {
    x.segment(off, t.size()) = as_vector(t);
    off += t.size();
  }
  return x;
}

ControlSchedule unflatten(const Eigen::VectorXd& x, const ProblemSpec& spec, int agents) {
  const Eigen::Index q = spec.model.control_dim(), n = spec.grid.nodes;
  if (x.size() != q * n * agents) throw std::invalid_argument("flat control size mismatch");
  ControlSchedule theta;
  theta.agents.reserve(agents);
  for (int l = 0; l < agents; ++l)
    theta.agents.push_back(Eigen::Map<const AgentControls>(x.data() + l * q * n, q, n));
  return theta;
}

CoupledResult coupled_solve(const ProblemSpec& spec, std::span<const Eigen::VectorXd> z0,
                            const CoupledOptions& opts) {
  spec.validate();
  opts.optimizer.validate();
  const auto start = std::chrono::steady_clock::now();
  const int count = static_cast<int>(z0.size());
  CoupledResult res;
  const ControlSchedule theta0 = random_initialization(spec, count, opts.seed).first;

  const ObjectiveFn jr = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    try {
      const JrEvaluation ev =
          objective_jr_gradient(unflatten(x, spec, count), z0, spec, opts.model, opts.workers);
      g = flatten(ev.gradient);
      return ev.value;
    } catch (const RolloutDiverged&) {
      g.setZero();
      return std::numeric_limits<double>::infinity();
    }
  };
  const IterationCallback record = [&](int iter, double value, double grad_norm) {
    res.history.push_back({iter, 0.0, 0.0, grad_norm, value, seconds_since(start)});
    return false;
  };
  {
    Eigen::VectorXd g(count * spec.model.control_dim() * spec.grid.nodes);
    const double v0 = jr(flatten(theta0), g);
    res.history.push_back({0, 0.0, 0.0, g.norm(), v0, seconds_since(start)});
  }
  const MinimizeResult m = minimize(jr, flatten(theta0), opts.optimizer, record);
  res.theta = unflatten(m.x, spec, count);
  res.value = m.value;
  res.grad_norm = m.grad_norm;
  res.converged = m.converged;
  res.iterations = m.iterations;
  return res;
}

}  // namespace mfc
