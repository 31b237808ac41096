#include "mfc/gradcheck.hpp"

#include <algorithm>
#include <random>

namespace mfc {

double GradCheckReport::worst() const {
  double w = 0.0;
  for (const auto& r : results) w = std::max(w, r.rel_error);
  return w;
}

namespace {

ProblemSpec small_spec(DynamicsKind kind, const FeatureMap& map, int nodes, int agents) {
  const bool quad = kind == DynamicsKind::quadrotor;
  const DynamicsModel model = quad ? DynamicsModel::quadrotor() : DynamicsModel::double_integrator();
  CostSpec costs;
  costs.target = Eigen::VectorXd::Zero(model.state_dim());
  costs.target[2] = 7.0;
  costs.alpha2 = quad ? 0.0 : 1e7;
  costs.alpha3 = quad ? 2e3 : 1e4;
  if (!quad) costs.obstacles = ObstacleField::two_boxes();
  InitialDistribution init;
  init.mean = Eigen::VectorXd::Zero(model.state_dim());
  return ProblemSpec{model, TimeGrid::make(1.0 + 0.25 * nodes, nodes), costs, map, init, agents};
}

double rel_error(const Eigen::VectorXd& adj, const Eigen::VectorXd& fd) {
  const double den = std::max(fd.norm(), 1e-12);
  return (adj - fd).norm() / den;
}

}  // namespace

GradCheckReport run_gradient_checks(const FeatureMap& map, int instances, std::uint64_t seed,
                                    double step) {
  GradCheckReport report;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> agents_dist(1, 3), nodes_dist(3, 10);

  for (const DynamicsKind kind : {DynamicsKind::double_integrator, DynamicsKind::quadrotor}) {
    for (int inst = 0; inst < instances; ++inst) {
      const int count = agents_dist(rng), nodes = nodes_dist(rng);
      const ProblemSpec spec = small_spec(kind, map, nodes, count);
      const int d = spec.model.state_dim(), q = spec.model.control_dim();
      InitialStates z0(count, Eigen::VectorXd::Zero(d));
      for (auto& z : z0) {
        for (int i = 0; i < 3; ++i) z[i] = normal(rng) + (i == 2 ? 3.0 : 0.0);
        for (int i = 3; i < d; ++i) z[i] = 0.3 * normal(rng);
      }
      ControlSchedule theta = ControlSchedule::zeros(spec, count);
      for (auto& t : theta.agents)
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = 0.5 * normal(rng);
      if (kind == DynamicsKind::quadrotor)
        for (auto& t : theta.agents) t.row(0).array() += spec.model.params().mass * spec.model.params().gravity;
      DualCoefficients a = DualCoefficients::zeros(spec);
      for (Eigen::Index i = 0; i < a.values.size(); ++i) a.values.data()[i] = normal(rng);

      // Per-agent objective, first agent.
      {
        const AgentObjective obj = agent_cost(a, theta.agents[0], z0[0], spec);
        const Eigen::VectorXd adj =
            -Eigen::Map<const Eigen::VectorXd>(obj.gradient.data(), obj.gradient.size());
        Eigen::VectorXd fd(adj.size());
        for (Eigen::Index i = 0; i < fd.size(); ++i) {
          AgentControls tp = theta.agents[0], tm = theta.agents[0];
          tp.data()[i] += step;
          tm.data()[i] -= step;
          fd[i] = (per_agent_objective(a, tp, z0[0], spec) -
                   per_agent_objective(a, tm, z0[0], spec)) /
                  (2.0 * step);
        }
        report.results.push_back({"per_agent", kind, inst, rel_error(adj, fd)});
      }
      for (const InteractionModel im : {InteractionModel::features, InteractionModel::exact_kernel}) {
        const JrEvaluation ev = objective_jr_gradient(theta, z0, spec, im);
        Eigen::VectorXd adj(count * q * nodes), fd(count * q * nodes);
        Eigen::Index idx = 0;
        for (int l = 0; l < count; ++l) {
          for (Eigen::Index i = 0; i < theta.agents[l].size(); ++i, ++idx) {
            adj[idx] = ev.gradient.agents[l].data()[i];
            ControlSchedule tp = theta, tm = theta;
            tp.agents[l].data()[i] += step;
            tm.agents[l].data()[i] -= step;
            fd[idx] = (objective_jr(tp, z0, spec, im) - objective_jr(tm, z0, spec, im)) /
                      (2.0 * step);
          }
        }
        report.results.push_back({im == InteractionModel::features ? "jr_features" : "jr_exact",
                                  kind, inst, rel_error(adj, fd)});
      }
    }
  }
  return report;
}

}  // namespace mfc
