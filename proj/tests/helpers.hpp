#pragma once

#include <random>
#include <vector>

#include "mfc/problem.hpp"

namespace testing {

inline mfc::ProblemSpec make_spec(mfc::DynamicsKind kind, int agents, int nodes,
                                  double alpha1 = 5.0, double alpha2 = 0.0,
                                  double alpha3 = 10.0, int rank = 12) {
  using namespace mfc;
  const auto model = kind == DynamicsKind::double_integrator ? DynamicsModel::double_integrator()
                                                             : DynamicsModel::quadrotor();
  CostSpec costs;
  costs.alpha2 = alpha2;
  costs.alpha3 = alpha3;
  costs.target = Eigen::VectorXd::Zero(model.state_dim());
  costs.target[2] = 2.0;
  if (alpha2 > 0) costs.obstacles = ObstacleField::two_boxes();
  InitialDistribution init;
  init.mean = Eigen::VectorXd::Zero(model.state_dim());
  init.mean[1] = -0.5;
  init.variance = 0.8;
  init.noisy_dims = 3;
  init.seed = 7;
  return ProblemSpec{model,
                     TimeGrid::make(0.2 * (nodes - 1), nodes),
                     costs,
                     rff_features(KernelSpec{alpha1, 1.0, 3}, rank, 3),
                     init,
                     agents};
}

inline std::vector<Eigen::VectorXd> random_states(const mfc::ProblemSpec& spec, int count,
                                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.5);
  std::vector<Eigen::VectorXd> z0;
  for (int l = 0; l < count; ++l) {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(spec.model.state_dim());
    for (int i = 0; i < z.size(); ++i) z[i] = g(rng);
    z0.push_back(z);
  }
  return z0;
}

inline mfc::ControlSchedule random_controls(const mfc::ProblemSpec& spec, int count,
                                            std::uint64_t seed, double scale = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  mfc::ControlSchedule s = mfc::ControlSchedule::zeros(spec, count);
  const bool quad = spec.model.kind() == mfc::DynamicsKind::quadrotor;
  for (auto& a : s.agents)
    for (int k = 0; k < a.cols(); ++k)
      for (int j = 0; j < a.rows(); ++j)
        a(j, k) = g(rng) + (quad && j == 0 ? spec.model.params().mass * spec.model.params().gravity : 0.0);
  return s;
}

inline mfc::DualCoefficients random_dual(const mfc::ProblemSpec& spec, std::uint64_t seed,
                                         double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  auto a = mfc::DualCoefficients::zeros(spec);
  for (Eigen::Index i = 0; i < a.values.size(); ++i) a.values.data()[i] = g(rng);
  return a;
}

}  // namespace testing
