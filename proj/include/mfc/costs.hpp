#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

#include "mfc/feature_map.hpp"

namespace mfc {

/// Axis-aligned box carrying a Gaussian density N(mean, diag(cov_diag)).
struct ObstacleBox {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
  Vec3 mean = Vec3::Zero();
  Vec3 cov_diag = Vec3::Ones();

  bool contains(const Vec3& x) const;
  double density(const Vec3& x) const;
};

struct ObstacleField {
  std::vector<ObstacleBox> boxes;

  /// Two boxes A = [-2,2]x[-0.5,0.5]x[0,7] and B = [2,4]x[-1,1]x[0,4] with
  /// densities N((0,0,2), diag(9,3,9)) and N((2.5,0,2), diag(9,3,3)).
  static ObstacleField two_boxes();
  void validate() const;
};

/// Q(x) = sum over boxes of density(x) * 1[x in box].
double obstacle_Q(const Vec3& x, const ObstacleField& field);
/// Gradient of the in-box densities; zero outside every box.
Vec3 obstacle_Q_gradient(const Vec3& x, const ObstacleField& field);

struct CostSpec {
  double alpha2 = 0.0;  // obstacle weight
  double alpha3 = 0.0;  // terminal weight
  Eigen::VectorXd target;
  ObstacleField obstacles;

  void validate(int state_dim) const;
};

inline Vec3 spatial(const double* z) { return Vec3(z[0], z[1], z[2]); }

/// L = |theta|^2 + alpha2 * Q(position of z).
double running_cost(double t, const Eigen::VectorXd& z,
                    const Eigen::VectorXd& theta, const CostSpec& spec);
/// Same, writing d/dz and d/dtheta.
double running_cost(const double* z, const double* theta, int d, int q,
                    const CostSpec& spec, double* gz, double* gtheta);

/// G = alpha3/2 * |zT - target|^2 over the full state.
double terminal_cost(const Eigen::VectorXd& zT, const CostSpec& spec);
double terminal_cost(const double* z, int d, const CostSpec& spec, double* gz);

using Positions = std::span<const Vec3>;

/// (1 / 2N^2) sum_l sum_m K(x_l, x_m) with the exact Gaussian kernel,
/// diagonal included. O(N^2).
double interaction_direct(Positions positions, const KernelSpec& kernel);

/// Same double sum with the expanded kernel zeta(x)^T Kr zeta(y). O(N^2 r).
double interaction_direct(Positions positions, const FeatureMap& map);

/// Same double sum for an arbitrary kernel callable, sequential index order.
double interaction_direct(Positions positions,
                          const std::function<double(const Vec3&, const Vec3&)>& kernel);

/// c = (1/N) sum_l zeta(x_l).
Eigen::VectorXd mean_features(Positions positions, const FeatureMap& map);

/// 1/2 c^T Kr c with c = mean_features. O(N r + r^2).
double interaction_features(Positions positions, const FeatureMap& map);

}  // namespace mfc
