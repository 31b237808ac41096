#include "mfc/costs.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mfc/errors.hpp"
#include "mfc/simd/kernels.hpp"

namespace mfc {

bool ObstacleBox::contains(const Vec3& x) const {
  return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
}

double ObstacleBox::density(const Vec3& x) const {
  const Vec3 d = x - mean;
  const double quad = (d.array().square() / cov_diag.array()).sum();
  const double norm = std::pow(2.0 * std::numbers::pi, -1.5) /
                      std::sqrt(cov_diag.prod());
  return norm * std::exp(-0.5 * quad);
}

ObstacleField ObstacleField::two_boxes() {
  ObstacleField f;
  f.boxes.push_back({Vec3(-2, -0.5, 0), Vec3(2, 0.5, 7), Vec3(0, 0, 2), Vec3(9, 3, 9)});
  f.boxes.push_back({Vec3(2, -1, 0), Vec3(4, 1, 4), Vec3(2.5, 0, 2), Vec3(9, 3, 3)});
  return f;
}

void ObstacleField::validate() const {
  for (const auto& b : boxes) {
    if ((b.lo.array() > b.hi.array()).any())
      throw ConfigError("obstacle box bounds must satisfy lo <= hi");
    if ((b.cov_diag.array() <= 0.0).any())
      throw ConfigError("obstacle covariance entries must be positive");
  }
}

double obstacle_Q(const Vec3& x, const ObstacleField& field) {
  double q = 0.0;
  for (const auto& b : field.boxes)
    if (b.contains(x)) q += b.density(x);
  return q;
}

Vec3 obstacle_Q_gradient(const Vec3& x, const ObstacleField& field) {
  Vec3 g = Vec3::Zero();
  for (const auto& b : field.boxes) {
    if (!b.contains(x)) continue;
    g -= b.density(x) * ((x - b.mean).array() / b.cov_diag.array()).matrix();
  }
  return g;
}

void CostSpec::validate(int state_dim) const {
  if (alpha2 < 0.0 || alpha3 < 0.0)
    throw ConfigError("cost weights must be nonnegative");
  if (target.size() != state_dim)
    throw ConfigError("cost target must have the state dimension");
  obstacles.validate();
}

double running_cost(const double* z, const double* theta, int d, int q,
                    const CostSpec& spec, double* gz, double* gtheta) {
  if (gz)
    for (int i = 0; i < d; ++i) gz[i] = 0.0;
  double value = 0.0;
  for (int i = 0; i < q; ++i) {
    value += theta[i] * theta[i];
    if (gtheta) gtheta[i] = 2.0 * theta[i];
  }
  if (spec.alpha2 != 0.0 && !spec.obstacles.boxes.empty()) {
    const Vec3 x = spatial(z);
    value += spec.alpha2 * obstacle_Q(x, spec.obstacles);
    if (gz) {
      const Vec3 g = spec.alpha2 * obstacle_Q_gradient(x, spec.obstacles);
      gz[0] += g[0];
      gz[1] += g[1];
      gz[2] += g[2];
    }
  }
  return value;
}

double running_cost(double /*t*/, const Eigen::VectorXd& z,
                    const Eigen::VectorXd& theta, const CostSpec& spec) {
  return running_cost(z.data(), theta.data(), static_cast<int>(z.size()),
                      static_cast<int>(theta.size()), spec, nullptr, nullptr);
}

double terminal_cost(const double* z, int d, const CostSpec& spec, double* gz) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    const double e = z[i] - spec.target[i];
    s += e * e;
    if (gz) gz[i] = spec.alpha3 * e;
  }
  return 0.5 * spec.alpha3 * s;
}

double terminal_cost(const Eigen::VectorXd& zT, const CostSpec& spec) {
  if (zT.size() != spec.target.size())
    throw std::invalid_argument("terminal_cost: dimension mismatch");
  return terminal_cost(zT.data(), static_cast<int>(zT.size()), spec, nullptr);
}

double interaction_direct(Positions positions, const KernelSpec& kernel) {
  const std::size_t n = positions.size();
  if (n == 0) throw std::invalid_argument("interaction needs at least one agent");
  std::vector<double> soa(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!positions[i].allFinite()) throw std::domain_error("non-finite position");
    soa[i] = positions[i][0];
    soa[n + i] = positions[i][1];
    soa[2 * n + i] = positions[i][2];
  }
  const double scale = 1.0 / (2.0 * kernel.bandwidth * kernel.bandwidth);
  const double sum = simd::kernels().gaussian_pair_sum(
      soa.data(), soa.data() + n, soa.data() + 2 * n, n, scale);
  const double nn = static_cast<double>(n);
  return kernel.alpha1 * sum / (2.0 * nn * nn);
}

double interaction_direct(Positions positions, const FeatureMap& map) {
  const std::size_t n = positions.size();
  if (n == 0) throw std::invalid_argument("interaction needs at least one agent");
  const std::size_t r = static_cast<std::size_t>(map.rank());
  std::vector<double> f(n * r), g(n * r);
  for (std::size_t i = 0; i < n; ++i)
    map.evaluate(positions[i], std::span<double>(f.data() + i * r, r));
  if (map.kr_is_identity()) {
    g = f;
  } else {
    const Eigen::MatrixXd kr = map.kr();
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::Map<const Eigen::VectorXd> fi(f.data() + i * r, r);
      Eigen::Map<Eigen::VectorXd>(g.data() + i * r, r) = kr * fi;
    }
  }
  const double nn = static_cast<double>(n);
  return simd::kernels().gram_sum(f.data(), g.data(), n, r) / (2.0 * nn * nn);
}

double interaction_direct(Positions positions,
                          const std::function<double(const Vec3&, const Vec3&)>& kernel) {
  const std::size_t n = positions.size();
  if (n == 0) throw std::invalid_argument("interaction needs at least one agent");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) total += kernel(positions[i], positions[j]);
  const double nn = static_cast<double>(n);
  return total / (2.0 * nn * nn);
}

Eigen::VectorXd mean_features(Positions positions, const FeatureMap& map) {
  if (positions.empty())
    throw std::invalid_argument("mean_features needs at least one agent");
  const int r = map.rank();
  Eigen::VectorXd c = Eigen::VectorXd::Zero(r);
  Eigen::VectorXd f(r);
  for (const auto& x : positions) {
    map.evaluate(x, std::span<double>(f.data(), r));
    c += f;
  }
  return c / static_cast<double>(positions.size());
}

double interaction_features(Positions positions, const FeatureMap& map) {
  const Eigen::VectorXd c = mean_features(positions, map);
  return 0.5 * c.dot(map.apply_kr(c));
}

}  // namespace mfc
