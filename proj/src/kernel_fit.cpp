#include <cmath>
#include <random>
#include <stdexcept>

#include "mfc/errors.hpp"
#include "mfc/feature_map.hpp"

namespace mfc {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMat>;
using RowMap = Eigen::Map<RowMat>;

struct Adam {
  explicit Adam(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad, double lr) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
      params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }

  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int t = 0;
  std::vector<double> m, v;
};

Eigen::MatrixXd uniform_points(std::mt19937_64& rng, int count, double box) {
  std::uniform_real_distribution<double> u(-box, box);
  Eigen::MatrixXd pts(3, count);
  for (int c = 0; c < count; ++c)
    for (int d = 0; d < 3; ++d) pts(d, c) = u(rng);
  return pts;
}

}  // namespace

void MlpFitConfig::validate() const {
  if (hidden < 1 || rank < 1 || samples < 1 || batch < 1 ||
      validation_pairs < 1 || decay_every < 1)
    throw ConfigError("fit config: widths and counts must be positive");
  if (iterations < 0) throw ConfigError("fit config: iterations must be >= 0");
  if (!(step > 0.0) || !(decay_factor > 0.0) || grad_penalty < 0.0 || !(box > 0.0))
    throw ConfigError("fit config: step, decay and box must be positive");
}

namespace detail {

double mlp_fit_loss(std::span<const double> params, int hidden, int rank,
                    const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                    double grad_penalty, std::span<double> grad) {
  const Eigen::Index h = hidden, r = rank, b = x.cols();
  const double* p = params.data();
  ConstRowMap w1(p, h, 3);
  Eigen::Map<const Eigen::VectorXd> b1(p + 3 * h, h);
  ConstRowMap w2(p + 4 * h, r, h);
  Eigen::Map<const Eigen::VectorXd> b2(p + 4 * h + r * h, r);

  const Eigen::MatrixXd sx = ((w1 * x).colwise() + b1).array().tanh().matrix();
  const Eigen::MatrixXd sy = ((w1 * y).colwise() + b1).array().tanh().matrix();
  const Eigen::MatrixXd fx = (w2 * sx).colwise() + b2;
  const Eigen::MatrixXd fy = (w2 * sy).colwise() + b2;

  const Eigen::MatrixXd diff = x - y;
  const Eigen::RowVectorXd k = (-0.5 * diff.colwise().squaredNorm()).array().exp().matrix();
  const Eigen::RowVectorXd e = fx.cwiseProduct(fy).colwise().sum() - k;

  const Eigen::MatrixXd dx = (1.0 - sx.array().square()).matrix();
  const Eigen::MatrixXd pmat = w2.transpose() * fy;
  const Eigen::MatrixXd q = dx.cwiseProduct(pmat);
  const Eigen::MatrixXd g = w1.transpose() * q;
  // d/dx exp(-|x-y|^2/2) = -(x-y) exp(...)
  const Eigen::MatrixXd target = -(diff.array().rowwise() * k.array()).matrix();
  const Eigen::MatrixXd dg = g - target;

  const double inv_b = 1.0 / static_cast<double>(b);
  const double loss = e.squaredNorm() * inv_b + grad_penalty * dg.squaredNorm() * inv_b;
  if (grad.empty()) return loss;

  RowMap gw1(grad.data(), h, 3);
  Eigen::Map<Eigen::VectorXd> gb1(grad.data() + 3 * h, h);
  RowMap gw2(grad.data() + 4 * h, r, h);
  Eigen::Map<Eigen::VectorXd> gb2(grad.data() + 4 * h + r * h, r);

  // Gradient-matching branch.
  const Eigen::MatrixXd d_g = (2.0 * grad_penalty * inv_b) * dg;
  gw1 = q * d_g.transpose();
  const Eigen::MatrixXd d_q = w1 * d_g;
  const Eigen::MatrixXd d_p = dx.cwiseProduct(d_q);
  const Eigen::MatrixXd d_ux_g =
      (pmat.array() * d_q.array() * (-2.0 * sx.array() * dx.array())).matrix();
  gw2 = fy * d_p.transpose();
  Eigen::MatrixXd d_fy = w2 * d_p;

  // Value branch.
  const Eigen::RowVectorXd d_e = (2.0 * inv_b) * e;
  const Eigen::MatrixXd d_fx = (fy.array().rowwise() * d_e.array()).matrix();
  d_fy += (fx.array().rowwise() * d_e.array()).matrix();

  gw2 += d_fx * sx.transpose() + d_fy * sy.transpose();
  gb2 = d_fx.rowwise().sum() + d_fy.rowwise().sum();

  const Eigen::MatrixXd d_ux = (w2.transpose() * d_fx).cwiseProduct(dx) + d_ux_g;
  const Eigen::MatrixXd d_uy =
      (w2.transpose() * d_fy).cwiseProduct((1.0 - sy.array().square()).matrix());
  gw1 += d_ux * x.transpose() + d_uy * y.transpose();
  gb1 = d_ux.rowwise().sum() + d_uy.rowwise().sum();
  return loss;
}

}  // namespace detail

std::pair<FeatureMap, FitReport> fit_mlp_features(const KernelSpec& spec,
                                                  const MlpFitConfig& cfg,
                                                  std::uint64_t seed) {
  spec.validate();
  cfg.validate();
  const int h = cfg.hidden, r = cfg.rank;
  const double box = cfg.box / spec.bandwidth;  // unit-bandwidth coordinates

  std::mt19937_64 rng(seed);
  std::vector<double> params(4 * static_cast<std::size_t>(h) +
                             static_cast<std::size_t>(r) * h + r);
  {
    std::uniform_real_distribution<double> in_layer(-1.0 / std::sqrt(3.0),
                                                    1.0 / std::sqrt(3.0));
    std::uniform_real_distribution<double> out_layer(-1.0 / std::sqrt(h),
                                                     1.0 / std::sqrt(h));
    for (int i = 0; i < 4 * h; ++i) params[i] = in_layer(rng);
    for (std::size_t i = 4 * h; i < params.size(); ++i) params[i] = out_layer(rng);
  }

  const Eigen::MatrixXd train_x = uniform_points(rng, cfg.samples, box);
  const Eigen::MatrixXd train_y = uniform_points(rng, cfg.samples, box);

  Adam adam(params.size());
  std::vector<double> grad(params.size());
  std::uniform_int_distribution<int> pick(0, cfg.samples - 1);
  Eigen::MatrixXd bx(3, cfg.batch), by(3, cfg.batch);
  double lr = cfg.step;
  double loss = 0.0;
  for (int it = 0; it < cfg.iterations; ++it) {
    if (it > 0 && it % cfg.decay_every == 0) lr *= cfg.decay_factor;
    for (int c = 0; c < cfg.batch; ++c) {
      const int idx = pick(rng);
      bx.col(c) = train_x.col(idx);
      by.col(c) = train_y.col(idx);
    }
    loss = detail::mlp_fit_loss(params, h, r, bx, by, cfg.grad_penalty, grad);
    if (!std::isfinite(loss))
      throw TrainingError("kernel fit diverged at iteration " + std::to_string(it));
    adam.step(params, grad, lr);
  }

  KernelSpec unit = spec;
  unit.alpha1 = 1.0;
  const FeatureMap unit_map = FeatureMap::trained_network(unit, r, h, params, seed);

  FitReport report;
  report.num_train_samples = cfg.samples;
  report.num_iterations = cfg.iterations;
  report.seed = seed;
  report.final_loss = loss;
  report.grad_penalty = cfg.grad_penalty;
  report.hidden = h;
  const std::uint64_t val_seed = seed ^ 0x9e3779b97f4a7c15ull;
  report.validation_mse =
      validate_kernel_fit(unit_map, unit, cfg.validation_pairs, val_seed, cfg.box);
  {
    std::mt19937_64 vr(val_seed);
    std::uniform_real_distribution<double> u(-cfg.box, cfg.box);
    double total = 0.0;
    for (int i = 0; i < cfg.validation_pairs; ++i) {
      Vec3 x, y;
      for (int c = 0; c < 3; ++c) x[c] = u(vr);
      for (int c = 0; c < 3; ++c) y[c] = u(vr);
      const Eigen::VectorXd fy = unit_map.evaluate(y);
      const Vec3 approx =
          unit_map.vjp(x, std::span<const double>(fy.data(), fy.size()));
      const Vec3 exact = -(x - y) / (spec.bandwidth * spec.bandwidth) *
                         gaussian_kernel(x, y, unit);
      total += (approx - exact).squaredNorm();
    }
    report.gradient_mse = total / cfg.validation_pairs;
  }
  if (!std::isfinite(report.validation_mse))
    throw TrainingError("kernel fit produced non-finite validation error");

  return {FeatureMap::trained_network(spec, r, h, std::move(params), seed), report};
}

}  // namespace mfc
