#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

#include "mfc/errors.hpp"
#include "mfc/feature_map.hpp"

using namespace mfc;

namespace {

Vec3 random_point(std::mt19937_64& rng, double box = 3.0) {
  std::uniform_real_distribution<double> u(-box, box);
  return Vec3(u(rng), u(rng), u(rng));
}

KernelSpec unit_kernel(double alpha1 = 1.0) {
  KernelSpec k;
  k.alpha1 = alpha1;
  return k;
}

FeatureMap small_mlp(double alpha1, std::uint64_t seed) {
  MlpFitConfig cfg;
  cfg.hidden = 8;
  cfg.rank = 5;
  cfg.samples = 200;
  cfg.iterations = 20;
  cfg.batch = 32;
  cfg.validation_pairs = 100;
  return fit_mlp_features(unit_kernel(alpha1), cfg, seed).first;
}

Eigen::MatrixXd fd_jacobian(const FeatureMap& map, const Vec3& x, double step) {
  Eigen::MatrixXd j(map.rank(), 3);
  for (int c = 0; c < 3; ++c) {
    Vec3 p = x, m = x;
    p[c] += step;
    m[c] -= step;
    j.col(c) = (map.evaluate(p) - map.evaluate(m)) / (2 * step);
  }
  return j;
}

}  // namespace

TEST_CASE("gaussian_kernel closed forms") {
  CHECK(gaussian_kernel(Vec3::Zero(), Vec3::Zero(), unit_kernel(2.0)) == 2.0);
  CHECK(gaussian_kernel(Vec3(1, 0, 0), Vec3(0, 1, 0), unit_kernel()) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(gaussian_kernel(Vec3(1, 2, 3), Vec3(1, 2, 3), unit_kernel(2e5)) == 2e5);

  KernelSpec wide = unit_kernel();
  wide.bandwidth = 2.0;
  CHECK(gaussian_kernel(Vec3(2, 0, 0), Vec3::Zero(), wide) ==
        doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
}

TEST_CASE("gaussian_kernel symmetry and maximum at the diagonal") {
  std::mt19937_64 rng(3);
  const auto k = unit_kernel(3.5);
  for (int i = 0; i < 100; ++i) {
    const Vec3 x = random_point(rng), y = random_point(rng);
    CHECK(gaussian_kernel(x, y, k) == gaussian_kernel(y, x, k));
    CHECK(gaussian_kernel(x, y, k) <= gaussian_kernel(x, x, k));
  }
}

TEST_CASE("gaussian_kernel rejects non-finite input") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(gaussian_kernel(Vec3(nan, 0, 0), Vec3::Zero(), unit_kernel()),
                  std::domain_error);
}

TEST_CASE("kernel spec validation") {
  KernelSpec k;
  k.alpha1 = 0.0;
  CHECK_THROWS_AS(k.validate(), ConfigError);
  k.alpha1 = 1.0;
  k.bandwidth = -1.0;
  CHECK_THROWS_AS(k.validate(), ConfigError);
}

TEST_CASE("rff single feature with zero frequency") {
  auto map = FeatureMap::random_feature(unit_kernel(), 1, {0, 0, 0, 0}, 0);
  CHECK(map.evaluate(Vec3(0.3, -1, 2))[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));

  auto w = FeatureMap::random_feature(unit_kernel(), 1, {1, 0, 0, 0}, 0);
  CHECK(w.jacobian(Vec3::Zero()).norm() == 0.0);
}

TEST_CASE("alpha1 scales features and jacobian by its square root") {
  const auto a = rff_features(unit_kernel(1.0), 20, 9);
  const auto b = rff_features(unit_kernel(4.0), 20, 9);
  const Vec3 x(0.2, -0.4, 1.1);
  CHECK((b.evaluate(x) - 2.0 * a.evaluate(x)).norm() <= 1e-14);
  CHECK((b.jacobian(x) - 2.0 * a.jacobian(x)).norm() <= 1e-13);
}

TEST_CASE("rff feature norm is bounded by two") {
  std::mt19937_64 rng(1);
  const auto map = rff_features(unit_kernel(), 37, 4);
  for (int i = 0; i < 200; ++i) CHECK(map.evaluate(random_point(rng, 10)).squaredNorm() <= 2.0 + 1e-12);
}

TEST_CASE("rff construction is deterministic and rejects rank zero") {
  const auto a = rff_features(unit_kernel(), 50, 17);
  const auto b = rff_features(unit_kernel(), 50, 17);
  CHECK(a == b);
  CHECK(a.to_json_string() == b.to_json_string());
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK_FALSE(a == rff_features(unit_kernel(), 50, 18));
  CHECK_THROWS(rff_features(unit_kernel(), 0, 1));
}

TEST_CASE("evaluate returns r finite values and rejects non-finite input") {
  const auto map = rff_features(unit_kernel(2e5), 50, 1);
  const auto z = map.evaluate(Vec3(100, -3, 5));
  CHECK(z.size() == 50);
  CHECK(z.allFinite());
  CHECK_THROWS_AS(map.evaluate(Vec3(std::numeric_limits<double>::infinity(), 0, 0)),
                  std::domain_error);
  CHECK_THROWS_AS(map.jacobian(Vec3(std::numeric_limits<double>::quiet_NaN(), 0, 0)),
                  std::domain_error);
}

TEST_CASE("jacobians match central finite differences") {
  std::mt19937_64 rng(12);
  const FeatureMap maps[] = {rff_features(unit_kernel(3.0), 30, 2), small_mlp(2.0, 5)};
  for (const auto& map : maps) {
    CAPTURE(to_string(map.kind()));
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Vec3 x = random_point(rng);
      const auto fd = fd_jacobian(map, x, 1e-5);
      const double err = (map.jacobian(x) - fd).norm() / std::max(fd.norm(), 1e-12);
      worst = std::max(worst, err);
    }
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("vjp equals transposed jacobian product and fills features") {
  std::mt19937_64 rng(8);
  const auto map = small_mlp(1.5, 3);
  const Vec3 x = random_point(rng);
  Eigen::VectorXd v = Eigen::VectorXd::Random(map.rank());
  Eigen::VectorXd feats(map.rank());
  const Vec3 got = map.vjp(x, {v.data(), static_cast<std::size_t>(v.size())},
                           {feats.data(), static_cast<std::size_t>(feats.size())});
  CHECK((got - map.jacobian(x).transpose() * v).norm() <= 1e-12 * (1 + got.norm()));
  CHECK((feats - map.evaluate(x)).norm() == 0.0);
}

TEST_CASE("expanded kernel symmetry and Gram positivity") {
  std::mt19937_64 rng(21);
  Eigen::MatrixXd kr = Eigen::MatrixXd::Random(10, 10);
  kr = kr * kr.transpose() + Eigen::MatrixXd::Identity(10, 10);
  const auto map = rff_features(unit_kernel(2.0), 10, 6).with_kr(kr);

  std::vector<Vec3> pts;
  for (int i = 0; i < 30; ++i) pts.push_back(random_point(rng));
  Eigen::MatrixXd gram(pts.size(), pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j) {
      gram(i, j) = map.expanded_kernel(pts[i], pts[j]);
      const double back = map.expanded_kernel(pts[j], pts[i]);
      CHECK(std::abs(gram(i, j) - back) <= 1e-12 * std::max(1.0, std::abs(back)));
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (gram + gram.transpose()));
  CHECK(eig.eigenvalues().minCoeff() >= -1e-8 * eig.eigenvalues().maxCoeff());
}

TEST_CASE("exact Gaussian Gram matrix is positive semidefinite") {
  std::mt19937_64 rng(22);
  std::vector<Vec3> pts;
  for (int i = 0; i < 40; ++i) pts.push_back(random_point(rng));
  Eigen::MatrixXd gram(pts.size(), pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j)
      gram(i, j) = gaussian_kernel(pts[i], pts[j], unit_kernel());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-8 * eig.eigenvalues().maxCoeff());
}

TEST_CASE("with_kr rejects malformed matrices") {
  const auto map = rff_features(unit_kernel(), 3, 1);
  CHECK_THROWS_AS(map.with_kr(Eigen::MatrixXd::Identity(2, 2)), ConfigError);
  Eigen::Matrix3d asym = Eigen::Matrix3d::Identity();
  asym(0, 1) = 0.5;
  CHECK_THROWS_AS(map.with_kr(asym), ConfigError);
  CHECK_THROWS_AS(map.with_kr(Eigen::Vector3d(1, -1, 1).asDiagonal().toDenseMatrix()), ConfigError);
  CHECK_THROWS_AS(map.with_kr(Eigen::Matrix3d::Zero()), ConfigError);

  Eigen::Matrix3d spd;
  spd << 2, 0.5, 0, 0.5, 1, 0, 0, 0, 3;
  const auto m = map.with_kr(spd);
  CHECK_FALSE(m.kr_is_identity());
  const Eigen::Vector3d v(1, 2, 3);
  CHECK((m.apply_kr(m.solve_kr(v)) - v).norm() <= 1e-14);
  CHECK(m.fingerprint() != map.fingerprint());
}

TEST_CASE("feature maps round trip through json") {
  Eigen::MatrixXd kr = Eigen::MatrixXd::Identity(5, 5) * 1.25;
  kr(0, 1) = kr(1, 0) = 0.1;
  const FeatureMap maps[] = {rff_features(unit_kernel(2e5), 50, 3), small_mlp(7.0, 4),
                             small_mlp(1.0, 1).with_kr(kr)};
  for (const auto& map : maps) {
    const auto back = FeatureMap::from_json_string(map.to_json_string());
    CHECK(back == map);
    CHECK(back.fingerprint() == map.fingerprint());
    const Vec3 x(0.1, 0.7, -2.2);
    CHECK((back.evaluate(x) - map.evaluate(x)).norm() == 0.0);
  }
  CHECK_THROWS(FeatureMap::from_json_string("{\"kind\": \"random_feature\"}"));
  CHECK_THROWS(FeatureMap::from_json_string("not json"));
}

TEST_CASE("validate_kernel_fit is zero for an exact constant expansion") {
  KernelSpec flat = unit_kernel(3.0);
  flat.bandwidth = 1e8;  // K(x, y) == alpha1 to rounding on the box
  const auto map = FeatureMap::random_feature(flat, 1, {0, 0, 0, -M_PI / 4}, 0);
  // sqrt(2) cos(-pi/4) = 1, so zeta(x)^T zeta(y) = alpha1
  CHECK(validate_kernel_fit(map, flat, 500, 1) <= 1e-24);
}

TEST_CASE("validate_kernel_fit is deterministic in the seed") {
  const auto map = rff_features(unit_kernel(), 20, 2);
  CHECK(validate_kernel_fit(map, unit_kernel(), 300, 4) ==
        validate_kernel_fit(map, unit_kernel(), 300, 4));
}

TEST_CASE("mlp fit loss gradient matches finite differences") {
  const int hidden = 6, rank = 4;
  const int np = hidden * 3 + hidden + rank * hidden + rank;
  std::mt19937_64 rng(44);
  std::normal_distribution<double> g(0.0, 0.5);
  std::vector<double> p(np);
  for (auto& v : p) v = g(rng);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 7) * 2;
  Eigen::MatrixXd y = Eigen::MatrixXd::Random(3, 7) * 2;

  std::vector<double> grad(np), scratch(np);
  detail::mlp_fit_loss(p, hidden, rank, x, y, 0.1, grad);
  double err = 0.0, norm = 0.0;
  for (int i = 0; i < np; ++i) {
    auto pp = p, pm = p;
    pp[i] += 1e-6;
    pm[i] -= 1e-6;
    const double fd = (detail::mlp_fit_loss(pp, hidden, rank, x, y, 0.1, scratch) -
                       detail::mlp_fit_loss(pm, hidden, rank, x, y, 0.1, scratch)) /
                      2e-6;
    err += (fd - grad[i]) * (fd - grad[i]);
    norm += fd * fd;
  }
  CHECK(std::sqrt(err / norm) <= 1e-6);
}

TEST_CASE("mlp fit with zero iterations returns the initialized map") {
  MlpFitConfig cfg;
  cfg.hidden = 10;
  cfg.rank = 6;
  cfg.samples = 100;
  cfg.iterations = 0;
  cfg.validation_pairs = 200;
  auto [map, report] = fit_mlp_features(unit_kernel(), cfg, 3);
  CHECK(map.rank() == 6);
  CHECK(map.hidden() == 10);
  CHECK(std::isfinite(report.validation_mse));
  CHECK(report.validation_mse >= 0.0);
  CHECK(report.num_iterations == 0);
}

TEST_CASE("mlp fit is deterministic and reduces the validation error") {
  MlpFitConfig cfg;
  cfg.hidden = 20;
  cfg.rank = 10;
  cfg.samples = 1000;
  cfg.iterations = 0;
  cfg.validation_pairs = 1000;
  const double initial = fit_mlp_features(unit_kernel(), cfg, 9).second.validation_mse;
  cfg.iterations = 300;
  auto [a, ra] = fit_mlp_features(unit_kernel(), cfg, 9);
  auto [b, rb] = fit_mlp_features(unit_kernel(), cfg, 9);
  CHECK(a == b);
  CHECK(ra.validation_mse == rb.validation_mse);
  CHECK(ra.validation_mse < initial);
  CHECK(ra.gradient_mse >= 0.0);
}

TEST_CASE("mlp config validation") {
  MlpFitConfig cfg;
  cfg.hidden = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.step = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
