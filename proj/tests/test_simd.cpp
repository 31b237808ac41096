#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "mfc/simd/kernels.hpp"

using namespace mfc::simd;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("scalar level is always available") {
  CHECK(available(Level::scalar));
  CHECK(to_string(Level::scalar) == "scalar");
}

TEST_CASE("set_level round trip") {
  const Level before = active_level();
  set_level(Level::scalar);
  CHECK(active_level() == Level::scalar);
  set_level(before);
  CHECK(active_level() == before);
}

#if defined(MFC_HAVE_AVX2)
TEST_CASE("avx2 kernels agree with the scalar reference") {
  if (!available(Level::avx2)) {
    MESSAGE("cpu lacks avx2, skipping");
    return;
  }
  const auto& s = kernels(Level::scalar);
  const auto& v = kernels(Level::avx2);
  std::mt19937_64 rng(5);

  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 16u, 33u, 257u}) {
    CAPTURE(n);
    auto a = random_vec(n, rng);
    auto b = random_vec(n, rng);
    CHECK(rel(v.dot(a.data(), b.data(), n), s.dot(a.data(), b.data(), n)) <= 1e-13);

    auto in = random_vec(n, rng, 3.0);
    in.push_back(25.0);
    in.push_back(-40.0);
    in.push_back(0.0);
    std::vector<double> ts(in.size()), tv(in.size());
    s.tanh(in.data(), ts.data(), in.size());
    v.tanh(in.data(), tv.data(), in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
      CHECK(std::abs(ts[i] - std::tanh(in[i])) <= 1e-14);
      CHECK(std::abs(tv[i] - ts[i]) <= 1e-14);
    }
  }

  for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{1, 1}, {3, 5}, {50, 100}, {7, 3}}) {
    CAPTURE(rows);
    CAPTURE(cols);
    auto w = random_vec(rows * cols, rng);
    auto x = random_vec(cols, rng);
    auto xt = random_vec(rows, rng);
    std::vector<double> ys(rows), yv(rows), zs(cols), zv(cols);
    s.matvec(w.data(), x.data(), ys.data(), rows, cols);
    v.matvec(w.data(), x.data(), yv.data(), rows, cols);
    for (std::size_t i = 0; i < rows; ++i) CHECK(rel(yv[i], ys[i]) <= 1e-13);
    s.matvec_t(w.data(), xt.data(), zs.data(), rows, cols);
    v.matvec_t(w.data(), xt.data(), zv.data(), rows, cols);
    for (std::size_t j = 0; j < cols; ++j) CHECK(rel(zv[j], zs[j]) <= 1e-13);
  }

  for (std::size_t n : {1u, 2u, 5u, 64u, 301u}) {
    CAPTURE(n);
    auto xs = random_vec(n, rng);
    auto ys = random_vec(n, rng);
    auto zs = random_vec(n, rng);
    const double ref = s.gaussian_pair_sum(xs.data(), ys.data(), zs.data(), n, 0.5);
    const double got = v.gaussian_pair_sum(xs.data(), ys.data(), zs.data(), n, 0.5);
    CHECK(std::abs(got - ref) / ref <= 1e-12);

    const std::size_t r = 13;
    auto f = random_vec(n * r, rng);
    auto g = random_vec(n * r, rng);
    const double gs = s.gram_sum(f.data(), g.data(), n, r);
    const double gv = v.gram_sum(f.data(), g.data(), n, r);
    CHECK(rel(gv, gs) <= 1e-11);
  }
}
#endif

TEST_CASE("scalar gaussian_pair_sum matches a direct double loop") {
  std::mt19937_64 rng(2);
  const std::size_t n = 9;
  auto xs = random_vec(n, rng);
  auto ys = random_vec(n, rng);
  auto zs = random_vec(n, rng);
  double oracle = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double dx = xs[i] - xs[j], dy = ys[i] - ys[j], dz = zs[i] - zs[j];
      oracle += std::exp(-0.5 * (dx * dx + dy * dy + dz * dz));
    }
  const double got = scalar_kernels().gaussian_pair_sum(xs.data(), ys.data(), zs.data(), n, 0.5);
  CHECK(std::abs(got - oracle) / oracle <= 1e-13);
}
