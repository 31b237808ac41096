#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "helpers.hpp"
#include "mfc/bench.hpp"
#include "mfc/gradcheck.hpp"
#include "mfc/io.hpp"

using namespace mfc;

TEST_CASE("loglog slope is exact on power laws") {
  const std::vector<double> x{500, 1000, 2000, 4000};
  for (const double p : {0.5, 1.0, 2.0, 2.7}) {
    std::vector<double> y;
    for (const double v : x) y.push_back(3e-7 * std::pow(v, p));
    CHECK(loglog_slope(x, y) == doctest::Approx(p).epsilon(1e-12));
  }
  const std::vector<double> one{10};
  CHECK(loglog_slope(one, one) == 0.0);
}

TEST_CASE("interaction bench with a single agent") {
  const auto map = rff_features(KernelSpec{1.0, 1.0, 3}, 10, 3);
  const std::vector<int> sizes{1};
  const auto bench = bench_interaction(sizes, map, 3, 5, 1, 1e-4);
  REQUIRE(bench.records.size() == 2);
  for (const auto& r : bench.records) {
    CHECK(r.n == 1);
    CHECK(r.repetitions == 3);
    CHECK(r.seconds >= 0.0);
    CHECK(std::isfinite(r.seconds));
  }
  CHECK(bench.direct_slope == 0.0);

  const auto dir = std::filesystem::temp_directory_path() / "mfc_bench_test";
  write_bench_csv(bench, dir / "bench.csv", "h");
  const std::string text = read_text(dir / "bench.csv");
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  std::filesystem::remove_all(dir);
}

TEST_CASE("relative difference") {
  Eigen::MatrixXd ref = Eigen::MatrixXd::Ones(3, 4);
  CHECK(relative_difference(ref, ref) == 0.0);
  Eigen::MatrixXd a = ref;
  a(0, 0) = 2.0;
  CHECK(relative_difference(a, ref) == doctest::Approx(1.0 / std::sqrt(12.0)));
  Rollout r1, r2;
  r1.states = {ref, ref};
  r2.states = {ref, a};
  CHECK(relative_difference(r2, r1) == doctest::Approx(1.0 / std::sqrt(24.0)));
  CHECK(relative_difference(r1, r1) == 0.0);
}

TEST_CASE("self reuse is exactly zero") {
  auto spec = testing::make_spec(DynamicsKind::double_integrator, 4, 6);
  PrimalDualOptions opts;
  opts.inner.max_iters = 30;
  opts.max_outer_iters = 3;
  const auto z0 = sample_initial_conditions(spec.init, 4, 5);
  const auto a = testing::random_dual(spec, 2, 0.1);
  const auto r1 = resolve_primal(a, z0, spec, opts);
  const auto r2 = resolve_primal(a, z0, spec, opts);
  const auto t1 = euler_rollout(spec.model, z0, r1.theta.agents, spec.grid);
  const auto t2 = euler_rollout(spec.model, z0, r2.theta.agents, spec.grid);
  CHECK(relative_difference(t1, t2) == 0.0);
}

TEST_CASE("gradient check report") {
  const auto map = rff_features(KernelSpec{5.0, 1.0, 3}, 8, 2);
  const auto report = run_gradient_checks(map, 2, 3);
  CHECK(report.results.size() >= 4);
  CHECK(report.passed(1e-5));
}
