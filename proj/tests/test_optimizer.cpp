#include "doctest.h"

#include <cmath>
#include <limits>

#include "mfc/errors.hpp"
#include "mfc/optimizer.hpp"

using namespace mfc;
using Eigen::VectorXd;

namespace {

double half_square(const VectorXd& x, VectorXd& g) {
  g = x;
  return 0.5 * x.squaredNorm();
}

double rosenbrock(const VectorXd& x, VectorXd& g) {
  const double a = 1 - x[0], b = x[1] - x[0] * x[0];
  g.resize(2);
  g[0] = -2 * a - 400 * x[0] * b;
  g[1] = 200 * b;
  return a * a + 100 * b * b;
}

}  // namespace

TEST_CASE("quadratic converges in a few iterations") {
  VectorXd x0(4);
  x0 << 3, -1, 0.5, 7;
  OptimizerOptions opts;
  opts.grad_tol = 1e-10;
  const auto res = minimize(half_square, x0, opts);
  CHECK(res.x.norm() <= 1e-8);
  CHECK(res.iterations <= 3);
  CHECK(res.converged);
}

TEST_CASE("rosenbrock from the standard start") {
  VectorXd x0(2);
  x0 << -1.2, 1;
  OptimizerOptions opts;
  opts.grad_tol = 1e-10;
  opts.max_iters = 100;
  const auto res = minimize(rosenbrock, x0, opts);
  CHECK((res.x - VectorXd::Ones(2)).norm() <= 1e-5);
  CHECK(res.iterations <= 100);
}

TEST_CASE("infinite tolerance returns the start point") {
  VectorXd x0(3);
  x0 << 1, 2, 3;
  OptimizerOptions opts;
  opts.grad_tol = std::numeric_limits<double>::infinity();
  for (auto m : {Method::lbfgs, Method::gradient_descent}) {
    opts.method = m;
    const auto res = minimize(half_square, x0, opts);
    CHECK(res.iterations == 0);
    CHECK(res.x == x0);
    CHECK(res.value == 7.0);
  }
}

TEST_CASE("accepted steps never increase the objective") {
  for (auto m : {Method::lbfgs, Method::gradient_descent}) {
    OptimizerOptions opts;
    opts.method = m;
    opts.max_iters = 200;
    opts.grad_tol = 0;
    double last = std::numeric_limits<double>::infinity();
    bool monotone = true;
    VectorXd x0(2);
    x0 << -1.2, 1;
    minimize(rosenbrock, x0, opts, [&](int, double value, double) {
      monotone = monotone && value <= last;
      last = value;
      return false;
    });
    CHECK(monotone);
  }
}

TEST_CASE("gradient descent makes progress on rosenbrock") {
  VectorXd x0(2);
  x0 << -1.2, 1;
  OptimizerOptions opts;
  opts.method = Method::gradient_descent;
  opts.max_iters = 2000;
  opts.grad_tol = 1e-12;
  VectorXd g;
  const double f0 = rosenbrock(x0, g);
  const auto res = minimize(rosenbrock, x0, opts);
  CHECK(res.value < 1e-2 * f0);
}

TEST_CASE("callback can stop the run") {
  VectorXd x0(2);
  x0 << -1.2, 1;
  OptimizerOptions opts;
  int calls = 0;
  const auto res = minimize(rosenbrock, x0, opts, [&](int iter, double, double) {
    ++calls;
    return iter >= 4;
  });
  CHECK(res.iterations == 4);
  CHECK_FALSE(res.converged);
}

TEST_CASE("non-finite objective at the start is a solver error") {
  auto bad = [](const VectorXd& x, VectorXd& g) {
    g = x;
    return std::numeric_limits<double>::quiet_NaN();
  };
  CHECK_THROWS_AS(minimize(bad, VectorXd::Ones(2), OptimizerOptions{}), SolverError);
}

TEST_CASE("line search backs off from non-finite regions") {
  // f = +inf beyond x = 2, quadratic with minimum at 1.5 below it
  auto walled = [](const VectorXd& x, VectorXd& g) {
    g.resize(1);
    if (x[0] > 2) {
      g[0] = 0;
      return std::numeric_limits<double>::infinity();
    }
    g[0] = 100 * (x[0] - 1.5);
    return 50 * (x[0] - 1.5) * (x[0] - 1.5);
  };
  OptimizerOptions opts;
  opts.grad_tol = 1e-8;
  const auto res = minimize(walled, VectorXd::Zero(1), opts);
  CHECK(res.x[0] == doctest::Approx(1.5).epsilon(1e-8));
}

TEST_CASE("options validation and names") {
  OptimizerOptions o;
  CHECK_NOTHROW(o.validate());
  o.c1 = 0.95;
  CHECK_THROWS_AS(o.validate(), ConfigError);
  o = {};
  o.memory = 0;
  CHECK_THROWS_AS(o.validate(), ConfigError);
  o = {};
  o.max_iters = -1;
  CHECK_THROWS_AS(o.validate(), ConfigError);
  CHECK(method_from_string("lbfgs") == Method::lbfgs);
  CHECK(method_from_string(to_string(Method::gradient_descent)) == Method::gradient_descent);
  CHECK_THROWS_AS(method_from_string("newton"), ConfigError);
}
