#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string_view>

namespace mfc {

enum class Method { lbfgs, gradient_descent };

std::string_view to_string(Method method);
Method method_from_string(std::string_view name);

struct OptimizerOptions {
  Method method = Method::lbfgs;
  int max_iters = 100;
  int memory = 10;          // quasi-Newton history length
  double c1 = 1e-4;         // sufficient decrease
  double c2 = 0.9;          // curvature
  int max_backtracks = 30;  // objective evaluations per line search
  double step = 1.0;        // initial trial step for gradient descent
  double grad_tol = 1e-6;

  void validate() const;
  bool operator==(const OptimizerOptions&) const = default;
};

/// Returns f(x) and writes the gradient into `grad` (already sized).
using ObjectiveFn = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

/// Called after every accepted step; return true to stop early.
using IterationCallback = std::function<bool(int iter, double value, double grad_norm)>;

struct MinimizeResult {
  Eigen::VectorXd x;
  Eigen::VectorXd gradient;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;             // grad_norm <= grad_tol
  bool line_search_fallback = false;  // some step was accepted without the Wolfe conditions
  bool stalled = false;               // no decrease could be found
};

/// L-BFGS (two-loop recursion, strong-Wolfe line search) or gradient descent
/// with Armijo backtracking. Accepted steps never increase f. A line search
/// that cannot satisfy the Wolfe conditions falls back to the best
/// decreasing point it evaluated and sets `line_search_fallback`. Throws
/// SolverError if f is not finite at x0.
MinimizeResult minimize(const ObjectiveFn& f, Eigen::VectorXd x0,
                        const OptimizerOptions& opts,
                        const IterationCallback& callback = {});

}  // namespace mfc
