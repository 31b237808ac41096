#include "mfc/optimizer.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include "mfc/errors.hpp"

namespace mfc {

std::string_view to_string(Method method) {
  return method == Method::lbfgs ? "lbfgs" : "gradient_descent";
}

Method method_from_string(std::string_view name) {
  if (name == "lbfgs") return Method::lbfgs;
  if (name == "gradient_descent") return Method::gradient_descent;
  throw ConfigError("unknown optimizer method: " + std::string(name));
}

void OptimizerOptions::validate() const {
  if (max_iters < 0 || memory < 1 || max_backtracks < 1)
    throw ConfigError("optimizer counts must be positive");
  if (!(0.0 < c1 && c1 < c2 && c2 < 1.0))
    throw ConfigError("line search constants need 0 < c1 < c2 < 1");
  if (!(step > 0.0)) throw ConfigError("optimizer step must be positive");
  if (!(grad_tol >= 0.0)) throw ConfigError("grad_tol must be >= 0");
}

namespace {

struct Point {
  double alpha = 0.0;
  double value = 0.0;
  double slope = 0.0;  // directional derivative
  Eigen::VectorXd x;
  Eigen::VectorXd grad;
};

class LineSearch {
 public:
  LineSearch(const ObjectiveFn& f, const OptimizerOptions& opts, int& evaluations)
      : f_(f), opts_(opts), evaluations_(evaluations) {}

  // Strong-Wolfe search along p from (x0, f0, g0). Returns false when no
  // decreasing point was found; `fallback` reports an accepted point that
  // only satisfies decrease.
  bool wolfe(const Point& start, const Eigen::VectorXd& p, double alpha, Point& out,
             bool& fallback) {
    budget_ = opts_.max_backtracks;
    best_ = start;
    have_best_ = false;
    Point prev = start;
    for (int i = 0; budget_ > 0; ++i) {
      Point cur = eval(start, p, alpha);
      if (!std::isfinite(cur.value) || cur.value > armijo(start, cur.alpha) ||
          (i > 0 && cur.value >= prev.value)) {
        if (zoom(start, p, prev, cur, out)) return true;
        break;
      }
      if (std::abs(cur.slope) <= -opts_.c2 * start.slope) {
        out = cur;
        return true;
      }
      if (cur.slope >= 0.0) {
        if (zoom(start, p, cur, prev, out)) return true;
        break;
      }
      prev = cur;
      alpha *= 2.0;
    }
    return take_best(out, fallback);
  }

  // Armijo backtracking for gradient descent.
  bool armijo_search(const Point& start, const Eigen::VectorXd& p, double alpha,
                     Point& out) {
    budget_ = opts_.max_backtracks;
    while (budget_ > 0) {
      Point cur = eval(start, p, alpha);
      if (std::isfinite(cur.value) && cur.value <= armijo(start, alpha)) {
        out = cur;
        return true;
      }
      alpha *= 0.5;
    }
    return false;
  }

 private:
  double armijo(const Point& start, double alpha) const {
    return start.value + opts_.c1 * alpha * start.slope;
  }

  Point eval(const Point& start, const Eigen::VectorXd& p, double alpha) {
    Point pt;
    pt.alpha = alpha;
    pt.x = start.x + alpha * p;
    pt.grad.resize(pt.x.size());
    pt.value = f_(pt.x, pt.grad);
    pt.slope = pt.grad.dot(p);
    ++evaluations_;
    --budget_;
    if (std::isfinite(pt.value) && pt.grad.allFinite() && pt.value < best_.value) {
      best_ = pt;
      have_best_ = true;
    }
    return pt;
  }

  bool zoom(const Point& start, const Eigen::VectorXd& p, Point lo, Point hi, Point& out) {
    while (budget_ > 0) {
      const double a = lo.alpha, b = hi.alpha;
      const double width = std::abs(b - a);
      if (width < 1e-16 * std::max(1.0, std::abs(a))) return false;
      double trial = interpolate(lo, hi);
      const double lo_bound = std::min(a, b) + 0.1 * width;
      const double hi_bound = std::max(a, b) - 0.1 * width;
      if (!std::isfinite(trial) || trial < lo_bound || trial > hi_bound)
        trial = 0.5 * (a + b);
      Point cur = eval(start, p, trial);
      if (!std::isfinite(cur.value) || cur.value > armijo(start, trial) ||
          cur.value >= lo.value) {
        hi = cur;
        continue;
      }
      if (std::abs(cur.slope) <= -opts_.c2 * start.slope) {
        out = cur;
        return true;
      }
      if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
      lo = cur;
    }
    return false;
  }

  // Minimizer of the quadratic through (lo, slope at lo) and hi. Uses only
  // one slope so that a jump in f between lo and hi shrinks the step.
  static double interpolate(const Point& lo, const Point& hi) {
    const double da = hi.alpha - lo.alpha;
    if (!std::isfinite(hi.value)) return lo.alpha + 0.1 * da;
    const double curv = (hi.value - lo.value - lo.slope * da) / (da * da);
    if (!(curv > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return lo.alpha - lo.slope / (2.0 * curv);
  }

  bool take_best(Point& out, bool& fallback) {
    if (!have_best_) return false;
    out = best_;
    fallback = true;
    return true;
  }

  const ObjectiveFn& f_;
  const OptimizerOptions& opts_;
  int& evaluations_;
  int budget_ = 0;
  Point best_;
  bool have_best_ = false;
};

}  // namespace

MinimizeResult minimize(const ObjectiveFn& f, Eigen::VectorXd x0,
                        const OptimizerOptions& opts, const IterationCallback& callback) {
  opts.validate();
  MinimizeResult res;
  Point cur;
  cur.x = std::move(x0);
  cur.grad.resize(cur.x.size());
  cur.value = f(cur.x, cur.grad);
  res.evaluations = 1;
  if (!std::isfinite(cur.value) || !cur.grad.allFinite())
    throw SolverError("objective is not finite at the starting point");

  LineSearch search(f, opts, res.evaluations);
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> memory;  // (s, y)
  double gd_step = opts.step;

  auto finish = [&] {
    res.grad_norm = cur.grad.norm();
    res.value = cur.value;
    res.x = std::move(cur.x);
    res.gradient = std::move(cur.grad);
    return res;
  };

  for (;;) {
    const double gnorm = cur.grad.norm();
    if (gnorm <= opts.grad_tol) {
      res.converged = true;
      return finish();
    }
    if (res.iterations >= opts.max_iters) return finish();

    Eigen::VectorXd p;
    if (opts.method == Method::lbfgs) {
      Eigen::VectorXd q = cur.grad;
      std::vector<double> rho(memory.size()), alpha(memory.size());
      for (int i = static_cast<int>(memory.size()) - 1; i >= 0; --i) {
        const auto& [s, y] = memory[i];
        rho[i] = 1.0 / y.dot(s);
        alpha[i] = rho[i] * s.dot(q);
        q -= alpha[i] * y;
      }
      if (!memory.empty()) {
        const auto& [s, y] = memory.back();
        q *= s.dot(y) / y.dot(y);
      }
      for (std::size_t i = 0; i < memory.size(); ++i) {
        const auto& [s, y] = memory[i];
        const double beta = rho[i] * y.dot(q);
        q += (alpha[i] - beta) * s;
      }
      p = -q;
      if (!(p.dot(cur.grad) < 0.0)) {
        memory.clear();
        p = -cur.grad;
      }
    } else {
      p = -cur.grad;
    }
    cur.slope = p.dot(cur.grad);

    Point next;
    bool fallback = false;
    bool ok;
    if (opts.method == Method::lbfgs) {
      const double alpha0 = memory.empty() ? std::min(1.0, 1.0 / p.norm()) : 1.0;
      ok = search.wolfe(cur, p, alpha0, next, fallback);
      if (!ok && !memory.empty()) {
        // Retry once along steepest descent with a fresh memory.
        memory.clear();
        p = -cur.grad;
        cur.slope = p.dot(cur.grad);
        ok = search.wolfe(cur, p, std::min(1.0, 1.0 / p.norm()), next, fallback);
      }
    } else {
      ok = search.armijo_search(cur, p, gd_step, next);
      if (ok) gd_step = 2.0 * next.alpha;
    }
    if (!ok) {
      res.stalled = true;
      return finish();
    }
    res.line_search_fallback = res.line_search_fallback || fallback;

    if (opts.method == Method::lbfgs) {
      Eigen::VectorXd s = next.x - cur.x;
      Eigen::VectorXd y = next.grad - cur.grad;
      if (s.dot(y) > 1e-10 * s.norm() * y.norm()) {
        memory.emplace_back(std::move(s), std::move(y));
        if (static_cast<int>(memory.size()) > opts.memory) memory.pop_front();
      }
    }
    cur = std::move(next);
    cur.alpha = 0.0;
    ++res.iterations;
    if (callback && callback(res.iterations, cur.value, cur.grad.norm())) return finish();
  }
}

}  // namespace mfc
