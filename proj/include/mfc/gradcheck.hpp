#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfc/problem.hpp"

namespace mfc {

struct GradCheckResult {
  std::string quantity;  // per_agent, jr_features, jr_exact
  DynamicsKind dynamics = DynamicsKind::double_integrator;
  int instance = 0;
  double rel_error = 0.0;  // |g_adjoint - g_fd| / |g_fd|
};

struct GradCheckReport {
  std::vector<GradCheckResult> results;
  double worst() const;
  bool passed(double tol) const { return worst() <= tol; }
};

/// Central-difference checks of the adjoint gradients on random small
/// instances (N <= 3 agents, n <= 10 nodes) for both dynamics models. The
/// map supplies the features; the double integrator uses the paper's
/// obstacle setup and the quadrotor has no obstacles.
GradCheckReport run_gradient_checks(const FeatureMap& map, int instances, std::uint64_t seed,
                                    double step = 1e-6);

}  // namespace mfc
