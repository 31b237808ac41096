#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mfc {

using Vec3 = Eigen::Vector3d;

/// Gaussian interaction kernel alpha1 * exp(-|x - y|^2 / (2 bandwidth^2)) on R^3.
struct KernelSpec {
  double alpha1 = 1.0;
  double bandwidth = 1.0;
  int input_dim = 3;

  void validate() const;
  bool operator==(const KernelSpec&) const = default;
};

/// Throws std::domain_error on non-finite input.
double gaussian_kernel(const Vec3& x, const Vec3& y, const KernelSpec& spec);

enum class FeatureKind { random_feature, trained_network };

std::string_view to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(std::string_view name);

/// Low-rank expansion zeta: R^3 -> R^r with zeta(x)^T Kr zeta(y) ~ K(x, y).
///
/// The map is immutable after construction and safe to share between
/// threads. Outputs are scaled by sqrt(alpha1), so the unscaled features
/// approximate the unit-weight kernel.
///
/// Parameter layout (flat, row-major):
///   random_feature:  W (r x 3), b (r);        z~_i = sqrt(2/r) cos(w_i.x + b_i)
///   trained_network: W1 (H x 3), b1 (H), W2 (r x H), b2 (r);
///                    z~ = W2 tanh(W1 x/bw + b1) + b2
class FeatureMap {
 public:
  static FeatureMap random_feature(const KernelSpec& kernel, int rank,
                                   std::vector<double> parameters,
                                   std::uint64_t seed);
  static FeatureMap trained_network(const KernelSpec& kernel, int rank,
                                    int hidden, std::vector<double> parameters,
                                    std::uint64_t seed);

  /// Copy with a general symmetric positive-definite Kr. Throws ConfigError
  /// if Kr is not r x r, not symmetric, or not positive definite.
  FeatureMap with_kr(const Eigen::MatrixXd& kr) const;

  FeatureKind kind() const { return kind_; }
  int rank() const { return rank_; }
  int hidden() const { return hidden_; }
  int input_dim() const { return 3; }
  double alpha1() const { return kernel_.alpha1; }
  double bandwidth() const { return kernel_.bandwidth; }
  double scale() const { return std::sqrt(kernel_.alpha1); }
  const KernelSpec& kernel() const { return kernel_; }
  std::uint64_t seed() const { return seed_; }
  std::span<const double> parameters() const { return parameters_; }

  bool kr_is_identity() const { return !kr_.has_value(); }
  Eigen::MatrixXd kr() const;
  Eigen::VectorXd apply_kr(const Eigen::VectorXd& v) const;
  Eigen::VectorXd solve_kr(const Eigen::VectorXd& v) const;

  Eigen::VectorXd evaluate(const Vec3& x) const;
  void evaluate(const Vec3& x, std::span<double> out) const;

  /// d zeta / dx, r x 3.
  Eigen::MatrixXd jacobian(const Vec3& x) const;

  /// J(x)^T v. When `features` is non-empty it also receives zeta(x).
  Vec3 vjp(const Vec3& x, std::span<const double> v,
           std::span<double> features = {}) const;

  /// zeta(x)^T Kr zeta(y).
  double expanded_kernel(const Vec3& x, const Vec3& y) const;

  /// Content hash of the serialized map.
  const std::string& fingerprint() const { return fingerprint_; }

  std::string to_json_string() const;
  static FeatureMap from_json_string(std::string_view text);

  bool operator==(const FeatureMap& other) const;

 private:
  FeatureMap() = default;
  void finalize();

  FeatureKind kind_ = FeatureKind::random_feature;
  KernelSpec kernel_;
  int rank_ = 0;
  int hidden_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<double> parameters_;
  std::optional<Eigen::MatrixXd> kr_;
  std::optional<Eigen::LLT<Eigen::MatrixXd>> kr_llt_;
  std::string fingerprint_;
};

/// Random Fourier features for the Gaussian kernel; deterministic in seed.
FeatureMap rff_features(const KernelSpec& spec, int rank, std::uint64_t seed);

struct MlpFitConfig {
  int hidden = 100;
  int rank = 50;
  int samples = 10000;
  int iterations = 3000;
  int batch = 256;
  double step = 1e-3;
  int decay_every = 10000;
  double decay_factor = 0.1;
  double grad_penalty = 0.1;
  double box = 3.0;
  int validation_pairs = 10000;

  void validate() const;
  bool operator==(const MlpFitConfig&) const = default;
};

struct FitReport {
  double validation_mse = 0.0;
  double gradient_mse = 0.0;
  int num_train_samples = 0;
  int num_iterations = 0;
  std::uint64_t seed = 0;
  double final_loss = 0.0;
  double grad_penalty = 0.0;
  int hidden = 0;
  std::string activation = "tanh";
};

/// Trains a one-hidden-layer network so that zeta~(x)^T zeta~(y) matches
/// exp(-|x-y|^2/2) on pairs from the training box, with a penalty on the
/// mismatch of the x-gradients. Adam with step decay.
std::pair<FeatureMap, FitReport> fit_mlp_features(const KernelSpec& spec,
                                                  const MlpFitConfig& cfg,
                                                  std::uint64_t seed);

/// Mean squared error of zeta(x)^T Kr zeta(y) against K(x, y) over pairs
/// drawn uniformly from [-box, box]^3.
double validate_kernel_fit(const FeatureMap& map, const KernelSpec& spec,
                           int num_pairs, std::uint64_t seed, double box = 3.0);

namespace detail {

/// Batch loss and parameter gradient of the network fit (exposed for tests).
/// `x`, `y` are 3 x B. Returns the loss; `grad` has the parameter layout.
double mlp_fit_loss(std::span<const double> params, int hidden, int rank,
                    const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                    double grad_penalty, std::span<double> grad);

}  // namespace detail

}  // namespace mfc
