#include "mfc/feature_map.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <stdexcept>

#include "json.hpp"
#include "mfc/errors.hpp"
#include "mfc/hash.hpp"
#include "mfc/simd/kernels.hpp"

namespace mfc {

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

namespace {

void require_finite(const Vec3& x) {
  if (!x.allFinite()) throw std::domain_error("non-finite feature input");
}

std::vector<double>& scratch(std::size_t n) {
  thread_local std::vector<double> buf;
  if (buf.size() < n) buf.resize(n);
  return buf;
}

}  // namespace

void KernelSpec::validate() const {
  if (!(alpha1 > 0.0) || !std::isfinite(alpha1))
    throw ConfigError("kernel.alpha1 must be positive");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw ConfigError("kernel.bandwidth must be positive");
  if (input_dim != 3) throw ConfigError("kernel.input_dim must be 3");
}

double gaussian_kernel(const Vec3& x, const Vec3& y, const KernelSpec& spec) {
  require_finite(x);
  require_finite(y);
  const double d2 = (x - y).squaredNorm();
  return spec.alpha1 * std::exp(-d2 / (2.0 * spec.bandwidth * spec.bandwidth));
}

std::string_view to_string(FeatureKind kind) {
  return kind == FeatureKind::random_feature ? "random_feature"
                                             : "trained_network";
}

FeatureKind feature_kind_from_string(std::string_view name) {
  if (name == "random_feature") return FeatureKind::random_feature;
  if (name == "trained_network") return FeatureKind::trained_network;
  throw ConfigError("unknown feature kind: " + std::string(name));
}

FeatureMap FeatureMap::random_feature(const KernelSpec& kernel, int rank,
                                      std::vector<double> parameters,
                                      std::uint64_t seed) {
  kernel.validate();
  if (rank < 1) throw std::invalid_argument("feature rank must be >= 1");
  if (parameters.size() != static_cast<std::size_t>(4 * rank))
    throw std::invalid_argument("random-feature parameter count must be 4r");
  FeatureMap map;
  map.kind_ = FeatureKind::random_feature;
  map.kernel_ = kernel;
  map.rank_ = rank;
  map.seed_ = seed;
  map.parameters_ = std::move(parameters);
  map.finalize();
  return map;
}

FeatureMap FeatureMap::trained_network(const KernelSpec& kernel, int rank,
                                       int hidden,
                                       std::vector<double> parameters,
                                       std::uint64_t seed) {
  kernel.validate();
  if (rank < 1 || hidden < 1)
    throw std::invalid_argument("network widths must be >= 1");
  const std::size_t expected =
      static_cast<std::size_t>(hidden) * 4 +
      static_cast<std::size_t>(rank) * hidden + rank;
  if (parameters.size() != expected)
    throw std::invalid_argument("network parameter count mismatch");
  FeatureMap map;
  map.kind_ = FeatureKind::trained_network;
  map.kernel_ = kernel;
  map.rank_ = rank;
  map.hidden_ = hidden;
  map.seed_ = seed;
  map.parameters_ = std::move(parameters);
  map.finalize();
  return map;
}

FeatureMap FeatureMap::with_kr(const Eigen::MatrixXd& kr) const {
  if (kr.rows() != rank_ || kr.cols() != rank_)
    throw ConfigError("Kr must be r x r");
  if (!kr.allFinite() || !kr.isApprox(kr.transpose(), 1e-12))
    throw ConfigError("Kr must be symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(kr);
  if (llt.info() != Eigen::Success)
    throw ConfigError("Kr must be positive definite");
  FeatureMap copy = *this;
  if (kr.isIdentity(0.0)) {
    copy.kr_.reset();
    copy.kr_llt_.reset();
  } else {
    copy.kr_ = kr;
    copy.kr_llt_ = std::move(llt);
  }
  copy.finalize();
  return copy;
}

void FeatureMap::finalize() {
  for (const double p : parameters_)
    if (!std::isfinite(p)) throw std::invalid_argument("non-finite parameter");
  fingerprint_ = hex64(fnv1a64(to_json_string()));
}

Eigen::MatrixXd FeatureMap::kr() const {
  return kr_ ? *kr_ : Eigen::MatrixXd::Identity(rank_, rank_);
}

Eigen::VectorXd FeatureMap::apply_kr(const Eigen::VectorXd& v) const {
  return kr_ ? Eigen::VectorXd(*kr_ * v) : v;
}

Eigen::VectorXd FeatureMap::solve_kr(const Eigen::VectorXd& v) const {
  return kr_llt_ ? Eigen::VectorXd(kr_llt_->solve(v)) : v;
}

Eigen::VectorXd FeatureMap::evaluate(const Vec3& x) const {
  Eigen::VectorXd out(rank_);
  evaluate(x, std::span<double>(out.data(), rank_));
  return out;
}

void FeatureMap::evaluate(const Vec3& x, std::span<double> out) const {
  require_finite(x);
  const auto& k = simd::kernels();
  const double* p = parameters_.data();
  const std::size_t r = static_cast<std::size_t>(rank_);
  if (kind_ == FeatureKind::random_feature) {
    const double amp = scale() * std::sqrt(2.0 / rank_);
    for (std::size_t i = 0; i < r; ++i) {
      const double* w = p + 3 * i;
      out[i] = amp * std::cos(w[0] * x[0] + w[1] * x[1] + w[2] * x[2] +
                              p[3 * r + i]);
    }
    return;
  }
  const std::size_t h = static_cast<std::size_t>(hidden_);
  const double* w1 = p;
  const double* b1 = w1 + 3 * h;
  const double* w2 = b1 + h;
  const double* b2 = w2 + r * h;
  const Vec3 xs = x / kernel_.bandwidth;
  auto& s = scratch(h);
  for (std::size_t i = 0; i < h; ++i)
    s[i] = w1[3 * i] * xs[0] + w1[3 * i + 1] * xs[1] + w1[3 * i + 2] * xs[2] +
           b1[i];
  k.tanh(s.data(), s.data(), h);
  k.matvec(w2, s.data(), out.data(), r, h);
  const double sc = scale();
  for (std::size_t i = 0; i < r; ++i) out[i] = sc * (out[i] + b2[i]);
}

Eigen::MatrixXd FeatureMap::jacobian(const Vec3& x) const {
  require_finite(x);
  Eigen::MatrixXd jac(rank_, 3);
  const double* p = parameters_.data();
  const std::size_t r = static_cast<std::size_t>(rank_);
  if (kind_ == FeatureKind::random_feature) {
    const double amp = scale() * std::sqrt(2.0 / rank_);
    for (std::size_t i = 0; i < r; ++i) {
      const double* w = p + 3 * i;
      const double sn =
          std::sin(w[0] * x[0] + w[1] * x[1] + w[2] * x[2] + p[3 * r + i]);
      for (int j = 0; j < 3; ++j) jac(i, j) = -amp * sn * w[j];
    }
    return jac;
  }
  const std::size_t h = static_cast<std::size_t>(hidden_);
  const double* w1 = p;
  const double* b1 = w1 + 3 * h;
  const double* w2 = b1 + h;
  const Vec3 xs = x / kernel_.bandwidth;
  std::vector<double> ds(h);
  for (std::size_t i = 0; i < h; ++i) {
    const double t = std::tanh(w1[3 * i] * xs[0] + w1[3 * i + 1] * xs[1] +
                               w1[3 * i + 2] * xs[2] + b1[i]);
    ds[i] = 1.0 - t * t;
  }
  const double sc = scale() / kernel_.bandwidth;
  for (std::size_t o = 0; o < r; ++o) {
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < h; ++i)
        acc += w2[o * h + i] * ds[i] * w1[3 * i + j];
      jac(o, j) = sc * acc;
    }
  }
  return jac;
}

Vec3 FeatureMap::vjp(const Vec3& x, std::span<const double> v,
                     std::span<double> features) const {
  require_finite(x);
  const auto& k = simd::kernels();
  const double* p = parameters_.data();
  const std::size_t r = static_cast<std::size_t>(rank_);
  Vec3 g = Vec3::Zero();
  if (kind_ == FeatureKind::random_feature) {
    const double amp = scale() * std::sqrt(2.0 / rank_);
    for (std::size_t i = 0; i < r; ++i) {
      const double* w = p + 3 * i;
      const double arg = w[0] * x[0] + w[1] * x[1] + w[2] * x[2] + p[3 * r + i];
      if (!features.empty()) features[i] = amp * std::cos(arg);
      const double c = -amp * std::sin(arg) * v[i];
      g[0] += c * w[0];
      g[1] += c * w[1];
      g[2] += c * w[2];
    }
    return g;
  }
  const std::size_t h = static_cast<std::size_t>(hidden_);
  const double* w1 = p;
  const double* b1 = w1 + 3 * h;
  const double* w2 = b1 + h;
  const double* b2 = w2 + r * h;
  const Vec3 xs = x / kernel_.bandwidth;
  auto& buf = scratch(2 * h);
  double* s = buf.data();
  double* back = s + h;
  for (std::size_t i = 0; i < h; ++i)
    s[i] = w1[3 * i] * xs[0] + w1[3 * i + 1] * xs[1] + w1[3 * i + 2] * xs[2] +
           b1[i];
  k.tanh(s, s, h);
  const double sc = scale();
  if (!features.empty()) {
    k.matvec(w2, s, features.data(), r, h);
    for (std::size_t i = 0; i < r; ++i)
      features[i] = sc * (features[i] + b2[i]);
  }
  k.matvec_t(w2, v.data(), back, r, h);
  for (std::size_t i = 0; i < h; ++i) back[i] *= 1.0 - s[i] * s[i];
  for (std::size_t i = 0; i < h; ++i) {
    g[0] += w1[3 * i] * back[i];
    g[1] += w1[3 * i + 1] * back[i];
    g[2] += w1[3 * i + 2] * back[i];
  }
  return g * (sc / kernel_.bandwidth);
}

double FeatureMap::expanded_kernel(const Vec3& x, const Vec3& y) const {
  const Eigen::VectorXd fx = evaluate(x);
  const Eigen::VectorXd fy = evaluate(y);
  return fx.dot(apply_kr(fy));
}

std::string FeatureMap::to_json_string() const {
  nlohmann::json j;
  j["kind"] = std::string(to_string(kind_));
  j["r"] = rank_;
  j["input_dim"] = 3;
  j["alpha1"] = kernel_.alpha1;
  j["bandwidth"] = kernel_.bandwidth;
  j["seed"] = seed_;
  j["parameters"] = parameters_;
  if (kr_) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < rank_; ++i) {
      std::vector<double> row(rank_);
      for (int c = 0; c < rank_; ++c) row[c] = (*kr_)(i, c);
      rows.push_back(row);
    }
    j["Kr"] = rows;
  } else {
    j["Kr"] = "identity";
  }
  return j.dump();
}

FeatureMap FeatureMap::from_json_string(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("feature map: ") + e.what());
  }
  try {
    KernelSpec spec;
    spec.alpha1 = j.at("alpha1").get<double>();
    spec.bandwidth = j.at("bandwidth").get<double>();
    spec.input_dim = j.at("input_dim").get<int>();
    const int r = j.at("r").get<int>();
    const auto seed = j.at("seed").get<std::uint64_t>();
    auto params = j.at("parameters").get<std::vector<double>>();
    const FeatureKind kind = feature_kind_from_string(j.at("kind").get<std::string>());
    FeatureMap map;
    if (kind == FeatureKind::random_feature) {
      map = random_feature(spec, r, std::move(params), seed);
    } else {
      const long total = static_cast<long>(params.size());
      const long hidden = (total - r) / (spec.input_dim + 1 + r);
      if (hidden < 1 || hidden * (spec.input_dim + 1 + r) + r != total)
        throw ConfigError("feature map: inconsistent network parameter count");
      map = trained_network(spec, r, static_cast<int>(hidden), std::move(params),
                            seed);
    }
    const auto& kr = j.at("Kr");
    if (kr.is_string()) {
      if (kr.get<std::string>() != "identity")
        throw ConfigError("feature map: Kr must be \"identity\" or a matrix");
      return map;
    }
    Eigen::MatrixXd m(r, r);
    if (kr.size() != static_cast<std::size_t>(r))
      throw ConfigError("feature map: Kr must be r x r");
    for (int i = 0; i < r; ++i) {
      const auto row = kr.at(i).get<std::vector<double>>();
      if (row.size() != static_cast<std::size_t>(r))
        throw ConfigError("feature map: Kr must be r x r");
      for (int c = 0; c < r; ++c) m(i, c) = row[c];
    }
    return map.with_kr(m);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("feature map: ") + e.what());
  }
}

bool FeatureMap::operator==(const FeatureMap& other) const {
  return kind_ == other.kind_ && kernel_ == other.kernel_ &&
         rank_ == other.rank_ && hidden_ == other.hidden_ &&
         seed_ == other.seed_ && parameters_ == other.parameters_ &&
         kr() == other.kr();
}

FeatureMap rff_features(const KernelSpec& spec, int rank, std::uint64_t seed) {
  spec.validate();
  if (rank < 1) throw std::invalid_argument("feature rank must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / spec.bandwidth);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::vector<double> params(4 * static_cast<std::size_t>(rank));
  for (int i = 0; i < 3 * rank; ++i) params[i] = normal(rng);
  for (int i = 0; i < rank; ++i) params[3 * rank + i] = phase(rng);
  return FeatureMap::random_feature(spec, rank, std::move(params), seed);
}

double validate_kernel_fit(const FeatureMap& map, const KernelSpec& spec,
                           int num_pairs, std::uint64_t seed, double box) {
  if (num_pairs < 1) throw std::invalid_argument("num_pairs must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-box, box);
  double total = 0.0;
  for (int i = 0; i < num_pairs; ++i) {
    Vec3 x, y;
    for (int c = 0; c < 3; ++c) x[c] = u(rng);
    for (int c = 0; c < 3; ++c) y[c] = u(rng);
    const double e = map.expanded_kernel(x, y) - gaussian_kernel(x, y, spec);
    total += e * e;
  }
  return total / num_pairs;
}

}  // namespace mfc
