#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>

#include <unistd.h>

#include "helpers.hpp"
#include "mfc/errors.hpp"
#include "mfc/io.hpp"

using namespace mfc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("mfc_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("format_double round trips") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint64_t> bits;
  int checked = 0;
  while (checked < 2000) {
    const std::uint64_t b = bits(rng);
    double v;
    std::memcpy(&v, &b, sizeof v);
    if (!std::isfinite(v)) continue;
    CHECK(parse_double(format_double(v)) == v);
    ++checked;
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(parse_double(format_double(-0.0)) == 0.0);
  CHECK_THROWS_AS(parse_double("1.5x"), std::invalid_argument);
  CHECK_THROWS_AS(parse_double(""), std::invalid_argument);
}

TEST_CASE("initial conditions: zero variance gives the mean") {
  InitialDistribution init;
  init.mean = Eigen::VectorXd::LinSpaced(6, -1, 1);
  init.variance = 0.0;
  for (const auto& z : sample_initial_conditions(init, 5, 3)) CHECK(z == init.mean);
}

TEST_CASE("initial conditions: seeded and noisy only on the leading components") {
  InitialDistribution init;
  init.mean = Eigen::VectorXd::Zero(12);
  init.mean[1] = -0.5;
  init.variance = 0.8;
  init.noisy_dims = 3;
  const auto a = sample_initial_conditions(init, 10, 4);
  const auto b = sample_initial_conditions(init, 10, 4);
  const auto c = sample_initial_conditions(init, 10, 5);
  bool differs = false;
  for (int l = 0; l < 10; ++l) {
    CHECK(a[l] == b[l]);
    differs = differs || a[l] != c[l];
    CHECK(a[l].tail(9) == init.mean.tail(9));
  }
  CHECK(differs);
  CHECK_THROWS(sample_initial_conditions(init, 0, 1));
}

TEST_CASE("initial conditions: sample mean within three standard errors") {
  InitialDistribution init;
  init.mean = Eigen::VectorXd::Zero(6);
  init.mean[1] = -0.5;
  init.variance = 0.8;
  const int n = 100000;
  const auto z = sample_initial_conditions(init, n, 11);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(6);
  for (const auto& v : z) mean += v;
  mean /= n;
  const double bound = 3 * std::sqrt(0.8) / std::sqrt(static_cast<double>(n));
  for (int i = 0; i < 6; ++i) CHECK(std::abs(mean[i] - init.mean[i]) <= bound);
}

TEST_CASE("coefficient archive round trip and compatibility") {
  TempDir dir;
  auto spec = testing::make_spec(DynamicsKind::double_integrator, 2, 7);
  CoefficientArchive arc;
  arc.coefficients = testing::random_dual(spec, 3, 1e3);
  arc.coefficients.values(0, 0) = 1.0 / 3.0;
  arc.coefficients.values(1, 0) = -std::numeric_limits<double>::denorm_min();
  arc.config_hash = "abc123";
  arc.converged = true;
  arc.outer_iterations = 17;
  const auto path = dir.path / "nested" / "coefficients.json";
  save_dual(path, arc);

  const auto back = load_dual(path, spec);
  CHECK(back.coefficients.values == arc.coefficients.values);
  CHECK(back.config_hash == "abc123");
  CHECK(back.converged);
  CHECK(back.outer_iterations == 17);
  CHECK(read_text(path).find("abc123") != std::string::npos);

  auto other_n = testing::make_spec(DynamicsKind::double_integrator, 2, 8);
  try {
    load_dual(path, other_n);
    FAIL("expected IncompatibleArtifact");
  } catch (const IncompatibleArtifact& e) {
    CHECK(e.field() == "grid");
  }
  auto other_seed = spec;
  other_seed.map = rff_features(spec.kernel(), spec.map.rank(), 1234);
  try {
    load_dual(path, other_seed);
    FAIL("expected IncompatibleArtifact");
  } catch (const IncompatibleArtifact& e) {
    CHECK(e.field() == "feature_map");
  }
}

TEST_CASE("malformed coefficient files") {
  TempDir dir;
  write_text(dir.path / "bad.json", "{\"format\": \"mfc-coefficients/1\"}");
  CHECK_THROWS_AS(load_dual(dir.path / "bad.json"), std::runtime_error);
  write_text(dir.path / "junk.json", "nope");
  CHECK_THROWS_AS(load_dual(dir.path / "junk.json"), std::runtime_error);
  CHECK_THROWS_AS(load_dual(dir.path / "missing.json"), std::runtime_error);
}

TEST_CASE("feature map files round trip") {
  TempDir dir;
  const auto map = rff_features(KernelSpec{2e5, 1.0, 3}, 50, 5);
  save_feature_map(dir.path / "featuremap.json", map);
  const auto back = load_feature_map(dir.path / "featuremap.json");
  CHECK(back == map);
  CHECK(back.fingerprint() == map.fingerprint());
}

TEST_CASE("trajectory export") {
  TempDir dir;
  const auto model = DynamicsModel::double_integrator();
  const auto grid = TimeGrid::make(1.0, 2);
  Rollout single;
  single.states.push_back(Eigen::MatrixXd::Random(6, 2));
  export_trajectories(single, grid, model.state_names(), dir.path / "one.csv");
  const std::string text = read_text(dir.path / "one.csv");
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
  CHECK(text.rfind("agent,t,", 0) == 0);

  auto spec = testing::make_spec(DynamicsKind::quadrotor, 3, 9);
  const auto th = testing::random_controls(spec, 3, 2);
  const auto z0 = testing::random_states(spec, 3, 3);
  Rollout r = euler_rollout(spec.model, z0, th.agents, spec.grid);
  r.states[1](4, 3) = 1.0 / 7.0;
  export_trajectories(r, spec.grid, spec.model.state_names(), dir.path / "a.csv", "feed");
  export_trajectories(r, spec.grid, spec.model.state_names(), dir.path / "b.csv", "feed");
  CHECK(read_text(dir.path / "a.csv") == read_text(dir.path / "b.csv"));

  const auto table = import_trajectories(dir.path / "a.csv");
  CHECK(table.config_hash == "feed");
  CHECK(table.state_names == spec.model.state_names());
  REQUIRE(table.rollout.states.size() == 3);
  for (int l = 0; l < 3; ++l) CHECK(table.rollout.states[l] == r.states[l]);
  REQUIRE(table.times.size() == 9);
  CHECK(table.times[8] == spec.grid.time(8));

  Rollout wrong;
  wrong.states.push_back(Eigen::MatrixXd::Zero(5, 9));
  CHECK_THROWS(export_trajectories(wrong, spec.grid, spec.model.state_names(), dir.path / "c.csv"));
}

TEST_CASE("trajectory import rejects malformed files") {
  TempDir dir;
  write_text(dir.path / "empty.csv", "");
  CHECK_THROWS_AS(import_trajectories(dir.path / "empty.csv"), std::runtime_error);
  write_text(dir.path / "hdr.csv", "foo,bar\n");
  CHECK_THROWS_AS(import_trajectories(dir.path / "hdr.csv"), std::runtime_error);
  write_text(dir.path / "row.csv", "agent,t,x\n0,0\n");
  CHECK_THROWS_AS(import_trajectories(dir.path / "row.csv"), std::runtime_error);
}

TEST_CASE("history csv") {
  TempDir dir;
  SolveHistory h{{1, 2.5, 3.5, 4.5, 5.5, 0.25}, {2, 0.1, 0.2, 0.3, 0.4, 0.5}};
  write_history_csv(h, dir.path / "history.csv", "cafe");
  const std::string text = read_text(dir.path / "history.csv");
  CHECK(text ==
        "# config_hash=cafe\n"
        "iter,primal_grad_norm,dual_residual_max,Jr_grad_norm,Jr_value,wall_clock_s\n"
        "1,2.5,3.5,4.5,5.5,0.25\n"
        "2,0.1,0.2,0.3,0.4,0.5\n");
}

TEST_CASE("csv writer checks row width") {
  TempDir dir;
  CsvWriter w(dir.path / "t.csv", {"a", "b"});
  w.row({"1", "2"});
  CHECK_THROWS_AS(w.row({"1"}), std::invalid_argument);
  w.close();
  CHECK(read_text(dir.path / "t.csv") == "a,b\n1,2\n");
}
