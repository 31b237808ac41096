#include "mfc/config.hpp"

#include <charconv>
#include <set>

#include "json.hpp"
#include "mfc/errors.hpp"
#include "mfc/hash.hpp"
#include "mfc/io.hpp"
#include "mfc/parallel.hpp"

namespace mfc {

using nlohmann::json;

namespace {

// Rejects keys of `obj` that are not listed.
void check_keys(const json& obj, std::string_view where,
                std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + std::string(where) + "." + key + "'");
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, std::string_view where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("wrong type for '" + std::string(where) + "." + key + "'");
  }
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }
json vec3_json(const Vec3& v) { return std::vector<double>{v[0], v[1], v[2]}; }

Eigen::VectorXd read_vec(const json& j, std::string_view where) {
  std::vector<double> v;
  try {
    v = j.get<std::vector<double>>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(where) + " must be a list of numbers");
  }
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Vec3 read_vec3(const json& j, std::string_view where) {
  const Eigen::VectorXd v = read_vec(j, where);
  if (v.size() != 3) throw ConfigError(std::string(where) + " must have 3 entries");
  return v;
}

json optimizer_json(const OptimizerOptions& o) {
  return {{"method", std::string(to_string(o.method))},
          {"max_iters", o.max_iters},
          {"memory", o.memory},
          {"c1", o.c1},
          {"c2", o.c2},
          {"max_backtracks", o.max_backtracks},
          {"step", o.step},
          {"grad_tol", o.grad_tol}};
}

OptimizerOptions optimizer_from(const json& j, const std::string& where) {
  check_keys(j, where,
             {"method", "max_iters", "memory", "c1", "c2", "max_backtracks", "step", "grad_tol"});
  OptimizerOptions o;
  std::string method = std::string(to_string(o.method));
  read(j, "method", method, where);
  o.method = method_from_string(method);
  read(j, "max_iters", o.max_iters, where);
  read(j, "memory", o.memory, where);
  read(j, "c1", o.c1, where);
  read(j, "c2", o.c2, where);
  read(j, "max_backtracks", o.max_backtracks, where);
  read(j, "step", o.step, where);
  read(j, "grad_tol", o.grad_tol, where);
  return o;
}

json obstacles_json(const ObstacleField& field) {
  json boxes = json::array();
  for (const auto& b : field.boxes)
    boxes.push_back({{"lo", vec3_json(b.lo)},
                     {"hi", vec3_json(b.hi)},
                     {"mean", vec3_json(b.mean)},
                     {"cov_diag", vec3_json(b.cov_diag)}});
  return boxes;
}

ObstacleField obstacles_from(const json& j) {
  if (j.is_string()) {
    if (j == "two_boxes") return ObstacleField::two_boxes();
    if (j == "none") return {};
    throw ConfigError("problem.costs.obstacles must be \"two_boxes\", \"none\" or a list");
  }
  if (!j.is_array()) throw ConfigError("problem.costs.obstacles must be a list");
  ObstacleField field;
  for (const auto& b : j) {
    check_keys(b, "problem.costs.obstacles[]", {"lo", "hi", "mean", "cov_diag"});
    ObstacleBox box;
    box.lo = read_vec3(b.at("lo"), "obstacle lo");
    box.hi = read_vec3(b.at("hi"), "obstacle hi");
    box.mean = read_vec3(b.at("mean"), "obstacle mean");
    box.cov_diag = read_vec3(b.at("cov_diag"), "obstacle cov_diag");
    field.boxes.push_back(box);
  }
  return field;
}

json mlp_json(const MlpFitConfig& m) {
  return {{"hidden", m.hidden},
          {"samples", m.samples},
          {"iterations", m.iterations},
          {"batch", m.batch},
          {"step", m.step},
          {"decay_every", m.decay_every},
          {"decay_factor", m.decay_factor},
          {"grad_penalty", m.grad_penalty},
          {"box", m.box},
          {"validation_pairs", m.validation_pairs}};
}

json to_json(const RunConfig& c) {
  const auto& p = c.problem;
  json kr = "identity";
  if (c.kernel.kr) {
    kr = json::array();
    for (Eigen::Index i = 0; i < c.kernel.kr->rows(); ++i)
      kr.push_back(vec_json(c.kernel.kr->row(i).transpose()));
  }
  return {
      {"problem",
       {{"dynamics", std::string(to_string(p.dynamics))},
        {"quadrotor", {{"mass", p.quadrotor.mass}, {"gravity", p.quadrotor.gravity}}},
        {"horizon", p.grid.horizon},
        {"nodes", p.grid.nodes},
        {"agents", p.agents},
        {"costs",
         {{"alpha2", p.costs.alpha2},
          {"alpha3", p.costs.alpha3},
          {"target", vec_json(p.costs.target)},
          {"obstacles", obstacles_json(p.costs.obstacles)}}},
        {"init",
         {{"mean", vec_json(p.init.mean)},
          {"variance", p.init.variance},
          {"noisy_dims", p.init.noisy_dims},
          {"seed", p.init.seed}}}}},
      {"kernel",
       {{"alpha1", c.kernel.kernel.alpha1},
        {"bandwidth", c.kernel.kernel.bandwidth},
        {"backend", std::string(to_string(c.kernel.backend))},
        {"rank", c.kernel.rank},
        {"seed", c.kernel.seed},
        {"mlp", mlp_json(c.kernel.mlp)},
        {"map_path", c.kernel.map_path},
        {"Kr", kr}}},
      {"solver",
       {{"gamma", c.solver.gamma ? json(*c.solver.gamma) : json(nullptr)},
        {"inner", optimizer_json(c.solver.inner)},
        {"polish", c.solver.polish ? optimizer_json(*c.solver.polish) : json(nullptr)},
        {"max_outer_iters", c.solver.max_outer_iters},
        {"eps_tol", c.solver.eps_tol},
        {"seed", c.solver.seed}}},
      {"coupled",
       {{"optimizer", optimizer_json(c.coupled.optimizer)},
        {"exact_kernel", c.coupled.exact_kernel}}},
      {"bench",
       {{"sizes", c.bench.sizes}, {"repetitions", c.bench.repetitions}, {"seed", c.bench.seed}}},
      {"reuse",
       {{"source_sizes", c.reuse.source_sizes},
        {"eval_size", c.reuse.eval_size},
        {"eval_seed", c.reuse.eval_seed}}},
      {"race",
       {{"agents", c.race.agents},
        {"runs", c.race.runs},
        {"threshold", c.race.threshold},
        {"exact_kernel", c.race.exact_kernel}}},
      {"output",
       {{"dir", c.output.dir},
        {"trajectories", c.output.trajectories},
        {"history", c.output.history},
        {"coefficients", c.output.coefficients},
        {"feature_map", c.output.feature_map}}},
      {"workers", c.workers}};
}

RunConfig from_json(const json& j) {
  RunConfig c = RunConfig::defaults();
  check_keys(j, "config",
             {"problem", "kernel", "solver", "coupled", "bench", "reuse", "race", "output",
              "workers"});
  read(j, "workers", c.workers, "config");

  if (j.contains("problem")) {
    const json& p = j["problem"];
    check_keys(p, "problem",
               {"dynamics", "quadrotor", "horizon", "nodes", "agents", "costs", "init"});
    auto& pc = c.problem;
    if (p.contains("dynamics")) {
      std::string name;
      read(p, "dynamics", name, "problem");
      pc.dynamics = dynamics_kind_from_string(name);
    }
    if (p.contains("quadrotor")) {
      check_keys(p["quadrotor"], "problem.quadrotor", {"mass", "gravity"});
      read(p["quadrotor"], "mass", pc.quadrotor.mass, "problem.quadrotor");
      read(p["quadrotor"], "gravity", pc.quadrotor.gravity, "problem.quadrotor");
    }
    read(p, "horizon", pc.grid.horizon, "problem");
    read(p, "nodes", pc.grid.nodes, "problem");
    read(p, "agents", pc.agents, "problem");
    if (p.contains("costs")) {
      const json& cs = p["costs"];
      check_keys(cs, "problem.costs", {"alpha2", "alpha3", "target", "obstacles"});
      read(cs, "alpha2", pc.costs.alpha2, "problem.costs");
      read(cs, "alpha3", pc.costs.alpha3, "problem.costs");
      if (cs.contains("target")) pc.costs.target = read_vec(cs["target"], "problem.costs.target");
      if (cs.contains("obstacles")) pc.costs.obstacles = obstacles_from(cs["obstacles"]);
    }
    if (p.contains("init")) {
      const json& in = p["init"];
      check_keys(in, "problem.init", {"mean", "variance", "noisy_dims", "seed"});
      if (in.contains("mean")) pc.init.mean = read_vec(in["mean"], "problem.init.mean");
      read(in, "variance", pc.init.variance, "problem.init");
      read(in, "noisy_dims", pc.init.noisy_dims, "problem.init");
      read(in, "seed", pc.init.seed, "problem.init");
    }
  }

  if (j.contains("kernel")) {
    const json& k = j["kernel"];
    check_keys(k, "kernel",
               {"alpha1", "bandwidth", "backend", "rank", "seed", "mlp", "map_path", "Kr"});
    auto& kc = c.kernel;
    read(k, "alpha1", kc.kernel.alpha1, "kernel");
    read(k, "bandwidth", kc.kernel.bandwidth, "kernel");
    if (k.contains("backend")) {
      std::string name;
      read(k, "backend", name, "kernel");
      kc.backend = feature_kind_from_string(name);
    }
    read(k, "rank", kc.rank, "kernel");
    read(k, "seed", kc.seed, "kernel");
    read(k, "map_path", kc.map_path, "kernel");
    if (k.contains("mlp")) {
      const json& m = k["mlp"];
      check_keys(m, "kernel.mlp",
                 {"hidden", "samples", "iterations", "batch", "step", "decay_every",
                  "decay_factor", "grad_penalty", "box", "validation_pairs"});
      auto& mc = kc.mlp;
      read(m, "hidden", mc.hidden, "kernel.mlp");
      read(m, "samples", mc.samples, "kernel.mlp");
      read(m, "iterations", mc.iterations, "kernel.mlp");
      read(m, "batch", mc.batch, "kernel.mlp");
      read(m, "step", mc.step, "kernel.mlp");
      read(m, "decay_every", mc.decay_every, "kernel.mlp");
      read(m, "decay_factor", mc.decay_factor, "kernel.mlp");
      read(m, "grad_penalty", mc.grad_penalty, "kernel.mlp");
      read(m, "box", mc.box, "kernel.mlp");
      read(m, "validation_pairs", mc.validation_pairs, "kernel.mlp");
    }
    if (k.contains("Kr")) {
      const json& kr = k["Kr"];
      if (kr.is_string()) {
        if (kr != "identity") throw ConfigError("kernel.Kr must be \"identity\" or a matrix");
        kc.kr.reset();
      } else {
        if (!kr.is_array() || kr.empty()) throw ConfigError("kernel.Kr must be a matrix");
        const auto rows = static_cast<Eigen::Index>(kr.size());
        Eigen::MatrixXd m(rows, rows);
        for (Eigen::Index i = 0; i < rows; ++i) {
          const Eigen::VectorXd row = read_vec(kr[i], "kernel.Kr row");
          if (row.size() != rows) throw ConfigError("kernel.Kr must be square");
          m.row(i) = row.transpose();
        }
        kc.kr = m;
      }
    }
  }

  if (j.contains("solver")) {
    const json& s = j["solver"];
    check_keys(s, "solver", {"gamma", "inner", "polish", "max_outer_iters", "eps_tol", "seed"});
    auto& so = c.solver;
    if (s.contains("gamma")) {
      if (s["gamma"].is_null()) {
        so.gamma.reset();
      } else {
        double g = 0.0;
        read(s, "gamma", g, "solver");
        so.gamma = g;
      }
    }
    if (s.contains("inner")) so.inner = optimizer_from(s["inner"], "solver.inner");
    if (s.contains("polish")) {
      if (s["polish"].is_null())
        so.polish.reset();
      else
        so.polish = optimizer_from(s["polish"], "solver.polish");
    }
    read(s, "max_outer_iters", so.max_outer_iters, "solver");
    read(s, "eps_tol", so.eps_tol, "solver");
    read(s, "seed", so.seed, "solver");
  }

  if (j.contains("coupled")) {
    const json& s = j["coupled"];
    check_keys(s, "coupled", {"optimizer", "exact_kernel"});
    if (s.contains("optimizer"))
      c.coupled.optimizer = optimizer_from(s["optimizer"], "coupled.optimizer");
    read(s, "exact_kernel", c.coupled.exact_kernel, "coupled");
  }
  if (j.contains("bench")) {
    const json& s = j["bench"];
    check_keys(s, "bench", {"sizes", "repetitions", "seed"});
    read(s, "sizes", c.bench.sizes, "bench");
    read(s, "repetitions", c.bench.repetitions, "bench");
    read(s, "seed", c.bench.seed, "bench");
  }
  if (j.contains("reuse")) {
    const json& s = j["reuse"];
    check_keys(s, "reuse", {"source_sizes", "eval_size", "eval_seed"});
    read(s, "source_sizes", c.reuse.source_sizes, "reuse");
    read(s, "eval_size", c.reuse.eval_size, "reuse");
    read(s, "eval_seed", c.reuse.eval_seed, "reuse");
  }
  if (j.contains("race")) {
    const json& s = j["race"];
    check_keys(s, "race", {"agents", "runs", "threshold", "exact_kernel"});
    read(s, "agents", c.race.agents, "race");
    read(s, "runs", c.race.runs, "race");
    read(s, "threshold", c.race.threshold, "race");
    read(s, "exact_kernel", c.race.exact_kernel, "race");
  }
  if (j.contains("output")) {
    const json& s = j["output"];
    check_keys(s, "output", {"dir", "trajectories", "history", "coefficients", "feature_map"});
    read(s, "dir", c.output.dir, "output");
    read(s, "trajectories", c.output.trajectories, "output");
    read(s, "history", c.output.history, "output");
    read(s, "coefficients", c.output.coefficients, "output");
    read(s, "feature_map", c.output.feature_map, "output");
  }
  c.validate();
  return c;
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig c;
  auto& p = c.problem;
  p.grid = TimeGrid::make(5.0, 50);
  p.agents = 100;
  p.costs.alpha2 = 1e7;
  p.costs.alpha3 = 1e4;
  p.costs.target = Eigen::VectorXd::Zero(6);
  p.costs.target[2] = 7.0;
  p.costs.obstacles = ObstacleField::two_boxes();
  p.init.mean = Eigen::VectorXd::Zero(6);
  p.init.mean[1] = -0.5;
  p.init.variance = 0.8;
  p.init.noisy_dims = -1;
  p.init.seed = 7;
  c.kernel.kernel = KernelSpec{2e5, 1.0, 3};
  c.solver.inner.max_iters = 250;
  c.solver.inner.grad_tol = 1e-3;
  c.coupled.optimizer.max_iters = 2000;
  c.coupled.optimizer.grad_tol = 0.5;
  return c;
}

RunConfig RunConfig::from_json_string(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

std::string RunConfig::to_json_string() const { return to_json(*this).dump(2); }

void RunConfig::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("override must be KEY=VALUE: " + std::string(assignment));
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json doc = to_json(*this);
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (!node->is_object() || !node->contains(part))
      throw ConfigError("unknown key '" + key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = value;
  *this = from_json(doc);
}

std::string RunConfig::hash() const {
  json j = to_json(*this);
  j["output"].erase("dir");
  return hex64(fnv1a64(j.dump()));
}

int RunConfig::effective_workers() const { return workers > 0 ? workers : default_workers(); }

void RunConfig::validate() const {
  if (workers < 0) throw ConfigError("workers must be >= 0");
  const DynamicsModel model = problem.dynamics == DynamicsKind::quadrotor
                                  ? DynamicsModel::quadrotor(problem.quadrotor)
                                  : DynamicsModel::double_integrator();
  if (problem.agents < 1) throw ConfigError("problem.agents must be >= 1");
  if (problem.grid.nodes < 2 || !(problem.grid.horizon > 0.0))
    throw ConfigError("problem.horizon must be > 0 and problem.nodes >= 2");
  if (!(problem.quadrotor.mass > 0.0)) throw ConfigError("problem.quadrotor.mass must be > 0");
  problem.costs.validate(model.state_dim());
  if (problem.init.mean.size() != model.state_dim())
    throw ConfigError("problem.init.mean must have the state dimension");
  if (problem.init.variance < 0.0) throw ConfigError("problem.init.variance must be >= 0");
  kernel.kernel.validate();
  if (kernel.rank < 1) throw ConfigError("kernel.rank must be >= 1");
  if (kernel.kr && kernel.kr->rows() != kernel.rank)
    throw ConfigError("kernel.Kr must be rank x rank");
  if (kernel.backend == FeatureKind::trained_network) kernel.mlp.validate();
  solver.validate();
  coupled.optimizer.validate();
  if (bench.sizes.empty() || bench.repetitions < 3)
    throw ConfigError("bench needs sizes and at least 3 repetitions");
  for (const int n : bench.sizes)
    if (n < 1) throw ConfigError("bench.sizes must be >= 1");
  if (reuse.source_sizes.empty() || reuse.eval_size < 1)
    throw ConfigError("reuse needs source sizes and eval_size >= 1");
  for (const int n : reuse.source_sizes)
    if (n < 1) throw ConfigError("reuse.source_sizes must be >= 1");
  if (race.agents < 1 || race.runs < 1 || !(race.threshold > 0.0))
    throw ConfigError("race needs agents >= 1, runs >= 1 and threshold > 0");
}

RunConfig load_run_config(const std::string& path) {
  return RunConfig::from_json_string(read_text(path));
}

FeatureMap build_feature_map(const KernelConfig& cfg, FitReport* report) {
  FeatureMap map = [&] {
    if (!cfg.map_path.empty()) {
      FeatureMap loaded = load_feature_map(cfg.map_path);
      if (!(loaded.kernel() == cfg.kernel) || loaded.rank() != cfg.rank)
        throw IncompatibleArtifact("feature_map", "saved map does not match the kernel section");
      return loaded;
    }
    if (cfg.backend == FeatureKind::random_feature)
      return rff_features(cfg.kernel, cfg.rank, cfg.seed);
    MlpFitConfig mc = cfg.mlp;
    mc.rank = cfg.rank;
    auto [fitted, rep] = fit_mlp_features(cfg.kernel, mc, cfg.seed);
    if (report) *report = rep;
    return fitted;
  }();
  if (cfg.kr) map = map.with_kr(*cfg.kr);
  return map;
}

ProblemSpec build_problem(const ProblemConfig& cfg, const FeatureMap& map) {
  return build_problem(cfg, map, cfg.agents);
}

ProblemSpec build_problem(const ProblemConfig& cfg, const FeatureMap& map, int agents) {
  ProblemSpec spec{cfg.dynamics == DynamicsKind::quadrotor
                       ? DynamicsModel::quadrotor(cfg.quadrotor)
                       : DynamicsModel::double_integrator(),
                   cfg.grid,
                   cfg.costs,
                   map,
                   cfg.init,
                   agents};
  spec.validate();
  return spec;
}

}  // namespace mfc
