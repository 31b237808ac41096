// mfc: command-line front end for the mean-field control solver.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfc/bench.hpp"
#include "mfc/config.hpp"
#include "mfc/errors.hpp"
#include "mfc/gradcheck.hpp"
#include "mfc/io.hpp"
#include "mfc/simd/kernels.hpp"
#include "mfc/solvers.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNotConverged = 3;
constexpr int kExitIncompatible = 4;

struct Common {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
  long long seed = -1;
  int workers = -1;
  std::string coefficients;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "Output directory (overrides output.dir)");
  cmd->add_option("--seed", c.seed, "Solver seed (overrides solver.seed)");
  cmd->add_option("--workers", c.workers, "Worker threads (overrides workers)");
  cmd->add_option("--override", c.overrides, "KEY=VALUE with a dotted key; repeatable");
}

mfc::RunConfig load(const Common& c) {
  mfc::RunConfig cfg = mfc::load_run_config(c.config);
  for (const auto& o : c.overrides) cfg.apply_override(o);
  if (!c.out.empty()) cfg.output.dir = c.out;
  if (c.seed >= 0) cfg.solver.seed = static_cast<std::uint64_t>(c.seed);
  if (c.workers >= 0) cfg.workers = c.workers;
  cfg.validate();
  cfg.solver.workers = cfg.effective_workers();
  return cfg;
}

fs::path out_dir(const mfc::RunConfig& cfg) {
  fs::path dir = cfg.output.dir;
  fs::create_directories(dir);
  return dir;
}

void write_config(const mfc::RunConfig& cfg, const fs::path& dir) {
  mfc::write_text(dir / "config.json", cfg.to_json_string() + "\n");
}

void write_controls(const mfc::ControlSchedule& theta, const mfc::TimeGrid& grid,
                    const fs::path& path, const std::string& hash) {
  if (theta.agents.empty()) return;
  std::vector<std::string> header{"agent", "t"};
  for (Eigen::Index i = 0; i < theta.agents.front().rows(); ++i)
    header.push_back("u" + std::to_string(i));
  mfc::CsvWriter csv(path, header, hash);
  for (std::size_t l = 0; l < theta.agents.size(); ++l)
    for (Eigen::Index k = 0; k < theta.agents[l].cols(); ++k) {
      std::vector<std::string> row{std::to_string(l), mfc::format_double(grid.time(static_cast<int>(k)))};
      for (Eigen::Index i = 0; i < theta.agents[l].rows(); ++i)
        row.push_back(mfc::format_double(theta.agents[l](i, k)));
      csv.row(row);
    }
  csv.close();
}

double mean_terminal_distance(const mfc::Rollout& r, const mfc::CostSpec& costs) {
  const mfc::Vec3 target = mfc::spatial(costs.target.data());
  double total = 0.0;
  for (const auto& z : r.states) total += (mfc::spatial(z.col(z.cols() - 1).data()) - target).norm();
  return r.states.empty() ? 0.0 : total / static_cast<double>(r.states.size());
}

mfc::FeatureMap feature_map_for(const mfc::RunConfig& cfg, const fs::path& dir) {
  mfc::FitReport report;
  const bool fits = cfg.kernel.map_path.empty() &&
                    cfg.kernel.backend == mfc::FeatureKind::trained_network;
  if (fits) std::printf("training feature network (%d iterations)\n", cfg.kernel.mlp.iterations);
  mfc::FeatureMap map = mfc::build_feature_map(cfg.kernel, &report);
  if (cfg.output.feature_map) mfc::save_feature_map(dir / "featuremap.json", map);
  return map;
}

void print_record(const mfc::HistoryRecord& h) {
  std::printf("iter %4d  primal %.4e  dual %.4e  Jr_grad %.4e  Jr %.6e  t %.2fs\n", h.iter,
              h.primal_grad_norm, h.dual_residual_max, h.jr_grad_norm, h.jr_value,
              h.wall_clock_s);
  std::fflush(stdout);
}

int cmd_fit_kernel(const Common& c) {
  const mfc::RunConfig cfg = load(c);
  const fs::path dir = out_dir(cfg);
  mfc::FitReport report;
  const mfc::FeatureMap map = mfc::build_feature_map(cfg.kernel, &report);
  mfc::save_feature_map(dir / "featuremap.json", map);
  const mfc::KernelSpec& ks = cfg.kernel.kernel;
  if (map.kind() == mfc::FeatureKind::random_feature) {
    report.validation_mse =
        mfc::validate_kernel_fit(map, ks, cfg.kernel.mlp.validation_pairs, cfg.kernel.seed ^ 0x5bd1e995ULL,
                                 cfg.kernel.mlp.box) /
        (ks.alpha1 * ks.alpha1);
    report.seed = cfg.kernel.seed;
    report.activation = "cos";
  }
  const json doc = {{"backend", std::string(mfc::to_string(map.kind()))},
                    {"rank", map.rank()},
                    {"validation_mse", report.validation_mse},
                    {"gradient_mse", report.gradient_mse},
                    {"num_train_samples", report.num_train_samples},
                    {"num_iterations", report.num_iterations},
                    {"final_loss", report.final_loss},
                    {"seed", report.seed},
                    {"fingerprint", map.fingerprint()},
                    {"config_hash", cfg.hash()}};
  mfc::write_text(dir / "fit_report.json", doc.dump(2) + "\n");
  std::printf("backend %s  r=%d  validation MSE (unit scale) %.6e\n",
              std::string(mfc::to_string(map.kind())).c_str(), map.rank(), report.validation_mse);
  return kExitOk;
}

int cmd_solve(const Common& c) {
  const mfc::RunConfig cfg = load(c);
  const fs::path dir = out_dir(cfg);
  write_config(cfg, dir);
  const std::string hash = cfg.hash();
  const mfc::FeatureMap map = feature_map_for(cfg, dir);
  const mfc::ProblemSpec spec = mfc::build_problem(cfg.problem, map);
  const mfc::InitialStates z0 =
      mfc::sample_initial_conditions(spec.init, spec.agents, spec.init.seed);
  std::printf("solve: %s, N=%d, n=%d, T=%g, simd=%s, workers=%d\n",
              std::string(mfc::to_string(spec.model.kind())).c_str(), spec.agents,
              spec.grid.nodes, spec.grid.horizon,
              std::string(mfc::simd::to_string(mfc::simd::active_level())).c_str(),
              cfg.solver.workers);
  const mfc::SolveResult res = mfc::primal_dual_solve(spec, z0, cfg.solver, [](const auto& h) {
    print_record(h);
    return false;
  });
  const mfc::Rollout rollout = mfc::euler_rollout(spec.model, z0, res.theta.agents, spec.grid);
  if (cfg.output.history) mfc::write_history_csv(res.history, dir / "history.csv", hash);
  if (cfg.output.trajectories) {
    mfc::export_trajectories(rollout, spec.grid, spec.model.state_names(), dir / "trajectories.csv", hash);
    write_controls(res.theta, spec.grid, dir / "controls.csv", hash);
  }
  if (cfg.output.coefficients)
    mfc::save_dual(dir / "coefficients.json", {res.a, hash, res.converged, res.outer_iterations});
  const double dist = mean_terminal_distance(rollout, spec.costs);
  const json summary = {{"converged", res.converged},
                        {"outer_iterations", res.outer_iterations},
                        {"primal_grad_norm", res.status.primal_grad_norm},
                        {"dual_residual_max", res.status.dual_residual_max},
                        {"jr_grad_norm", res.status.jr_grad_norm},
                        {"jr_value", res.status.jr_value},
                        {"mean_terminal_distance", dist},
                        {"config_hash", hash}};
  mfc::write_text(dir / "summary.json", summary.dump(2) + "\n");
  std::printf("%s after %d outer iterations; mean terminal distance %.4f\n",
              res.converged ? "converged" : "NOT converged", res.outer_iterations, dist);
  return res.converged ? kExitOk : kExitNotConverged;
}

int cmd_solve_coupled(const Common& c) {
  const mfc::RunConfig cfg = load(c);
  const fs::path dir = out_dir(cfg);
  write_config(cfg, dir);
  const std::string hash = cfg.hash();
  const mfc::FeatureMap map = feature_map_for(cfg, dir);
  const mfc::ProblemSpec spec = mfc::build_problem(cfg.problem, map);
  const mfc::InitialStates z0 =
      mfc::sample_initial_conditions(spec.init, spec.agents, spec.init.seed);
  mfc::CoupledOptions opts;
  opts.optimizer = cfg.coupled.optimizer;
  opts.model = cfg.coupled.exact_kernel ? mfc::InteractionModel::exact_kernel
                                        : mfc::InteractionModel::features;
  opts.seed = cfg.solver.seed;
  opts.workers = cfg.solver.workers;
  const mfc::CoupledResult res = mfc::coupled_solve(spec, z0, opts);
  const mfc::Rollout rollout = mfc::euler_rollout(spec.model, z0, res.theta.agents, spec.grid);
  if (cfg.output.history) mfc::write_history_csv(res.history, dir / "history_coupled.csv", hash);
  if (cfg.output.trajectories) {
    mfc::export_trajectories(rollout, spec.grid, spec.model.state_names(),
                             dir / "trajectories_coupled.csv", hash);
    write_controls(res.theta, spec.grid, dir / "controls_coupled.csv", hash);
  }
  std::printf("%s after %d iterations; Jr %.6e, |grad Jr| %.4e, mean terminal distance %.4f\n",
              res.converged ? "converged" : "NOT converged", res.iterations, res.value,
              res.grad_norm, mean_terminal_distance(rollout, spec.costs));
  return res.converged ? kExitOk : kExitNotConverged;
}

int cmd_reuse(const Common& c) {
  const mfc::RunConfig cfg = load(c);
  const fs::path dir = out_dir(cfg);
  write_config(cfg, dir);
  const std::string hash = cfg.hash();
  const mfc::FeatureMap map = feature_map_for(cfg, dir);
  const mfc::ProblemSpec spec = mfc::build_problem(cfg.problem, map);
  if (!c.coefficients.empty()) {
    const mfc::CoefficientArchive archive = mfc::load_dual(c.coefficients, spec);
    const mfc::InitialStates z0 =
        mfc::sample_initial_conditions(spec.init, cfg.reuse.eval_size, cfg.reuse.eval_seed);
    const mfc::PrimalUpdateResult pu = mfc::resolve_primal(archive.coefficients, z0, spec, cfg.solver);
    const mfc::Rollout rollout = mfc::euler_rollout(spec.model, z0, pu.theta.agents, spec.grid);
    if (cfg.output.trajectories)
      mfc::export_trajectories(rollout, spec.grid, spec.model.state_names(),
                               dir / "trajectories_reuse.csv", hash);
    const bool ok = pu.grad_norm() <= cfg.solver.eps_tol;
    std::printf("primal re-solve for %d agents: stacked gradient %.4e (%s); mean terminal distance %.4f\n",
                cfg.reuse.eval_size, pu.grad_norm(), ok ? "optimal" : "not optimal",
                mean_terminal_distance(rollout, spec.costs));
    return ok ? kExitOk : kExitNotConverged;
  }
  const mfc::ReuseStudy study = mfc::reuse_study(cfg.reuse.source_sizes, cfg.reuse.eval_size,
                                                 cfg.reuse.eval_seed, spec, cfg.solver);
  mfc::write_reuse_csv(study, dir / "reuse.csv", hash);
  bool all = true;
  for (const auto& r : study.reports) {
    std::printf("a*(N=%d) on %d agents: trajectory diff %.4e, coefficient diff %.4e\n", r.source_n,
                r.eval_n, r.rel_traj_diff, r.rel_coeff_diff);
    all = all && r.source_converged && r.primal_converged;
  }
  return all ? kExitOk : kExitNotConverged;
}

int cmd_bench(const Common& c) {
  const mfc::RunConfig cfg = load(c);
  const fs::path dir = out_dir(cfg);
  const mfc::FeatureMap map = feature_map_for(cfg, dir);
  const mfc::InteractionBench bench = mfc::bench_interaction(
      cfg.bench.sizes, map, cfg.bench.repetitions, cfg.bench.seed, 1);
  mfc::write_bench_csv(bench, dir / "bench_interaction.csv", cfg.hash());
  for (const auto& r : bench.records)
    std::printf("%-8s N=%6d  %.4e s\n", r.label.c_str(), r.n, r.seconds);
  std::printf("log-log slope: direct %.3f, features %.3f\n", bench.direct_slope, bench.feature_slope);
  return kExitOk;
}

int cmd_race(const Common& c) {
  mfc::RunConfig cfg = load(c);
  const fs::path dir = out_dir(cfg);
  write_config(cfg, dir);
  const std::string hash = cfg.hash();
  const mfc::FeatureMap map = feature_map_for(cfg, dir);
  const mfc::ProblemSpec spec = mfc::build_problem(cfg.problem, map, cfg.race.agents);
  const mfc::InitialStates z0 =
      mfc::sample_initial_conditions(spec.init, cfg.race.agents, spec.init.seed);
  mfc::CoupledOptions copts;
  copts.optimizer = cfg.coupled.optimizer;
  copts.seed = cfg.solver.seed;
  copts.workers = cfg.solver.workers;
  const mfc::RaceReport race = mfc::solver_race(spec, z0, cfg.solver, copts, cfg.race.runs,
                                                cfg.race.threshold, cfg.race.exact_kernel);
  mfc::write_race_csv(race, dir / "race.csv", hash);
  bool all = true;
  for (const auto& e : race.entries) {
    mfc::write_history_csv(e.history, dir / ("race_history_" + e.solver + ".csv"), hash);
    std::printf("%-14s %s %.3f s\n", e.solver.c_str(), e.reached ? "reached threshold in" : "did NOT reach threshold;",
                e.time_to_threshold_s);
    all = all && e.reached;
  }
  std::printf("primal-dual %s the coupled approach\n",
              race.primal_dual_not_slower() ? "is not slower than" : "is slower than");
  return all ? kExitOk : kExitNotConverged;
}

int cmd_check_grad(const Common& c) {
  const mfc::RunConfig cfg = load(c);
  const fs::path dir = out_dir(cfg);
  const mfc::FeatureMap map = feature_map_for(cfg, dir);
  const mfc::GradCheckReport report = mfc::run_gradient_checks(map, 20, cfg.solver.seed);
  mfc::CsvWriter csv(dir / "gradcheck.csv", {"quantity", "dynamics", "instance", "rel_error"}, cfg.hash());
  for (const auto& r : report.results)
    csv.row({r.quantity, std::string(mfc::to_string(r.dynamics)), std::to_string(r.instance),
             mfc::format_double(r.rel_error)});
  csv.close();
  constexpr double tol = 1e-5;
  std::printf("%zu gradient checks, worst relative error %.3e (tolerance %.0e)\n",
              report.results.size(), report.worst(), tol);
  return report.passed(tol) ? kExitOk : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field control with kernel feature expansions"};
  app.require_subcommand(1);
  Common common;
  struct Entry {
    const char* name;
    const char* help;
    int (*run)(const Common&);
  };
  const Entry entries[] = {
      {"fit-kernel", "Build or train the kernel feature map", cmd_fit_kernel},
      {"solve", "Primal-dual solve", cmd_solve},
      {"solve-coupled", "Joint minimization of the feature-expanded objective", cmd_solve_coupled},
      {"reuse", "Primal-only re-solve with saved coefficients, or the reuse study", cmd_reuse},
      {"bench-interaction", "Time the exact and feature interaction evaluators", cmd_bench},
      {"race", "Primal-dual against coupled wall clock", cmd_race},
      {"check-grad", "Finite-difference gradient checks", cmd_check_grad},
  };
  std::vector<std::pair<CLI::App*, int (*)(const Common&)>> cmds;
  for (const auto& e : entries) {
    CLI::App* cmd = app.add_subcommand(e.name, e.help);
    add_common(cmd, common);
    if (std::string(e.name) == "reuse")
      cmd->add_option("--coefficients", common.coefficients, "Saved coefficients to reuse")
          ->check(CLI::ExistingFile);
    cmds.emplace_back(cmd, e.run);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }
  try {
    for (const auto& [cmd, run] : cmds)
      if (cmd->parsed()) return run(common);
  } catch (const mfc::IncompatibleArtifact& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIncompatible;
  } catch (const mfc::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitUsage;
}
