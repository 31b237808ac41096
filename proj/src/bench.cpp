#include "mfc/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "mfc/costs.hpp"
#include "mfc/errors.hpp"
#include "mfc/io.hpp"

namespace mfc {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Per-evaluation seconds: the inner count doubles until one batch lasts
// min_seconds, then the minimum over repetitions is kept.
template <class Fn>
double time_per_eval(Fn&& fn, int repetitions, double min_seconds) {
  volatile double sink = 0.0;
  int inner = 1;
  for (;;) {
    const auto start = Clock::now();
    for (int i = 0; i < inner; ++i) sink = sink + fn();
    if (elapsed(start) >= min_seconds || inner >= (1 << 24)) break;
    inner *= 2;
  }
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < repetitions; ++r) {
    const auto start = Clock::now();
    for (int i = 0; i < inner; ++i) sink = sink + fn();
    best = std::min(best, elapsed(start) / inner);
  }
  return std::max(best, std::numeric_limits<double>::min());
}

}  // namespace

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("slope inputs differ in length");
  if (x.size() < 2) return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

InteractionBench bench_interaction(std::span<const int> sizes, const FeatureMap& map,
                                   int repetitions, std::uint64_t seed, int workers,
                                   double min_seconds) {
  if (sizes.empty()) throw ConfigError("bench needs at least one size");
  if (repetitions < 3) throw ConfigError("bench needs at least 3 repetitions");
  InteractionBench out;
  std::vector<double> ns, direct, feats;
  for (const int n : sizes) {
    if (n < 1) throw ConfigError("bench sizes must be >= 1");
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(n));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Vec3> pos(n);
    for (auto& p : pos) p = Vec3(normal(rng), normal(rng), normal(rng));
    const double td = time_per_eval([&] { return interaction_direct(pos, map.kernel()); },
                                    repetitions, min_seconds);
    const double tf = time_per_eval([&] { return interaction_features(pos, map); },
                                    repetitions, min_seconds);
    out.records.push_back({"direct", n, repetitions, td, workers});
    out.records.push_back({"features", n, repetitions, tf, workers});
    ns.push_back(n);
    direct.push_back(td);
    feats.push_back(tf);
  }
  out.direct_slope = loglog_slope(ns, direct);
  out.feature_slope = loglog_slope(ns, feats);
  return out;
}

double relative_difference(const Rollout& a, const Rollout& reference) {
  if (a.states.size() != reference.states.size())
    throw std::invalid_argument("rollouts have different agent counts");
  double num = 0.0, den = 0.0;
  for (std::size_t l = 0; l < a.states.size(); ++l) {
    num += (a.states[l] - reference.states[l]).squaredNorm();
    den += reference.states[l].squaredNorm();
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

double relative_difference(const Eigen::MatrixXd& a, const Eigen::MatrixXd& reference) {
  const double den = reference.norm();
  const double num = (a - reference).norm();
  return den > 0.0 ? num / den : num;
}

PrimalUpdateResult resolve_primal(const DualCoefficients& a, std::span<const Eigen::VectorXd> z0,
                                  const ProblemSpec& spec, const PrimalDualOptions& opts) {
  const ControlSchedule warm =
      random_initialization(spec, static_cast<int>(z0.size()), opts.seed).first;
  return primal_update(a, warm, z0, spec, opts.inner, opts.polish, opts.workers);
}

ReuseStudy reuse_study(std::span<const int> source_sizes, int eval_n, std::uint64_t eval_seed,
                       const ProblemSpec& spec, const PrimalDualOptions& opts) {
  if (source_sizes.empty() || eval_n < 1) throw ConfigError("reuse needs sources and eval_n >= 1");
  const InitialStates eval_z0 = sample_initial_conditions(spec.init, eval_n, eval_seed);

  auto fit = [&](int n) {
    const InitialStates z0 = sample_initial_conditions(spec.init, n, spec.init.seed);
    return primal_dual_solve(spec, z0, opts);
  };
  auto rollout_for = [&](const DualCoefficients& a, bool& ok) {
    const PrimalUpdateResult pu = resolve_primal(a, eval_z0, spec, opts);
    ok = pu.grad_norm() <= opts.eps_tol;
    return euler_rollout(spec.model, eval_z0, pu.theta.agents, spec.grid);
  };

  ReuseStudy study;
  const SolveResult ref = fit(eval_n);
  study.reference = ref.a;
  bool ref_ok = false;
  const Rollout ref_rollout = rollout_for(ref.a, ref_ok);

  for (const int n : source_sizes) {
    if (n == eval_n) continue;
    ReuseReport rep;
    rep.source_n = n;
    rep.eval_n = eval_n;
    const SolveResult src = fit(n);
    rep.source_converged = src.converged;
    bool ok = false;
    rep.rel_traj_diff = relative_difference(rollout_for(src.a, ok), ref_rollout);
    rep.primal_converged = ok;
    rep.rel_coeff_diff = relative_difference(src.a.values, ref.a.values);
    study.reports.push_back(rep);
  }
  ReuseReport self;
  self.source_n = eval_n;
  self.eval_n = eval_n;
  self.source_converged = ref.converged;
  bool ok = false;
  self.rel_traj_diff = relative_difference(rollout_for(ref.a, ok), ref_rollout);
  self.primal_converged = ok;
  self.rel_coeff_diff = relative_difference(ref.a.values, ref.a.values);
  study.reports.push_back(self);
  return study;
}

bool RaceReport::primal_dual_not_slower() const {
  const RaceEntry* pd = nullptr;
  const RaceEntry* cp = nullptr;
  for (const auto& e : entries) {
    if (e.solver == "primal_dual") pd = &e;
    if (e.solver == "coupled") cp = &e;
  }
  if (!pd || !cp || !pd->reached) return false;
  return !cp->reached || pd->time_to_threshold_s <= cp->time_to_threshold_s;
}

RaceReport solver_race(const ProblemSpec& spec, std::span<const Eigen::VectorXd> z0,
                       const PrimalDualOptions& pd, const CoupledOptions& coupled, int runs,
                       double threshold, bool include_exact) {
  if (runs < 1) throw ConfigError("race needs at least one run");
  if (!(threshold > 0.0)) throw ConfigError("race threshold must be > 0");
  RaceReport report;
  report.threshold = threshold;

  auto keep_fastest = [](RaceEntry& best, bool reached, double t, SolveHistory history) {
    const bool better = (reached && !best.reached) ||
                        (reached == best.reached && t < best.time_to_threshold_s) ||
                        best.history.empty();
    if (better) {
      best.reached = reached;
      best.time_to_threshold_s = t;
      best.history = std::move(history);
    }
  };

  RaceEntry pd_entry{"primal_dual", false, std::numeric_limits<double>::infinity(), {}};
  for (int r = 0; r < runs; ++r) {
    const SolveResult res = primal_dual_solve(
        spec, z0, pd, [&](const HistoryRecord& h) { return h.jr_grad_norm <= threshold; });
    const HistoryRecord& last = res.history.empty() ? HistoryRecord{} : res.history.back();
    const bool reached = !res.history.empty() && last.jr_grad_norm <= threshold;
    keep_fastest(pd_entry, reached, last.wall_clock_s, res.history);
  }
  report.entries.push_back(std::move(pd_entry));

  auto run_coupled = [&](const char* name, InteractionModel model) {
    CoupledOptions opts = coupled;
    opts.model = model;
    opts.optimizer.grad_tol = threshold;
    RaceEntry entry{name, false, std::numeric_limits<double>::infinity(), {}};
    for (int r = 0; r < runs; ++r) {
      const CoupledResult res = coupled_solve(spec, z0, opts);
      const double t = res.history.empty() ? 0.0 : res.history.back().wall_clock_s;
      keep_fastest(entry, res.converged, t, res.history);
    }
    report.entries.push_back(std::move(entry));
  };
  run_coupled("coupled", InteractionModel::features);
  if (include_exact) run_coupled("coupled_exact", InteractionModel::exact_kernel);
  return report;
}

void write_bench_csv(const InteractionBench& bench, const std::filesystem::path& path,
                     const std::string& config_hash) {
  CsvWriter csv(path, {"method", "N", "seconds", "repetitions", "workers"}, config_hash);
  for (const auto& r : bench.records)
    csv.row({r.label, std::to_string(r.n), format_double(r.seconds),
             std::to_string(r.repetitions), std::to_string(r.workers)});
  csv.close();
}

void write_reuse_csv(const ReuseStudy& study, const std::filesystem::path& path,
                     const std::string& config_hash) {
  CsvWriter csv(path,
                {"source_N", "eval_N", "rel_traj_diff", "rel_coeff_diff", "source_converged",
                 "primal_converged"},
                config_hash);
  for (const auto& r : study.reports)
    csv.row({std::to_string(r.source_n), std::to_string(r.eval_n),
             format_double(r.rel_traj_diff), format_double(r.rel_coeff_diff),
             r.source_converged ? "1" : "0", r.primal_converged ? "1" : "0"});
  csv.close();
}

void write_race_csv(const RaceReport& race, const std::filesystem::path& path,
                    const std::string& config_hash) {
  CsvWriter csv(path, {"solver", "time_to_threshold_s", "reached"}, config_hash);
  for (const auto& e : race.entries)
    csv.row({e.solver, format_double(e.time_to_threshold_s), e.reached ? "1" : "0"});
  csv.close();
}

}  // namespace mfc
