#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "extra_lab/analysis.hpp"
#include "extra_lab/config.hpp"
#include "extra_lab/graph.hpp"
#include "extra_lab/io.hpp"
#include "extra_lab/mixing.hpp"
#include "extra_lab/objectives.hpp"
#include "extra_lab/rng.hpp"
#include "extra_lab/solvers.hpp"

namespace extra_lab {

/// Consensual stationary points of f = sum_i f_i found by multi-start Newton.
struct TargetSet {
  std::vector<Vector> minimizers;  // second-order
  std::vector<Vector> saddles;     // strict saddles
};

namespace detail {

inline ordered_json vector_json(const Vector& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline bool lex_less(const Vector& a, const Vector& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a(i) != b(i)) return a(i) < b(i);
  return false;
}

/// Damped Newton on grad f = 0 with backtracking on ||grad f||.
inline std::optional<Vector> newton_root(const ObjectiveSet& obj, Vector x) {
  constexpr double tol = 1e-11;
  Vector g = obj.aggregate_gradient(x);
  for (int it = 0; it < 100; ++it) {
    const double gn = g.norm();
    if (gn <= tol) return x;
    if (!std::isfinite(gn) || x.norm() > 1e6) return std::nullopt;
    Vector step = obj.aggregate_hessian(x).fullPivLu().solve(g);
    if (!step.allFinite()) step = g;
    double t = 1.0;
    Vector trial = x - step;
    Vector g_trial = obj.aggregate_gradient(trial);
    while (!(g_trial.norm() < gn) && t > 1e-10) {
      t *= 0.5;
      trial = x - t * step;
      g_trial = obj.aggregate_gradient(trial);
    }
    if (!(g_trial.norm() < gn)) return std::nullopt;
    x = std::move(trial);
    g = std::move(g_trial);
  }
  return g.norm() <= tol ? std::optional<Vector>(x) : std::nullopt;
}

}  // namespace detail

/// Starts: a grid over [-radius, radius]^n for n <= 3, otherwise 256 seeded
/// uniform draws, plus the origin.
inline TargetSet find_targets(const ObjectiveSet& obj, double radius, ClassifyTolerances tol = {}) {
  require(radius > 0.0, ErrorKind::parameter, "target search radius must be positive");
  const std::size_t n = obj.dim();
  std::vector<Vector> starts{Vector::Zero(static_cast<Eigen::Index>(n))};
  if (n <= 3) {
    const int per_axis = n == 1 ? 41 : n == 2 ? 17 : 9;
    std::size_t total = 1;
    for (std::size_t d = 0; d < n; ++d) total *= static_cast<std::size_t>(per_axis);
    for (std::size_t idx = 0; idx < total; ++idx) {
      Vector s(static_cast<Eigen::Index>(n));
      std::size_t rest = idx;
      for (std::size_t d = 0; d < n; ++d) {
        const auto c = static_cast<double>(rest % per_axis);
        rest /= per_axis;
        s(static_cast<Eigen::Index>(d)) = -radius + 2.0 * radius * c / (per_axis - 1);
      }
      starts.push_back(std::move(s));
    }
  } else {
    PhiloxStream rng(0, 0, RngDomain::search);
    for (int i = 0; i < 256; ++i) {
      Vector s(static_cast<Eigen::Index>(n));
      for (Eigen::Index d = 0; d < s.size(); ++d) s(d) = rng.uniform(-radius, radius);
      starts.push_back(std::move(s));
    }
  }

  std::vector<Vector> roots;
  for (const Vector& s : starts) {
    auto root = detail::newton_root(obj, s);
    if (!root) continue;
    const bool seen = std::any_of(roots.begin(), roots.end(),
                                  [&](const Vector& r) { return (r - *root).norm() <= 1e-6 * (1.0 + r.norm()); });
    if (!seen) roots.push_back(*root);
  }
  std::sort(roots.begin(), roots.end(), detail::lex_less);

  TargetSet targets;
  for (const Vector& r : roots) {
    const auto verdict = classify_point(obj, StackedPoint::consensual(obj.agents(), r), tol);
    if (verdict.label == Stationarity::consensual_second_order) targets.minimizers.push_back(r);
    if (verdict.label == Stationarity::consensual_strict_saddle) targets.saddles.push_back(r);
  }
  return targets;
}

inline ordered_json to_json(const TargetSet& t) {
  ordered_json mins = ordered_json::array(), saddles = ordered_json::array();
  for (const Vector& v : t.minimizers) mins.push_back(detail::vector_json(v));
  for (const Vector& v : t.saddles) saddles.push_back(detail::vector_json(v));
  return {{"minimizers", mins}, {"strict_saddles", saddles}};
}

/// A fully constructed problem instance for one config.
struct Experiment {
  ExperimentConfig cfg;
  NetworkGraph graph;
  MixingPair pair;
  ObjectiveSet obj;
  double lipschitz = 0.0;
  double bound_thm1 = 0.0;
  double bound_thm2 = 0.0;
  TargetSet targets;
};

inline NetworkGraph build_graph(const GraphSpec& spec) {
  if (spec.kind == "complete") return complete_graph(spec.m);
  if (spec.kind == "ring") return ring_graph(spec.m);
  if (spec.kind == "circulant") return circulant_regular_graph(spec.m, spec.degree);
  fail(ErrorKind::config, "unknown graph kind '" + spec.kind + "'");
}

inline ObjectiveSet build_objective(const ObjectiveSpec& spec, std::size_t m) {
  if (spec.kind == "bilinear_logistic") return generate_bilinear_logistic(m, spec.eta, spec.dataset_seed);
  if (spec.kind == "quadratic") return random_quadratics(m, spec.dim, spec.dataset_seed, spec.shift);
  if (spec.kind == "identical_quartic") return make_identical_quartic(m, spec.dim);
  fail(ErrorKind::config, "unknown objective kind '" + spec.kind + "'");
}

inline Experiment build_experiment(const ExperimentConfig& cfg) {
  NetworkGraph graph = build_graph(cfg.graph);
  MixingPair pair = make_mixing_pair(lazify(metropolis_weights(graph), cfg.mixing.lazify_beta), cfg.mixing.theta, graph);
  ObjectiveSet obj = build_objective(cfg.objective, cfg.graph.m);
  const double lipschitz = lipschitz_bound(obj, cfg.objective.lipschitz_radius);
  const double thm1 = step_bound_thm1(pair.spectral().lambda1_P, lipschitz);
  const double thm2 = step_bound_thm2(pair.spectral().lambda1_P, lipschitz, pair.spectral().lambda_min_V);
  TargetSet targets = find_targets(obj, cfg.objective.lipschitz_radius, cfg.tolerances);
  return {cfg, std::move(graph), std::move(pair), std::move(obj), lipschitz, thm1, thm2, std::move(targets)};
}

/// Constant step for EXTRA (or constant DGD); diminishing schedules only for DGD.
inline StepSchedule resolve_schedule(const Experiment& e) {
  const AlphaSpec& a = e.cfg.solver.alpha;
  switch (a.mode) {
    case AlphaSpec::Mode::fixed: return StepSchedule::constant(a.value);
    case AlphaSpec::Mode::theoretical_thm1: return StepSchedule::constant(a.safety * e.bound_thm1);
    case AlphaSpec::Mode::theoretical_thm2: return StepSchedule::constant(a.safety * e.bound_thm2);
    case AlphaSpec::Mode::diminishing: return StepSchedule::diminishing(a.a, a.b);
  }
  return StepSchedule::constant(a.value);
}

inline ExtraForm extra_form(const std::string& kind) {
  if (kind == "extra_recurrence") return ExtraForm::recurrence;
  if (kind == "extra_jacobi") return ExtraForm::jacobi;
  return ExtraForm::dynamical;
}

inline StackedPoint draw_init(const InitSpec& spec, std::size_t m, std::size_t n, PhiloxStream& rng) {
  StackedPoint x(m, n);
  for (Eigen::Index i = 0; i < x.data().size(); ++i) {
    switch (spec.kind) {
      case InitSpec::Kind::gaussian: x.data()(i) = rng.gaussian(spec.mean, spec.std); break;
      case InitSpec::Kind::uniform: x.data()(i) = rng.uniform(spec.lo, spec.hi); break;
      case InitSpec::Kind::point: x.data()(i) = spec.value.at(static_cast<std::size_t>(i) % n); break;
    }
  }
  return x;
}

inline SolverState make_solver_state(const Experiment& e, const StackedPoint& x0) {
  const StepSchedule schedule = resolve_schedule(e);
  if (e.cfg.solver.kind == "dgd") return dgd_init(x0, schedule);
  return extra_init(x0, schedule.a, e.pair, e.obj, extra_form(e.cfg.solver.kind));
}

inline Observer make_observer(const Experiment& e) {
  const MetricsSpec m = e.cfg.metrics;
  return [&e, m](std::size_t k, const StackedPoint& x) {
    constexpr double off = std::numeric_limits<double>::quiet_NaN();
    MetricSample s;
    s.k = k;
    s.consensus_error = m.consensus_error ? consensus_error(x) : off;
    s.avg_grad_norm = m.avg_grad_norm ? avg_gradient_norm(e.obj, x) : off;
    s.objective = m.objective ? stacked_value(e.obj, x) : off;
    if (m.dist_to_targets && !e.targets.minimizers.empty())
      s.dist_to_targets = distance_to_consensual(x, e.targets.minimizers);
    return s;
  };
}

inline ordered_json verdict_json(const StationarityVerdict& v) {
  ordered_json j{{"label", to_string(v.label)},
                 {"consensus_residual", v.consensus_residual},
                 {"summed_gradient_norm", v.summed_gradient_norm}};
  if (v.summed_hessian_lambda_min) j["summed_hessian_lambda_min"] = *v.summed_hessian_lambda_min;
  return j;
}

inline ordered_json instance_meta(const Experiment& e) {
  ordered_json w_eigs = ordered_json::array();
  for (Eigen::Index i = 0; i < e.pair.spectral().w_eigenvalues.size(); ++i)
    w_eigs.push_back(e.pair.spectral().w_eigenvalues(i));
  return {{"spectral",
           {{"lambda1_P", e.pair.spectral().lambda1_P},
            {"lambda_min_V", e.pair.spectral().lambda_min_V},
            {"w_eigenvalues", w_eigs}}},
          {"lipschitz", {{"radius", e.cfg.objective.lipschitz_radius}, {"L_F", e.lipschitz}}},
          {"bounds", {{"thm1", e.bound_thm1}, {"thm2", e.bound_thm2}}},
          {"targets", to_json(e.targets)}};
}

namespace detail {

/// Agent-level engine: message passing rounds on AgentNetwork.
inline RunRecord run_agents(const Experiment& e, const ExtraState& init, const Observer& observer) {
  AgentNetwork net(e.graph, e.pair, e.obj, init);
  RunRecord record;
  record.initial_iterate = init.x;
  for (std::size_t k = 1; k <= e.cfg.iters; ++k) {
    net.round(e.cfg.solver.threads);
    StackedPoint x = net.iterate();
    try {
      check_finite(x, k);
    } catch (const DivergenceError& err) {
      record.error = err.what();
      record.final_iterate = std::move(x);
      throw RunDiverged(err, std::move(record));
    }
    ++record.iterations;
    record.series.push_back(observer(k, x));
    if (k == e.cfg.iters) record.final_iterate = std::move(x);
  }
  return record;
}

}  // namespace detail

/// Runs one experiment from an explicit initial point. Divergence is reported
/// through record.error rather than thrown.
inline RunRecord run_from(const Experiment& e, const StackedPoint& x0, std::uint64_t seed) {
  const StepSchedule schedule = resolve_schedule(e);
  SolverState state = make_solver_state(e, x0);
  const Observer observer = make_observer(e);
  RunRecord record;
  const auto started = std::chrono::steady_clock::now();
  try {
    if (e.cfg.solver.engine == "agents")
      record = detail::run_agents(e, std::get<ExtraState>(state), observer);
    else
      record = run(state, e.pair, e.obj, e.cfg.iters, observer);
  } catch (const RunDiverged& d) {
    record = d.partial();
    record.error = std::string(d.what()) + " at iteration " + std::to_string(d.iteration());
  }
  record.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  record.seed = seed;
  record.config = to_json(e.cfg);

  ordered_json meta;
  meta["config"] = record.config;
  meta["seed"] = seed;
  meta["solver"] = e.cfg.solver.kind;
  if (schedule.kind == StepSchedule::Kind::constant)
    meta["alpha"] = schedule.a;
  else
    meta["alpha"] = {{"schedule", "a/(k+b)"}, {"a", schedule.a}, {"b", schedule.b}};
  const ordered_json instance = instance_meta(e);
  for (const auto& [key, value] : instance.items()) meta[key] = value;
  meta["iterations"] = record.iterations;
  if (!record.error) {
    record.verdict = classify_point(e.obj, record.final_iterate, e.cfg.tolerances);
    meta["verdict"] = verdict_json(*record.verdict);
  }
  record.meta = std::move(meta);
  return record;
}

inline RunRecord run_single(const Experiment& e) {
  PhiloxStream rng(e.cfg.seed, 0, RngDomain::init);
  const StackedPoint x0 = draw_init(e.cfg.init, e.obj.agents(), e.obj.dim(), rng);
  return run_from(e, x0, e.cfg.seed);
}

inline RunRecord run_single(const ExperimentConfig& cfg) { return run_single(build_experiment(cfg)); }

// ---------------------------------------------------------------------------
// Monte-Carlo saddle-avoidance study.

struct TrialOutcome {
  std::size_t trial = 0;
  bool diverged = false;
  Stationarity label = Stationarity::nonconsensual;
  double dist_to_saddle = std::numeric_limits<double>::infinity();
  double dist_to_second_order = std::numeric_limits<double>::infinity();
  double consensus_error = 0.0;
  double avg_grad_norm = 0.0;
};

struct MonteCarloSummary {
  std::size_t trials = 0;
  std::map<std::string, std::size_t> counts;  // verdict label (or "diverged") -> trials
  std::size_t saddle_trapped = 0;
  std::size_t second_order = 0;
  double saddle_trapped_fraction = 0.0;
  double second_order_fraction = 0.0;
  std::vector<TrialOutcome> outcomes;  // by trial index
  ordered_json meta;
};

using InitSampler = std::function<StackedPoint(std::size_t trial)>;

inline TrialOutcome run_trial(const Experiment& e, const StackedPoint& x0, std::size_t trial) {
  TrialOutcome out;
  out.trial = trial;
  SolverState state = make_solver_state(e, x0);
  try {
    run(state, e.pair, e.obj, e.cfg.iters, nullptr);
  } catch (const RunDiverged&) {
    out.diverged = true;
    return out;
  }
  const StackedPoint& x = iterate(state);
  out.label = classify_point(e.obj, x, e.cfg.tolerances).label;
  out.consensus_error = consensus_error(x);
  out.avg_grad_norm = avg_gradient_norm(e.obj, x);
  if (!e.targets.saddles.empty()) out.dist_to_saddle = distance_to_consensual(x, e.targets.saddles);
  if (!e.targets.minimizers.empty()) out.dist_to_second_order = distance_to_consensual(x, e.targets.minimizers);
  return out;
}

/// Runs `trials` independent trials on up to `threads` workers; outcomes land
/// in per-trial slots, so the summary does not depend on scheduling.
inline MonteCarloSummary run_trials(const Experiment& e, std::size_t trials, const InitSampler& sampler,
                                    unsigned threads, double saddle_tol, double conv_tol) {
  require(trials >= 1, ErrorKind::parameter, "Monte-Carlo study needs at least one trial");
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, trials));

  std::vector<TrialOutcome> outcomes(trials);
  std::vector<std::string> errors(trials);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < trials; t = next++) {
      try {
        outcomes[t] = run_trial(e, sampler(t), t);
      } catch (const std::exception& ex) {
        errors[t] = ex.what();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
  }
  for (std::size_t t = 0; t < trials; ++t)
    require(errors[t].empty(), ErrorKind::parameter, "trial " + std::to_string(t) + " failed: " + errors[t]);

  MonteCarloSummary s;
  s.trials = trials;
  for (const char* label : {"nonconsensual", "consensual_nonstationary", "consensual_first_order",
                            "consensual_second_order", "consensual_strict_saddle", "diverged"})
    s.counts[label] = 0;
  for (const TrialOutcome& o : outcomes) {
    ++s.counts[o.diverged ? std::string("diverged") : std::string(to_string(o.label))];
    if (!o.diverged && o.dist_to_saddle < saddle_tol) ++s.saddle_trapped;
    if (!o.diverged && o.dist_to_second_order < conv_tol) ++s.second_order;
  }
  s.saddle_trapped_fraction = static_cast<double>(s.saddle_trapped) / static_cast<double>(trials);
  s.second_order_fraction = static_cast<double>(s.second_order) / static_cast<double>(trials);
  s.outcomes = std::move(outcomes);

  ordered_json counts = ordered_json::object();
  for (const auto& [label, c] : s.counts) counts[label] = c;
  s.meta = {{"config", to_json(e.cfg)},
            {"trials", trials},
            {"iters", e.cfg.iters},
            {"alpha", resolve_schedule(e).a},
            {"saddle_tol", saddle_tol},
            {"conv_tol", conv_tol},
            {"counts", counts},
            {"saddle_trapped", s.saddle_trapped},
            {"second_order_converged", s.second_order},
            {"saddle_trapped_fraction", s.saddle_trapped_fraction},
            {"second_order_fraction", s.second_order_fraction}};
  const ordered_json instance = instance_meta(e);
  for (const auto& [key, value] : instance.items()) s.meta[key] = value;
  return s;
}

/// Trial t draws its initial point from substream t of master_seed.
inline MonteCarloSummary run_monte_carlo(const Experiment& e, std::optional<unsigned> threads = std::nullopt) {
  require(e.cfg.monte_carlo.has_value(), ErrorKind::config, "config has no monte_carlo section");
  const MonteCarloSpec mc = *e.cfg.monte_carlo;
  require(is_nonatomic(mc.init), ErrorKind::config,
          "monte_carlo.init must be a nonatomic distribution (gaussian with std > 0 or uniform with lo < hi)");
  const std::size_t m = e.obj.agents(), n = e.obj.dim();
  InitSampler sampler = [&](std::size_t t) {
    PhiloxStream rng(mc.master_seed, static_cast<std::uint32_t>(t), RngDomain::init);
    return draw_init(mc.init, m, n, rng);
  };
  MonteCarloSummary s = run_trials(e, mc.trials, sampler, threads.value_or(mc.threads), mc.saddle_tol, mc.conv_tol);
  s.meta["master_seed"] = mc.master_seed;
  s.meta["seed_rule"] = "trial t: Philox substream (master_seed, stream = t, domain = init)";
  return s;
}

inline std::string trials_csv(const MonteCarloSummary& s) {
  std::string out = "trial,verdict,dist_to_saddle,dist_to_second_order,consensus_error,avg_grad_norm\n";
  for (const TrialOutcome& o : s.outcomes) {
    out += std::to_string(o.trial) + ',' + (o.diverged ? std::string("diverged") : std::string(to_string(o.label))) +
           ',' + format_g17(o.dist_to_saddle) + ',' + format_g17(o.dist_to_second_order) + ',' +
           format_g17(o.consensus_error) + ',' + format_g17(o.avg_grad_norm) + '\n';
  }
  return out;
}

inline void emit_monte_carlo(const MonteCarloSummary& s, const fs::path& dir, bool overwrite) {
  prepare_output_dir(dir, overwrite);
  write_text(dir / "summary.json", s.meta.dump(2) + "\n");
  write_text(dir / "trials.csv", trials_csv(s));
}

// ---------------------------------------------------------------------------
// Side-by-side EXTRA / DGD reproduction on the bilinear instance.

struct Fig1Result {
  RunRecord extra;
  RunRecord dgd;
  RunRecord extra_bad_init;
  std::size_t agent = 4;
  std::vector<double> extra_distance;  // agent's distance to the minimizer set, k = 1..iters
  std::vector<double> dgd_distance;
  std::vector<double> bad_init_distance;
  std::size_t plateau_iterations = 0;  // rounds the bad-init run spends near the saddle
  ordered_json meta;
};

inline constexpr double kFig1Alpha = 0.2;
inline constexpr double kFig1DgdA = 2.0;
inline constexpr double kFig1DgdB = 1.0;
inline constexpr double kBadInitOffset = 1.0;
inline constexpr double kBadInitNudge = 1e-3;
inline constexpr double kBadInitNoise = 1e-6;
inline constexpr double kPlateauRadius = 0.05;

namespace detail {

inline double block_distance(const Vector& xi, const std::vector<Vector>& targets) {
  double best = std::numeric_limits<double>::infinity();
  for (const Vector& t : targets) best = std::min(best, (xi - t).norm());
  return best;
}

inline RunRecord traced_run(const Experiment& e, const StackedPoint& x0, std::uint64_t seed, std::size_t agent,
                            std::vector<Vector>& trace) {
  const Observer base = make_observer(e);
  SolverState state = make_solver_state(e, x0);
  RunRecord record;
  try {
    record = run(state, e.pair, e.obj, e.cfg.iters, [&](std::size_t k, const StackedPoint& x) {
      trace.push_back(x.block(agent));
      return base(k, x);
    });
  } catch (const RunDiverged& d) {
    record = d.partial();
  }
  record.seed = seed;
  return record;
}

}  // namespace detail

/// EXTRA (constant 0.2) and DGD (2/(k+1)) from one shared draw, plus an EXTRA
/// run started next to the saddle's stable direction.
inline Fig1Result reproduce_fig1(const Experiment& base) {
  require(!base.targets.minimizers.empty(), ErrorKind::parameter, "instance has no second-order targets");
  Fig1Result out;
  out.agent = std::min<std::size_t>(4, base.obj.agents() - 1);

  Experiment extra = base;
  extra.cfg.solver.kind = base.cfg.solver.kind == "dgd" ? "extra_dynamical" : base.cfg.solver.kind;
  extra.cfg.solver.engine = "aggregate";
  extra.cfg.solver.alpha = AlphaSpec{AlphaSpec::Mode::fixed, kFig1Alpha, 0.99, 2.0, 1.0};
  Experiment dgd = base;
  dgd.cfg.solver.kind = "dgd";
  dgd.cfg.solver.engine = "aggregate";
  dgd.cfg.solver.alpha = AlphaSpec{AlphaSpec::Mode::diminishing, 0.0, 0.99, kFig1DgdA, kFig1DgdB};

  PhiloxStream rng(base.cfg.seed, 0, RngDomain::init);
  const StackedPoint x0 = draw_init(base.cfg.init, base.obj.agents(), base.obj.dim(), rng);

  std::vector<Vector> extra_trace, dgd_trace, bad_trace;
  out.extra = detail::traced_run(extra, x0, base.cfg.seed, out.agent, extra_trace);
  out.dgd = detail::traced_run(dgd, x0, base.cfg.seed, out.agent, dgd_trace);
  for (const Vector& v : extra_trace) out.extra_distance.push_back(detail::block_distance(v, base.targets.minimizers));
  for (const Vector& v : dgd_trace) out.dgd_distance.push_back(detail::block_distance(v, base.targets.minimizers));

  ordered_json bad_meta = nullptr;
  if (!base.targets.saddles.empty()) {
    // Offset along the most contracting Hessian direction at the saddle, so
    // the run is pulled towards the saddle before it escapes.
    const Vector& saddle = base.targets.saddles.front();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(base.obj.aggregate_hessian(saddle));
    const Vector stable = eig.eigenvectors().col(eig.eigenvalues().size() - 1);
    const Vector unstable = eig.eigenvectors().col(0);
    PhiloxStream noise(base.cfg.seed, 1, RngDomain::init);
    StackedPoint bad = StackedPoint::consensual(base.obj.agents(),
                                                saddle + kBadInitOffset * stable + kBadInitNudge * unstable);
    for (Eigen::Index i = 0; i < bad.data().size(); ++i) bad.data()(i) += kBadInitNoise * noise.gaussian();
    out.extra_bad_init = detail::traced_run(extra, bad, base.cfg.seed, out.agent, bad_trace);
    for (const Vector& v : bad_trace) {
      out.bad_init_distance.push_back(detail::block_distance(v, base.targets.minimizers));
      if ((v - saddle).norm() < kPlateauRadius) ++out.plateau_iterations;
    }
    bad_meta = {{"saddle", detail::vector_json(saddle)},
                {"stable_direction", detail::vector_json(stable)},
                {"offset", kBadInitOffset},
                {"unstable_direction", detail::vector_json(unstable)},
                {"unstable_nudge", kBadInitNudge},
                {"noise_std", kBadInitNoise},
                {"plateau_radius", kPlateauRadius},
                {"plateau_iterations", out.plateau_iterations}};
  }

  auto final_of = [](const std::vector<double>& d) {
    return d.empty() ? ordered_json(nullptr) : ordered_json(d.back());
  };
  out.meta = {{"config", to_json(base.cfg)},
              {"seed", base.cfg.seed},
              {"agent", out.agent + 1},
              {"extra", {{"solver", extra.cfg.solver.kind}, {"alpha", kFig1Alpha}}},
              {"dgd", {{"solver", "dgd"}, {"schedule", "a/(k+b)"}, {"a", kFig1DgdA}, {"b", kFig1DgdB}}},
              {"final_distance",
               {{"extra", final_of(out.extra_distance)},
                {"dgd", final_of(out.dgd_distance)},
                {"extra_bad_init", final_of(out.bad_init_distance)}}},
              {"bad_init", bad_meta}};
  const ordered_json instance = instance_meta(base);
  for (const auto& [key, value] : instance.items()) out.meta[key] = value;
  if (out.extra.error) out.meta["extra_error"] = *out.extra.error;
  if (out.dgd.error) out.meta["dgd_error"] = *out.dgd.error;
  return out;
}

inline void emit_fig1(const Fig1Result& r, const fs::path& dir, bool overwrite) {
  prepare_output_dir(dir, overwrite);
  const std::size_t rows = std::max({r.extra_distance.size(), r.dgd_distance.size(), r.bad_init_distance.size()});
  auto cell = [](const std::vector<double>& d, std::size_t i) { return i < d.size() ? format_g17(d[i]) : std::string(); };
  std::string csv = "k,extra,dgd,extra_bad_init\n";
  for (std::size_t i = 0; i < rows; ++i)
    csv += std::to_string(i + 1) + ',' + cell(r.extra_distance, i) + ',' + cell(r.dgd_distance, i) + ',' +
           cell(r.bad_init_distance, i) + '\n';
  write_text(dir / "fig1.csv", csv);
  write_text(dir / "meta.json", r.meta.dump(2) + "\n");

  auto series = [](const std::string& name, const std::vector<double>& d) {
    ChartSeries s{name, {}};
    for (std::size_t i = 0; i < d.size(); ++i) s.points.emplace_back(static_cast<double>(i + 1), d[i]);
    return s;
  };
  std::vector<ChartSeries> lines{series("EXTRA (cs)", r.extra_distance), series("DGD (ds)", r.dgd_distance)};
  if (!r.bad_init_distance.empty()) lines.push_back(series("EXTRA, bad init", r.bad_init_distance));
  write_text(dir / "chart.svg",
             svg_line_chart("Agent " + std::to_string(r.agent + 1) + " distance to minimizers", "distance (log scale)",
                            lines));
  emit_outputs(r.extra, dir / "extra", overwrite);
  emit_outputs(r.dgd, dir / "dgd", overwrite);
}

// ---------------------------------------------------------------------------

inline ordered_json bounds_report(const Experiment& e) {
  ordered_json j{{"m", e.obj.agents()},
                 {"n", e.obj.dim()},
                 {"theta", e.pair.theta()},
                 {"lambda1_P", e.pair.spectral().lambda1_P},
                 {"lambda_min_V", e.pair.spectral().lambda_min_V},
                 {"lipschitz_radius", e.cfg.objective.lipschitz_radius},
                 {"L_F", e.lipschitz},
                 {"step_bound_thm1", e.bound_thm1},
                 {"step_bound_thm2", e.bound_thm2}};
  return j;
}

}  // namespace extra_lab
