#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "extra_lab/harness.hpp"
#include "support/error_kind.hpp"

using namespace extra_lab;
using extra_lab::testing::kind_of;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({
  "seed": 1,
  "graph": {"kind": "complete", "m": 20},
  "mixing": {"scheme": "metropolis", "theta": 0.5},
  "objective": {"kind": "bilinear_logistic", "eta": 0.1},
  "solver": {"kind": "extra_dynamical", "alpha": {"mode": "fixed", "value": 0.2}},
  "iters": 500
})";

ordered_json minimal() { return ordered_json::parse(kMinimal); }

ExperimentConfig config_from(const ordered_json& j) { return parse_config(j); }

std::string config_error(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const LabError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
    return e.what();
  }
  ADD_FAILURE() << "config accepted";
  return {};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("extra_lab_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

ordered_json small_quadratic() {
  ordered_json j = minimal();
  j["graph"] = {{"kind", "ring"}, {"m", 6}};
  j["objective"] = {{"kind", "quadratic"}, {"dim", 2}, {"dataset_seed", 4}};
  j["solver"]["alpha"]["value"] = 0.1;
  j["iters"] = 50;
  return j;
}

}  // namespace

TEST(Config, MinimalLoads) {
  const ExperimentConfig cfg = parse_config_text(kMinimal);
  EXPECT_EQ(cfg.graph.m, 20u);
  EXPECT_EQ(cfg.solver.kind, "extra_dynamical");
  EXPECT_EQ(cfg.solver.alpha.value, 0.2);
  EXPECT_EQ(cfg.iters, 500u);
  EXPECT_FALSE(cfg.monte_carlo.has_value());
  EXPECT_EQ(config_from(to_json(cfg)).iters, 500u);  // canonical form round-trips
}

TEST(Config, ShippedConfigsLoad) {
  for (const auto& entry : fs::directory_iterator(fs::path(EXTRA_LAB_SOURCE_DIR) / "configs")) {
    SCOPED_TRACE(entry.path().string());
    EXPECT_NO_THROW(build_experiment(load_config(entry.path().string())));
  }
}

TEST(Config, ThetaOutOfRange) {
  ordered_json j = minimal();
  j["mixing"]["theta"] = 0.7;
  const std::string msg = config_error(j.dump());
  EXPECT_NE(msg.find("mixing.theta"), std::string::npos) << msg;
}

TEST(Config, UnknownKeyIsNamed) {
  ordered_json j = minimal();
  j["solver"]["alhpa"] = 0.2;
  const std::string msg = config_error(j.dump());
  EXPECT_NE(msg.find("alhpa"), std::string::npos) << msg;
  EXPECT_NE(msg.find("solver.alhpa"), std::string::npos) << msg;
}

TEST(Config, ParseErrorHasLine) {
  const std::string msg = config_error("{\n  \"seed\": 1,\n  \"iters\": ,\n}");
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
}

TEST(Config, FieldValidation) {
  ordered_json j = minimal();
  j["iters"] = 0;
  EXPECT_NE(config_error(j.dump()).find("iters"), std::string::npos);

  j = minimal();
  j["solver"]["alpha"] = {{"mode", "diminishing"}, {"a", 2.0}, {"b", 1.0}};
  EXPECT_NE(config_error(j.dump()).find("solver.alpha.mode"), std::string::npos);

  j = minimal();
  j["init"] = {{"kind", "point"}, {"value", {0.0, 0.0, 0.0}}};
  EXPECT_NE(config_error(j.dump()).find("init.value"), std::string::npos);

  j = minimal();
  j["monte_carlo"] = {{"trials", 0}, {"init", {{"kind", "gaussian"}}}};
  EXPECT_NE(config_error(j.dump()).find("monte_carlo.trials"), std::string::npos);

  j = minimal();
  j["graph"]["m"] = "twenty";
  EXPECT_NE(config_error(j.dump()).find("graph.m"), std::string::npos);

  EXPECT_EQ(kind_of([] { load_config("/nonexistent/config.json"); }), ErrorKind::config);
}

TEST(Targets, BilinearInstance) {
  const auto obj = generate_bilinear_logistic(20, 0.1, 1);
  const TargetSet t = find_targets(obj, 3.0);
  ASSERT_EQ(t.minimizers.size(), 2u);
  ASSERT_EQ(t.saddles.size(), 1u);
  EXPECT_LT(t.saddles[0].norm(), 1e-12);
  EXPECT_LT((t.minimizers[0] + t.minimizers[1]).norm(), 1e-9);  // symmetric pair
  EXPECT_GT(t.minimizers[1](0) * t.minimizers[1](1), 0.0);       // positive / negative quadrants
}

TEST(Targets, SaddlesClassifyAsStrictSaddles) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto obj = generate_bilinear_logistic(8, 0.1, seed);
    for (const Vector& s : find_targets(obj, 3.0).saddles)
      EXPECT_EQ(classify_point(obj, StackedPoint::consensual(8, s)).label, Stationarity::consensual_strict_saddle);
  }
  const auto quartic = make_identical_quartic(5, 3);
  const TargetSet t = find_targets(quartic, 2.0);
  ASSERT_EQ(t.minimizers.size(), 2u);
  ASSERT_EQ(t.saddles.size(), 1u);
  EXPECT_NEAR(std::abs(t.minimizers[0](0)), 1.0, 1e-10);
}

TEST(Targets, QuadraticHasItsUniqueMinimizer) {
  const auto obj = random_quadratics(5, 3, 2);
  const TargetSet t = find_targets(obj, 3.0);
  ASSERT_EQ(t.minimizers.size(), 1u);
  EXPECT_TRUE(t.saddles.empty());
  Matrix a = Matrix::Zero(3, 3);
  Vector b = Vector::Zero(3);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& q = dynamic_cast<const QuadraticObjective&>(obj.local(i));
    a += q.A();
    b += q.b();
  }
  EXPECT_LT((t.minimizers[0] - a.ldlt().solve(-b)).norm(), 1e-9);
}

TEST(RunSingle, TheoreticalAlphaIsScaledBound) {
  ordered_json j = minimal();
  j["solver"]["alpha"] = {{"mode", "theoretical_thm1"}};
  j["iters"] = 10;
  const Experiment e = build_experiment(config_from(j));
  const RunRecord r = run_single(e);
  EXPECT_EQ(r.meta["alpha"].get<double>(), 0.99 * e.bound_thm1);
  EXPECT_EQ(e.bound_thm1, step_bound_thm1(e.pair.spectral().lambda1_P, e.lipschitz));
  ASSERT_EQ(r.series.size(), 10u);
}

TEST(RunSingle, BilinearInstanceReachesMinimizerIn500Iterations) {
  const RunRecord r = run_single(config_from(minimal()));
  ASSERT_TRUE(r.verdict.has_value());
  EXPECT_EQ(r.verdict->label, Stationarity::consensual_second_order)
      << "got " << to_string(r.verdict->label) << ", consensus " << r.verdict->consensus_residual
      << ", summed gradient " << r.verdict->summed_gradient_norm;
}

TEST(RunSingle, DivergenceIsRecorded) {
  ordered_json j = small_quadratic();
  j["solver"]["alpha"]["value"] = 50.0;
  const RunRecord r = run_single(config_from(j));
  ASSERT_TRUE(r.error.has_value());
  EXPECT_NE(r.error->find("iteration"), std::string::npos);
  EXPECT_LT(r.series.size(), 50u);
  EXPECT_FALSE(r.verdict.has_value());
}

TEST(Outputs, CompletedRun) {
  const fs::path dir = scratch("outputs");
  const RunRecord r = run_single(config_from(small_quadratic()));
  emit_outputs(r, dir, false);
  ASSERT_TRUE(fs::exists(dir / "metrics.csv"));
  ASSERT_TRUE(fs::exists(dir / "meta.json"));
  ASSERT_TRUE(fs::exists(dir / "chart.svg"));
  const std::string csv = slurp(dir / "metrics.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "k,consensus_error,avg_grad_norm,objective,dist_to_targets");
  EXPECT_EQ(count_lines(csv), 51u);
  const auto meta = ordered_json::parse(slurp(dir / "meta.json"));
  for (const char* key : {"config", "seed", "bounds", "verdict"}) EXPECT_TRUE(meta.contains(key)) << key;

  // Every value round-trips through the CSV text.
  std::istringstream rows(csv);
  std::string line;
  std::getline(rows, line);
  std::getline(rows, line);
  const double parsed = std::stod(line.substr(line.find(',') + 1));
  EXPECT_EQ(parsed, r.series.front().consensus_error);

  EXPECT_EQ(kind_of([&] { emit_outputs(r, dir, false); }), ErrorKind::io);
  EXPECT_NO_THROW(emit_outputs(r, dir, true));
  fs::remove_all(dir);
}

TEST(Outputs, EmptySeriesWritesErrorOnly) {
  const fs::path dir = scratch("empty");
  RunRecord r;
  r.error = "divergence error: iterate coordinate magnitude exceeded 1e12 at iteration 1";
  emit_outputs(r, dir, false);
  const auto meta = ordered_json::parse(slurp(dir / "meta.json"));
  EXPECT_EQ(meta["error"].get<std::string>(), *r.error);
  EXPECT_FALSE(fs::exists(dir / "chart.svg"));
  EXPECT_EQ(count_lines(slurp(dir / "metrics.csv")), 1u);
  fs::remove_all(dir);
}

TEST(Determinism, RepeatedRunsAreByteIdentical) {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  ordered_json j = minimal();
  j["iters"] = 200;
  emit_outputs(run_single(config_from(j)), a, false);
  emit_outputs(run_single(config_from(j)), b, false);
  for (const char* f : {"metrics.csv", "meta.json", "chart.svg"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Determinism, AgentEngineIndependentOfThreads) {
  ordered_json j = small_quadratic();
  j["solver"]["kind"] = "extra_recurrence";
  j["solver"]["engine"] = "agents";
  std::string reference;
  for (unsigned threads : {1u, 2u, 5u}) {
    j["solver"]["threads"] = threads;
    const RunRecord r = run_single(config_from(j));
    const std::string csv = metrics_csv(r.series);
    if (reference.empty()) reference = csv;
    EXPECT_EQ(csv, reference) << threads << " threads";
  }
  // and it tracks the aggregate engine
  j["solver"]["engine"] = "aggregate";
  const RunRecord aggregate = run_single(config_from(j));
  j["solver"]["engine"] = "agents";
  const RunRecord agents = run_single(config_from(j));
  EXPECT_LT((aggregate.final_iterate.data() - agents.final_iterate.data()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MonteCarlo, CountsAndParallelDeterminism) {
  ordered_json j = minimal();
  j["iters"] = 100;
  j["monte_carlo"] = {{"trials", 12}, {"master_seed", 5}, {"init", {{"kind", "gaussian"}, {"std", 1.0}}}};
  const Experiment e = build_experiment(config_from(j));
  const MonteCarloSummary serial = run_monte_carlo(e, 1u);
  const MonteCarloSummary parallel = run_monte_carlo(e, 4u);
  std::size_t total = 0;
  for (const auto& [label, c] : serial.counts) total += c;
  EXPECT_EQ(total, 12u);
  EXPECT_EQ(trials_csv(serial), trials_csv(parallel));
  EXPECT_EQ(serial.meta.dump(), parallel.meta.dump());

  const fs::path a = scratch("mc_a"), b = scratch("mc_b");
  emit_monte_carlo(serial, a, false);
  emit_monte_carlo(parallel, b, false);
  EXPECT_EQ(slurp(a / "summary.json"), slurp(b / "summary.json"));
  EXPECT_EQ(slurp(a / "trials.csv"), slurp(b / "trials.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(MonteCarlo, RejectsPointMassInit) {
  ordered_json j = minimal();
  j["monte_carlo"] = {{"trials", 3}, {"init", {{"kind", "point"}, {"value", {0.0, 0.0}}}}};
  const Experiment e = build_experiment(config_from(j));
  EXPECT_EQ(kind_of([&] { run_monte_carlo(e); }), ErrorKind::config);
  j["monte_carlo"]["init"] = {{"kind", "gaussian"}, {"std", 0.0}};
  const Experiment degenerate = build_experiment(config_from(j));
  EXPECT_EQ(kind_of([&] { run_monte_carlo(degenerate); }), ErrorKind::config);
}

TEST(MonteCarlo, ExactSaddleInitStaysTrapped) {
  ordered_json j = minimal();
  j["objective"] = {{"kind", "identical_quartic"}, {"dim", 2}, {"lipschitz_radius", 2.0}};
  j["solver"]["alpha"]["value"] = 0.5;
  j["iters"] = 300;
  const Experiment e = build_experiment(config_from(j));
  const MonteCarloSummary s =
      run_trials(e, 5, [&](std::size_t) { return StackedPoint(20, 2); }, 2, 1e-3, 1e-3);
  EXPECT_EQ(s.saddle_trapped, 5u);
  EXPECT_EQ(s.counts.at("consensual_strict_saddle"), 5u);
}

TEST(Fig1, SharedInitAndOrdering) {
  ordered_json j = minimal();
  const Fig1Result r = reproduce_fig1(build_experiment(config_from(j)));
  EXPECT_EQ(r.extra.initial_iterate.data(), r.dgd.initial_iterate.data());
  EXPECT_EQ(r.agent, 4u);
  ASSERT_EQ(r.extra_distance.size(), 500u);
  ASSERT_EQ(r.dgd_distance.size(), 500u);
  EXPECT_LT(r.extra_distance.back(), r.dgd_distance.back());
}

TEST(Fig1, BadInitPlateausThenDescends) {
  const Fig1Result r =
      reproduce_fig1(build_experiment(load_config((fs::path(EXTRA_LAB_SOURCE_DIR) / "configs/fig1.json").string())));
  const double saddle_level = r.bad_init_distance.front();
  EXPECT_GE(r.plateau_iterations, 100u);
  // still near the saddle level well into the run, then far below it
  EXPECT_GT(r.bad_init_distance[599], 0.8 * saddle_level);
  EXPECT_LT(r.bad_init_distance.back(), 0.05 * saddle_level);
  const fs::path dir = scratch("fig1");
  emit_fig1(r, dir, false);
  for (const char* f : {"fig1.csv", "meta.json", "chart.svg", "extra/metrics.csv", "dgd/metrics.csv"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  fs::remove_all(dir);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli");
  fs::create_directories(dir);
  const std::string cli = EXTRA_LAB_CLI;
  auto sh = [&](const std::string& args) {
    const int status = std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
  };
  auto write = [&](const std::string& name, const ordered_json& j) {
    std::ofstream(dir / name) << j.dump(2);
    return (dir / name).string();
  };
  const std::string good = write("good.json", small_quadratic());
  ordered_json bad = small_quadratic();
  bad["mixing"]["theta"] = 0.7;
  const std::string bad_theta = write("theta.json", bad);
  ordered_json diverge = small_quadratic();
  diverge["solver"]["alpha"]["value"] = 50.0;
  const std::string diverging = write("diverge.json", diverge);

  EXPECT_EQ(sh("validate --config " + good), 0);
  EXPECT_EQ(sh("bounds --config " + good), 0);
  EXPECT_EQ(sh("validate --config " + bad_theta), 1);
  EXPECT_EQ(sh("validate --config " + (dir / "missing.json").string()), 1);
  EXPECT_EQ(sh("run --config " + good + " --out " + (dir / "run").string()), 0);
  EXPECT_EQ(sh("run --config " + good + " --out " + (dir / "run").string()), 2);
  EXPECT_EQ(sh("run --config " + good + " --out " + (dir / "run").string() + " --overwrite --seed 9"), 0);
  EXPECT_EQ(sh("run --config " + diverging + " --out " + (dir / "div").string()), 2);
  EXPECT_TRUE(fs::exists(dir / "div" / "meta.json"));
  EXPECT_EQ(sh("montecarlo --config " + good + " --out " + (dir / "mc").string()), 1);
  EXPECT_EQ(sh("frobnicate --config " + good), 1);
  fs::remove_all(dir);
}
