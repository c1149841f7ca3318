#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "extra_lab/harness.hpp"

using namespace extra_lab;

namespace {

enum Exit { kOk = 0, kConfigError = 1, kRuntimeError = 2 };

struct Options {
  std::string verb;
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool overwrite = false;
};

ExperimentConfig load_with_overrides(const Options& opt) {
  ExperimentConfig cfg = load_config(opt.config);
  if (opt.seed) {
    cfg.seed = *opt.seed;
    if (cfg.monte_carlo) cfg.monte_carlo->master_seed = *opt.seed;
  }
  if (opt.out) cfg.output_dir = *opt.out;
  return cfg;
}

void print_verdict(const RunRecord& r) {
  if (!r.verdict) return;
  std::cout << "verdict: " << to_string(r.verdict->label) << " (consensus " << format_g17(r.verdict->consensus_residual)
            << ", summed gradient " << format_g17(r.verdict->summed_gradient_norm) << ")\n";
}

int run_verb(const Options& opt) {
  ExperimentConfig cfg;
  std::optional<Experiment> exp;
  try {
    cfg = load_with_overrides(opt);
    exp.emplace(build_experiment(cfg));
  } catch (const LabError& e) {
    std::cerr << "extra-lab: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    if (opt.verb == "validate") {
      std::cout << "ok: " << opt.config << " (m=" << exp->obj.agents() << ", n=" << exp->obj.dim()
                << ", solver=" << cfg.solver.kind << ", iters=" << cfg.iters << ")\n";
      return kOk;
    }
    if (opt.verb == "bounds") {
      std::cout << bounds_report(*exp).dump(2) << "\n";
      return kOk;
    }
    if (opt.verb == "run") {
      if (opt.threads) exp->cfg.solver.threads = *opt.threads;
      const RunRecord r = run_single(*exp);
      emit_outputs(r, cfg.output_dir, opt.overwrite);
      std::cout << "wrote " << cfg.output_dir << " (" << r.iterations << " iterations, "
                << format_g17(r.wall_time_seconds) << " s)\n";
      print_verdict(r);
      if (r.error) {
        std::cerr << "extra-lab: " << *r.error << "\n";
        return kRuntimeError;
      }
      return kOk;
    }
    if (opt.verb == "montecarlo") {
      if (!cfg.monte_carlo) {
        std::cerr << "extra-lab: config error: montecarlo needs a monte_carlo section\n";
        return kConfigError;
      }
      if (!is_nonatomic(cfg.monte_carlo->init)) {
        std::cerr << "extra-lab: config error: monte_carlo.init must be a nonatomic distribution\n";
        return kConfigError;
      }
      const MonteCarloSummary s = run_monte_carlo(*exp, opt.threads);
      emit_monte_carlo(s, cfg.output_dir, opt.overwrite);
      std::cout << "wrote " << cfg.output_dir << "\n"
                << "saddle-trapped: " << s.saddle_trapped << "/" << s.trials
                << ", second-order converged: " << s.second_order << "/" << s.trials << "\n";
      return kOk;
    }
    if (opt.verb == "fig1") {
      const Fig1Result r = reproduce_fig1(*exp);
      emit_fig1(r, cfg.output_dir, opt.overwrite);
      std::cout << "wrote " << cfg.output_dir << "\n";
      if (!r.extra_distance.empty() && !r.dgd_distance.empty())
        std::cout << "agent " << r.agent + 1 << " final distance: EXTRA " << format_g17(r.extra_distance.back())
                  << ", DGD " << format_g17(r.dgd_distance.back()) << "\n";
      return r.extra.error || r.dgd.error ? kRuntimeError : kOk;
    }
  } catch (const LabError& e) {
    std::cerr << "extra-lab: " << e.what() << "\n";
    return kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "extra-lab: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kConfigError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EXTRA decentralized optimization laboratory"};
  app.require_subcommand(1);
  Options opt;
  for (const char* verb : {"validate", "run", "montecarlo", "fig1", "bounds"}) {
    const char* help = std::string(verb) == "validate"     ? "Check a config and build its instance"
                       : std::string(verb) == "run"        ? "Run one experiment and write metrics"
                       : std::string(verb) == "montecarlo" ? "Run the Monte-Carlo saddle-avoidance study"
                       : std::string(verb) == "fig1"       ? "Compare EXTRA and DGD on the bilinear instance"
                                                           : "Print spectral facts and step-size bounds";
    CLI::App* sub = app.add_subcommand(verb, help);
    sub->add_option("--config", opt.config, "Experiment config (JSON)")->required();
    sub->add_option("--out", opt.out, "Output directory (overrides output.dir)");
    sub->add_option("--seed", opt.seed, "Seed override (seed and monte_carlo.master_seed)");
    sub->add_option("--threads", opt.threads, "Worker threads for montecarlo / the agents engine");
    sub->add_flag("--overwrite", opt.overwrite, "Replace a non-empty output directory");
    sub->callback([&opt, sub] { opt.verb = sub->get_name(); });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  return run_verb(opt);
}
