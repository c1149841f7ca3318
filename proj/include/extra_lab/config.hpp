#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "extra_lab/analysis.hpp"
#include "extra_lab/error.hpp"
#include "json.hpp"

namespace extra_lab {

using ordered_json = nlohmann::ordered_json;

struct GraphSpec {
  std::string kind = "complete";  // complete | ring | circulant
  std::size_t m = 0;
  std::size_t degree = 0;  // circulant only
};

struct MixingSpec {
  std::string scheme = "metropolis";
  double theta = 0.5;
  double lazify_beta = 0.0;
};

struct ObjectiveSpec {
  std::string kind = "bilinear_logistic";  // bilinear_logistic | quadratic | identical_quartic
  double eta = 0.1;
  std::uint64_t dataset_seed = 1;
  std::size_t dim = 2;
  double shift = 0.1;
  double lipschitz_radius = 3.0;
};

struct AlphaSpec {
  enum class Mode { fixed, theoretical_thm1, theoretical_thm2, diminishing };
  Mode mode = Mode::fixed;
  double value = 0.0;
  double safety = 0.99;
  double a = 2.0;
  double b = 1.0;
};

struct SolverSpec {
  std::string kind = "extra_dynamical";  // extra_recurrence | extra_dynamical | extra_jacobi | dgd
  AlphaSpec alpha;
  std::string engine = "aggregate";  // aggregate | agents
  unsigned threads = 1;
};

struct InitSpec {
  enum class Kind { gaussian, uniform, point };
  Kind kind = Kind::gaussian;
  double mean = 0.0;
  double std = 1.0;
  double lo = -1.0;
  double hi = 1.0;
  std::vector<double> value;  // point: one block, repeated on every agent
};

struct MetricsSpec {
  bool consensus_error = true;
  bool avg_grad_norm = true;
  bool objective = true;
  bool dist_to_targets = true;
};

struct MonteCarloSpec {
  std::size_t trials = 0;
  std::uint64_t master_seed = 0;
  double saddle_tol = 1e-3;
  double conv_tol = 1e-3;
  unsigned threads = 0;  // 0: hardware concurrency
  InitSpec init;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  GraphSpec graph;
  MixingSpec mixing;
  ObjectiveSpec objective;
  SolverSpec solver;
  std::size_t iters = 0;
  InitSpec init;
  MetricsSpec metrics;
  ClassifyTolerances tolerances;
  std::optional<MonteCarloSpec> monte_carlo;
  std::string output_dir = "out";
};

namespace detail {

[[noreturn]] inline void config_fail(const std::string& msg) { fail(ErrorKind::config, msg); }

/// Reads one JSON object, tracking which keys were consumed so leftovers can
/// be reported as unknown.
class Section {
 public:
  Section(const ordered_json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) config_fail("'" + display() + "' must be an object");
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  template <class T>
  T get(const std::string& key) {
    if (!node_.contains(key)) config_fail("missing required field '" + field(key) + "'");
    return convert<T>(key);
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!node_.contains(key)) return fallback;
    return convert<T>(key);
  }

  Section child(const std::string& key) {
    if (!node_.contains(key)) config_fail("missing required section '" + field(key) + "'");
    seen_.insert(key);
    return Section(node_.at(key), field(key));
  }

  std::optional<Section> optional_child(const std::string& key) {
    if (!node_.contains(key)) return std::nullopt;
    return child(key);
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : node_.items())
      if (!seen_.count(key)) config_fail("unknown key '" + field(key) + "'");
  }

 private:
  std::string display() const { return path_.empty() ? "<root>" : path_; }

  template <class T>
  T convert(const std::string& key) {
    seen_.insert(key);
    const ordered_json& v = node_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) config_fail("'" + field(key) + "' must be a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) config_fail("'" + field(key) + "' must be a string");
      return v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        config_fail("'" + field(key) + "' must be a nonnegative integer");
      return static_cast<T>(v.get<std::uint64_t>());
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      if (!v.is_array()) config_fail("'" + field(key) + "' must be an array of numbers");
      std::vector<double> out;
      for (const auto& e : v) {
        if (!e.is_number()) config_fail("'" + field(key) + "' must be an array of numbers");
        out.push_back(e.get<double>());
      }
      return out;
    } else {
      if (!v.is_number()) config_fail("'" + field(key) + "' must be a number");
      return v.get<double>();
    }
  }

  const ordered_json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void check(bool ok, const std::string& msg) {
  if (!ok) config_fail(msg);
}

inline InitSpec parse_init(Section s) {
  InitSpec init;
  const std::string kind = s.get<std::string>("kind");
  if (kind == "gaussian") {
    init.kind = InitSpec::Kind::gaussian;
    init.mean = s.get<double>("mean", 0.0);
    init.std = s.get<double>("std", 1.0);
    check(init.std >= 0.0, "'" + s.field("std") + "' must be nonnegative");
  } else if (kind == "uniform") {
    init.kind = InitSpec::Kind::uniform;
    init.lo = s.get<double>("lo");
    init.hi = s.get<double>("hi");
    check(init.lo <= init.hi, "'" + s.field("lo") + "' must not exceed '" + s.field("hi") + "'");
  } else if (kind == "point") {
    init.kind = InitSpec::Kind::point;
    init.value = s.get<std::vector<double>>("value");
  } else {
    config_fail("'" + s.field("kind") + "' must be one of gaussian, uniform, point; got '" + kind + "'");
  }
  s.finish();
  return init;
}

inline ordered_json init_to_json(const InitSpec& init) {
  switch (init.kind) {
    case InitSpec::Kind::gaussian: return {{"kind", "gaussian"}, {"mean", init.mean}, {"std", init.std}};
    case InitSpec::Kind::uniform: return {{"kind", "uniform"}, {"lo", init.lo}, {"hi", init.hi}};
    case InitSpec::Kind::point: return {{"kind", "point"}, {"value", init.value}};
  }
  return {};
}

inline std::string line_info(const std::string& text, std::size_t byte) {
  std::size_t line = 1, column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

}  // namespace detail

inline bool is_nonatomic(const InitSpec& init) {
  switch (init.kind) {
    case InitSpec::Kind::gaussian: return init.std > 0.0;
    case InitSpec::Kind::uniform: return init.hi > init.lo;
    case InitSpec::Kind::point: return false;
  }
  return false;
}

inline ExperimentConfig parse_config(const ordered_json& root) {
  using detail::check;
  using detail::Section;
  ExperimentConfig cfg;
  Section top(root, "");
  cfg.seed = top.get<std::uint64_t>("seed", 0);
  cfg.iters = top.get<std::size_t>("iters");
  check(cfg.iters >= 1, "'iters' must be at least 1");

  {
    Section s = top.child("graph");
    cfg.graph.kind = s.get<std::string>("kind");
    cfg.graph.m = s.get<std::size_t>("m");
    check(cfg.graph.m >= 1, "'graph.m' must be at least 1");
    if (cfg.graph.kind == "circulant") {
      cfg.graph.degree = s.get<std::size_t>("degree");
    } else {
      check(cfg.graph.kind == "complete" || cfg.graph.kind == "ring",
            "'graph.kind' must be one of complete, ring, circulant; got '" + cfg.graph.kind + "'");
    }
    s.finish();
  }
  {
    Section s = top.child("mixing");
    cfg.mixing.scheme = s.get<std::string>("scheme", std::string("metropolis"));
    check(cfg.mixing.scheme == "metropolis", "'mixing.scheme' must be metropolis; got '" + cfg.mixing.scheme + "'");
    cfg.mixing.theta = s.get<double>("theta");
    check(cfg.mixing.theta > 0.0 && cfg.mixing.theta <= 0.5,
          "'mixing.theta' must lie in (0, 1/2]; got " + std::to_string(cfg.mixing.theta));
    cfg.mixing.lazify_beta = s.get<double>("lazify_beta", 0.0);
    check(cfg.mixing.lazify_beta >= 0.0 && cfg.mixing.lazify_beta < 1.0, "'mixing.lazify_beta' must lie in [0, 1)");
    s.finish();
  }
  {
    Section s = top.child("objective");
    ObjectiveSpec& o = cfg.objective;
    o.kind = s.get<std::string>("kind");
    if (o.kind == "bilinear_logistic") {
      o.eta = s.get<double>("eta", 0.1);
      check(o.eta > 0.0, "'objective.eta' must be positive");
      o.dataset_seed = s.get<std::uint64_t>("dataset_seed", 1);
      o.dim = 2;
    } else if (o.kind == "quadratic") {
      o.dim = s.get<std::size_t>("dim", 2);
      o.dataset_seed = s.get<std::uint64_t>("dataset_seed", 1);
      o.shift = s.get<double>("shift", 0.1);
      check(o.shift > 0.0, "'objective.shift' must be positive");
    } else if (o.kind == "identical_quartic") {
      o.dim = s.get<std::size_t>("dim", 2);
    } else {
      detail::config_fail("'objective.kind' must be one of bilinear_logistic, quadratic, identical_quartic; got '" +
                          o.kind + "'");
    }
    check(o.dim >= 1, "'objective.dim' must be at least 1");
    o.lipschitz_radius = s.get<double>("lipschitz_radius", 3.0);
    check(o.lipschitz_radius > 0.0, "'objective.lipschitz_radius' must be positive");
    s.finish();
  }
  {
    Section s = top.child("solver");
    SolverSpec& sv = cfg.solver;
    sv.kind = s.get<std::string>("kind");
    check(sv.kind == "extra_recurrence" || sv.kind == "extra_dynamical" || sv.kind == "extra_jacobi" || sv.kind == "dgd",
          "'solver.kind' must be one of extra_recurrence, extra_dynamical, extra_jacobi, dgd; got '" + sv.kind + "'");
    Section a = s.child("alpha");
    const std::string mode = a.get<std::string>("mode");
    if (mode == "fixed") {
      sv.alpha.mode = AlphaSpec::Mode::fixed;
      sv.alpha.value = a.get<double>("value");
      check(sv.alpha.value > 0.0, "'solver.alpha.value' must be positive");
    } else if (mode == "theoretical_thm1" || mode == "theoretical_thm2") {
      sv.alpha.mode = mode == "theoretical_thm1" ? AlphaSpec::Mode::theoretical_thm1 : AlphaSpec::Mode::theoretical_thm2;
      sv.alpha.safety = a.get<double>("safety", 0.99);
      check(sv.alpha.safety > 0.0 && sv.alpha.safety <= 1.0, "'solver.alpha.safety' must lie in (0, 1]");
    } else if (mode == "diminishing") {
      sv.alpha.mode = AlphaSpec::Mode::diminishing;
      sv.alpha.a = a.get<double>("a");
      sv.alpha.b = a.get<double>("b");
      check(sv.alpha.a > 0.0 && sv.alpha.b > 0.0, "'solver.alpha.a' and 'solver.alpha.b' must be positive");
      check(sv.kind == "dgd", "'solver.alpha.mode' diminishing is only valid for dgd");
    } else {
      detail::config_fail(
          "'solver.alpha.mode' must be one of fixed, theoretical_thm1, theoretical_thm2, diminishing; got '" + mode +
          "'");
    }
    a.finish();
    sv.engine = s.get<std::string>("engine", std::string("aggregate"));
    check(sv.engine == "aggregate" || sv.engine == "agents", "'solver.engine' must be aggregate or agents");
    check(sv.engine == "aggregate" || sv.kind != "dgd", "'solver.engine' agents is only available for EXTRA");
    sv.threads = s.get<unsigned>("threads", 1u);
    check(sv.threads >= 1, "'solver.threads' must be at least 1");
    s.finish();
  }
  if (auto s = top.optional_child("init")) {
    cfg.init = detail::parse_init(*s);
  }
  if (cfg.init.kind == InitSpec::Kind::point)
    check(cfg.init.value.size() == cfg.objective.dim,
          "'init.value' must have " + std::to_string(cfg.objective.dim) + " entries");
  if (auto s = top.optional_child("metrics")) {
    cfg.metrics.consensus_error = s->get<bool>("consensus_error", true);
    cfg.metrics.avg_grad_norm = s->get<bool>("avg_grad_norm", true);
    cfg.metrics.objective = s->get<bool>("objective", true);
    cfg.metrics.dist_to_targets = s->get<bool>("dist_to_targets", true);
    s->finish();
  }
  if (auto s = top.optional_child("tolerances")) {
    cfg.tolerances.consensus = s->get<double>("consensus", 1e-6);
    cfg.tolerances.grad = s->get<double>("grad", 1e-6);
    cfg.tolerances.eig = s->get<double>("eig", 1e-8);
    check(cfg.tolerances.consensus > 0.0 && cfg.tolerances.grad > 0.0 && cfg.tolerances.eig > 0.0,
          "'tolerances' entries must be positive");
    s->finish();
  }
  if (auto s = top.optional_child("monte_carlo")) {
    MonteCarloSpec mc;
    mc.trials = s->get<std::size_t>("trials");
    check(mc.trials >= 1, "'monte_carlo.trials' must be at least 1");
    mc.master_seed = s->get<std::uint64_t>("master_seed", cfg.seed);
    mc.saddle_tol = s->get<double>("saddle_tol", 1e-3);
    mc.conv_tol = s->get<double>("conv_tol", 1e-3);
    check(mc.saddle_tol > 0.0 && mc.conv_tol > 0.0, "'monte_carlo' tolerances must be positive");
    mc.threads = s->get<unsigned>("threads", 0u);
    mc.init = detail::parse_init(s->child("init"));
    s->finish();
    cfg.monte_carlo = mc;
  }
  if (auto s = top.optional_child("output")) {
    cfg.output_dir = s->get<std::string>("dir", std::string("out"));
    s->finish();
  }
  top.finish();
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  ordered_json root;
  try {
    root = ordered_json::parse(text, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    const std::string what = e.what();
    const auto colon = what.find("parse error");
    fail(ErrorKind::config, "parse error at " + detail::line_info(text, e.byte == 0 ? 0 : e.byte - 1) + ": " +
                                (colon == std::string::npos ? what : what.substr(colon)));
  }
  return parse_config(root);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::config, "cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_config_text(buffer.str());
  } catch (const LabError& e) {
    if (e.kind() != ErrorKind::config) throw;
    const std::string msg = e.what();
    const std::string prefix = "config error: ";
    fail(ErrorKind::config, path + ": " + (msg.rfind(prefix, 0) == 0 ? msg.substr(prefix.size()) : msg));
  }
}

/// Canonical form of a parsed config, with every default filled in.
inline ordered_json to_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["seed"] = cfg.seed;
  ordered_json graph{{"kind", cfg.graph.kind}, {"m", cfg.graph.m}};
  if (cfg.graph.kind == "circulant") graph["degree"] = cfg.graph.degree;
  j["graph"] = graph;
  j["mixing"] = {{"scheme", cfg.mixing.scheme}, {"theta", cfg.mixing.theta}, {"lazify_beta", cfg.mixing.lazify_beta}};
  ordered_json obj{{"kind", cfg.objective.kind}};
  if (cfg.objective.kind == "bilinear_logistic") {
    obj["eta"] = cfg.objective.eta;
    obj["dataset_seed"] = cfg.objective.dataset_seed;
  } else if (cfg.objective.kind == "quadratic") {
    obj["dim"] = cfg.objective.dim;
    obj["dataset_seed"] = cfg.objective.dataset_seed;
    obj["shift"] = cfg.objective.shift;
  } else {
    obj["dim"] = cfg.objective.dim;
  }
  obj["lipschitz_radius"] = cfg.objective.lipschitz_radius;
  j["objective"] = obj;
  ordered_json alpha;
  switch (cfg.solver.alpha.mode) {
    case AlphaSpec::Mode::fixed: alpha = {{"mode", "fixed"}, {"value", cfg.solver.alpha.value}}; break;
    case AlphaSpec::Mode::theoretical_thm1:
      alpha = {{"mode", "theoretical_thm1"}, {"safety", cfg.solver.alpha.safety}};
      break;
    case AlphaSpec::Mode::theoretical_thm2:
      alpha = {{"mode", "theoretical_thm2"}, {"safety", cfg.solver.alpha.safety}};
      break;
    case AlphaSpec::Mode::diminishing:
      alpha = {{"mode", "diminishing"}, {"a", cfg.solver.alpha.a}, {"b", cfg.solver.alpha.b}};
      break;
  }
  // Thread counts are left out so the snapshot does not depend on parallelism.
  j["solver"] = {{"kind", cfg.solver.kind}, {"alpha", alpha}, {"engine", cfg.solver.engine}};
  j["iters"] = cfg.iters;
  j["init"] = detail::init_to_json(cfg.init);
  j["metrics"] = {{"consensus_error", cfg.metrics.consensus_error},
                  {"avg_grad_norm", cfg.metrics.avg_grad_norm},
                  {"objective", cfg.metrics.objective},
                  {"dist_to_targets", cfg.metrics.dist_to_targets}};
  j["tolerances"] = {
      {"consensus", cfg.tolerances.consensus}, {"grad", cfg.tolerances.grad}, {"eig", cfg.tolerances.eig}};
  if (cfg.monte_carlo) {
    const auto& mc = *cfg.monte_carlo;
    j["monte_carlo"] = {{"trials", mc.trials},         {"master_seed", mc.master_seed},
                        {"saddle_tol", mc.saddle_tol}, {"conv_tol", mc.conv_tol},
                        {"init", detail::init_to_json(mc.init)}};
  }
  j["output"] = {{"dir", cfg.output_dir}};
  return j;
}

}  // namespace extra_lab
