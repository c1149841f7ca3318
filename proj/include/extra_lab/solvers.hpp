#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "extra_lab/error.hpp"
#include "extra_lab/graph.hpp"
#include "extra_lab/mixing.hpp"
#include "extra_lab/objectives.hpp"
#include "extra_lab/record.hpp"

namespace extra_lab {

/// Which of the three equivalent EXTRA recursions a state follows.
///  recurrence: x^{k+2} = x^{k+1} + W x^{k+1} - V x^k - a (g^{k+1} - g^k)
///  dynamical:  x^{k+1} = W x^k + z^k,
///              z^{k+1} = (W - V) x^k + z^k - a (g^{k+1} - g^k),  z^0 = -a g^0
///  jacobi:     x^{k+1} = W x^k + y^k - a g^k,
///              y^{k+1} = (W - V) x^k + y^k,                      y^0 = 0
/// (W, V stand for W (x) I_n and V (x) I_n; g^k = grad F(x^k).)
enum class ExtraForm { recurrence, dynamical, jacobi };

constexpr std::string_view to_string(ExtraForm form) {
  switch (form) {
    case ExtraForm::recurrence: return "extra_recurrence";
    case ExtraForm::dynamical: return "extra_dynamical";
    case ExtraForm::jacobi: return "extra_jacobi";
  }
  return "unknown";
}

inline constexpr double kDivergenceThreshold = 1e12;

struct ExtraState {
  ExtraForm form = ExtraForm::dynamical;
  std::size_t k = 0;
  double alpha = 0.0;
  StackedPoint x;  // x^k
  /// recurrence: x^{k-1} (meaningless at k = 0); dynamical: z^k; jacobi: y^k.
  StackedPoint companion;
  StackedPoint grad;       // grad F(x^k)
  StackedPoint grad_prev;  // recurrence only: grad F(x^{k-1})
};

/// Step-size rule a_k: constant, or a / (k + b).
struct StepSchedule {
  enum class Kind { constant, diminishing };
  Kind kind = Kind::constant;
  double a = 0.0;
  double b = 0.0;

  static StepSchedule constant(double alpha) {
    require(alpha > 0.0, ErrorKind::parameter, "constant step size must be positive");
    return {Kind::constant, alpha, 0.0};
  }
  static StepSchedule diminishing(double a, double b) {
    require(a > 0.0 && b > 0.0, ErrorKind::parameter, "diminishing schedule a/(k+b) needs a > 0 and b > 0");
    return {Kind::diminishing, a, b};
  }

  double at(std::size_t k) const { return kind == Kind::constant ? a : a / (static_cast<double>(k) + b); }
};

struct DgdState {
  std::size_t k = 0;
  StackedPoint x;
  StepSchedule schedule;
};

namespace detail {

inline void require_compatible(const StackedPoint& x, const MixingPair& pair, const ObjectiveSet& obj) {
  obj.check_shape(x);
  require(pair.agents() == obj.agents(), ErrorKind::shape,
          "mixing pair has " + std::to_string(pair.agents()) + " agents, objective set has " +
              std::to_string(obj.agents()));
}

/// (M (x) I_n) x for an m x m matrix M.
inline StackedPoint mix(const Matrix& mixing, const StackedPoint& x) {
  StackedPoint out(x.agents(), x.dim());
  out.as_columns().noalias() = x.as_columns() * mixing.transpose();
  return out;
}

inline void check_finite(const StackedPoint& x, std::size_t iteration) {
  for (Eigen::Index i = 0; i < x.data().size(); ++i) {
    const double v = x.data()(i);
    if (!std::isfinite(v)) throw DivergenceError(iteration, "non-finite iterate coordinate");
    if (std::abs(v) > kDivergenceThreshold)
      throw DivergenceError(iteration, "iterate coordinate magnitude exceeded 1e12");
  }
}

}  // namespace detail

inline ExtraState extra_init(const StackedPoint& x0, double alpha, const MixingPair& pair, const ObjectiveSet& obj,
                             ExtraForm form) {
  require(alpha > 0.0, ErrorKind::parameter, "EXTRA step size must be positive, got " + std::to_string(alpha));
  detail::require_compatible(x0, pair, obj);
  ExtraState s;
  s.form = form;
  s.alpha = alpha;
  s.x = x0;
  s.grad = stacked_gradient(obj, x0);
  switch (form) {
    case ExtraForm::recurrence:
      s.companion = StackedPoint(x0.agents(), x0.dim());
      s.grad_prev = StackedPoint(x0.agents(), x0.dim());
      break;
    case ExtraForm::dynamical:
      s.companion = StackedPoint(x0.agents(), x0.dim(), -alpha * s.grad.data());
      break;
    case ExtraForm::jacobi:
      s.companion = StackedPoint(x0.agents(), x0.dim());
      break;
  }
  return s;
}

/// One synchronous round; every agent reads only the pre-round snapshot.
inline ExtraState extra_step(ExtraState s, const MixingPair& pair, const ObjectiveSet& obj) {
  const double a = s.alpha;
  const StackedPoint wx = detail::mix(pair.W(), s.x);
  StackedPoint next(s.x.agents(), s.x.dim());
  switch (s.form) {
    case ExtraForm::recurrence: {
      if (s.k == 0) {
        next.data() = wx.data() - a * s.grad.data();
      } else {
        const StackedPoint v_prev = detail::mix(pair.V(), s.companion);
        next.data() = s.x.data() + wx.data() - v_prev.data() - a * (s.grad.data() - s.grad_prev.data());
      }
      detail::check_finite(next, s.k + 1);
      s.companion = std::move(s.x);
      s.grad_prev = std::move(s.grad);
      s.grad = stacked_gradient(obj, next);
      break;
    }
    case ExtraForm::dynamical: {
      const StackedPoint vx = detail::mix(pair.V(), s.x);
      next.data() = wx.data() + s.companion.data();
      detail::check_finite(next, s.k + 1);
      StackedPoint grad_next = stacked_gradient(obj, next);
      s.companion.data() = wx.data() - vx.data() + s.companion.data() - a * (grad_next.data() - s.grad.data());
      s.grad = std::move(grad_next);
      break;
    }
    case ExtraForm::jacobi: {
      const StackedPoint vx = detail::mix(pair.V(), s.x);
      next.data() = wx.data() + s.companion.data() - a * s.grad.data();
      detail::check_finite(next, s.k + 1);
      s.companion.data() = wx.data() - vx.data() + s.companion.data();
      s.grad = stacked_gradient(obj, next);
      break;
    }
  }
  detail::check_finite(s.companion, s.k + 1);
  s.x = std::move(next);
  ++s.k;
  return s;
}

inline DgdState dgd_init(const StackedPoint& x0, StepSchedule schedule) { return {0, x0, schedule}; }

/// x^{k+1} = W x^k - a_k grad F(x^k).
inline DgdState dgd_step(DgdState s, const MixingPair& pair, const ObjectiveSet& obj) {
  detail::require_compatible(s.x, pair, obj);
  const double step = s.schedule.at(s.k);
  require(step > 0.0, ErrorKind::parameter, "DGD step size must stay positive");
  StackedPoint next = detail::mix(pair.W(), s.x);
  next.data() -= step * stacked_gradient(obj, s.x).data();
  detail::check_finite(next, s.k + 1);
  s.x = std::move(next);
  ++s.k;
  return s;
}

using SolverState = std::variant<ExtraState, DgdState>;

inline const StackedPoint& iterate(const SolverState& s) {
  return std::visit([](const auto& st) -> const StackedPoint& { return st.x; }, s);
}

/// Maps (k, x^k) to the metrics recorded for that round.
using Observer = std::function<MetricSample(std::size_t k, const StackedPoint& x)>;

/// Raised by run() when a step diverges; carries the rounds completed before.
class RunDiverged : public DivergenceError {
 public:
  RunDiverged(const DivergenceError& cause, RunRecord partial)
      : DivergenceError(cause), partial_(std::move(partial)) {}
  const RunRecord& partial() const { return partial_; }

 private:
  RunRecord partial_;
};

/// Advances `state` by `iters` rounds, observing x^1 .. x^iters.
inline RunRecord run(SolverState& state, const MixingPair& pair, const ObjectiveSet& obj, std::size_t iters,
                     const Observer& observer) {
  require(iters >= 1, ErrorKind::parameter, "a run needs at least one iteration");
  RunRecord record;
  record.initial_iterate = iterate(state);
  record.series.reserve(iters);
  const auto started = std::chrono::steady_clock::now();
  try {
    for (std::size_t round = 0; round < iters; ++round) {
      std::visit(
          [&](auto& st) {
            if constexpr (std::is_same_v<std::decay_t<decltype(st)>, ExtraState>)
              st = extra_step(std::move(st), pair, obj);
            else
              st = dgd_step(std::move(st), pair, obj);
          },
          state);
      ++record.iterations;
      if (observer) record.series.push_back(observer(record.iterations, iterate(state)));
    }
  } catch (const DivergenceError& e) {
    record.error = e.what();
    record.final_iterate = iterate(state);
    record.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    throw RunDiverged(e, std::move(record));
  }
  record.final_iterate = iterate(state);
  record.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return record;
}

// ---------------------------------------------------------------------------
// Agent-level view: each agent holds only its own block and talks to its
// neighbors through messages.

/// What agent i knows about the network: its own weights and its neighbors'.
struct AgentContext {
  std::size_t id = 0;
  double theta = 0.0;
  double self_weight = 0.0;                                 // W_ii
  std::vector<std::pair<std::size_t, double>> neighbor_weights;  // (j, W_ij), sorted by j
  const LocalObjective* objective = nullptr;
};

struct LocalAgentState {
  ExtraForm form = ExtraForm::dynamical;
  std::size_t k = 0;
  double alpha = 0.0;
  Vector x;          // x_i^k
  Vector companion;  // x_i^{k-1}, z_i^k, or y_i^k
  Vector grad;       // grad f_i(x_i^k)
  Vector grad_prev;  // recurrence only
};

/// Round-k broadcast of agent `from`: its x^k, and x^{k-1} in recurrence form.
struct AgentMessage {
  std::size_t from = 0;
  Vector x;
  Vector x_prev;
};

struct AgentStepResult {
  LocalAgentState state;
  AgentMessage outbox;
};

inline AgentMessage broadcast(const AgentContext& ctx, const LocalAgentState& s) {
  AgentMessage msg{ctx.id, s.x, {}};
  if (s.form == ExtraForm::recurrence) msg.x_prev = s.companion;
  return msg;
}

/// One EXTRA round computed by agent i from its own state and exactly one
/// message per neighbor. V_ij = theta delta_ij + (1 - theta) W_ij is formed
/// locally.
inline AgentStepResult neighbor_view_step(const AgentContext& ctx, LocalAgentState s,
                                          std::span<const AgentMessage> inbox) {
  const auto& nbrs = ctx.neighbor_weights;
  std::vector<const AgentMessage*> by_neighbor(nbrs.size(), nullptr);
  for (const AgentMessage& msg : inbox) {
    auto it = std::lower_bound(nbrs.begin(), nbrs.end(), msg.from,
                               [](const auto& entry, std::size_t j) { return entry.first < j; });
    require(it != nbrs.end() && it->first == msg.from, ErrorKind::protocol,
            "agent " + std::to_string(ctx.id + 1) + " received a message from non-neighbor " +
                std::to_string(msg.from + 1));
    auto& slot = by_neighbor[static_cast<std::size_t>(it - nbrs.begin())];
    require(slot == nullptr, ErrorKind::protocol,
            "agent " + std::to_string(ctx.id + 1) + " received two messages from " + std::to_string(msg.from + 1));
    slot = &msg;
  }
  for (std::size_t e = 0; e < nbrs.size(); ++e)
    require(by_neighbor[e] != nullptr, ErrorKind::protocol,
            "missing message on edge (" + std::to_string(ctx.id + 1) + "," + std::to_string(nbrs[e].first + 1) +
                ")");

  const double theta = ctx.theta;
  const double a = s.alpha;
  // (W x)_i and (V x)_i from the round snapshot.
  Vector wx = ctx.self_weight * s.x;
  for (std::size_t e = 0; e < nbrs.size(); ++e) wx += nbrs[e].second * by_neighbor[e]->x;
  auto v_times = [&](const Vector& own, auto neighbor_value) {
    Vector out = (theta + (1.0 - theta) * ctx.self_weight) * own;
    for (std::size_t e = 0; e < nbrs.size(); ++e) out += ((1.0 - theta) * nbrs[e].second) * neighbor_value(e);
    return out;
  };

  Vector next;
  switch (s.form) {
    case ExtraForm::recurrence: {
      if (s.k == 0) {
        next = wx - a * s.grad;
      } else {
        for (std::size_t e = 0; e < nbrs.size(); ++e)
          require(by_neighbor[e]->x_prev.size() == s.x.size(), ErrorKind::protocol,
                  "message on edge (" + std::to_string(ctx.id + 1) + "," + std::to_string(nbrs[e].first + 1) +
                      ") lacks the previous iterate");
        const Vector v_prev = v_times(s.companion, [&](std::size_t e) -> const Vector& { return by_neighbor[e]->x_prev; });
        next = s.x + wx - v_prev - a * (s.grad - s.grad_prev);
      }
      s.companion = s.x;
      s.grad_prev = s.grad;
      s.grad = ctx.objective->gradient(next);
      break;
    }
    case ExtraForm::dynamical: {
      const Vector vx = v_times(s.x, [&](std::size_t e) -> const Vector& { return by_neighbor[e]->x; });
      next = wx + s.companion;
      Vector grad_next = ctx.objective->gradient(next);
      s.companion = wx - vx + s.companion - a * (grad_next - s.grad);
      s.grad = std::move(grad_next);
      break;
    }
    case ExtraForm::jacobi: {
      const Vector vx = v_times(s.x, [&](std::size_t e) -> const Vector& { return by_neighbor[e]->x; });
      next = wx + s.companion - a * s.grad;
      s.companion = wx - vx + s.companion;
      s.grad = ctx.objective->gradient(next);
      break;
    }
  }
  s.x = std::move(next);
  ++s.k;
  AgentStepResult result{std::move(s), {}};
  result.outbox = broadcast(ctx, result.state);
  return result;
}

/// Synchronous message-passing simulation of EXTRA: per round every agent
/// broadcasts to its neighbors, then all agents step from that snapshot.
/// Agents may step on several threads; each writes only its own slot.
class AgentNetwork {
 public:
  AgentNetwork(const NetworkGraph& graph, const MixingPair& pair, const ObjectiveSet& obj, const ExtraState& init)
      : graph_(graph) {
    detail::require_compatible(init.x, pair, obj);
    require(graph.agents() == obj.agents(), ErrorKind::shape, "graph and objective set disagree on agent count");
    const std::size_t m = graph.agents();
    for (std::size_t i = 0; i < m; ++i) {
      AgentContext ctx;
      ctx.id = i;
      ctx.theta = pair.theta();
      ctx.self_weight = pair.W()(i, i);
      for (std::size_t j : graph.neighbors(i)) ctx.neighbor_weights.emplace_back(j, pair.W()(i, j));
      ctx.objective = &obj.local(i);
      contexts_.push_back(std::move(ctx));

      LocalAgentState st;
      st.form = init.form;
      st.k = init.k;
      st.alpha = init.alpha;
      st.x = init.x.block(i);
      st.companion = init.companion.block(i);
      st.grad = init.grad.block(i);
      if (init.form == ExtraForm::recurrence) st.grad_prev = init.grad_prev.block(i);
      states_.push_back(std::move(st));
    }
  }

  /// Runs one round; returns the number of directed messages delivered.
  std::size_t round(unsigned threads = 1) {
    const std::size_t m = states_.size();
    std::vector<AgentMessage> outboxes;
    outboxes.reserve(m);
    for (std::size_t i = 0; i < m; ++i) outboxes.push_back(broadcast(contexts_[i], states_[i]));

    std::vector<std::vector<AgentMessage>> inboxes(m);
    std::size_t delivered = 0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j : graph_.neighbors(i)) {
        inboxes[j].push_back(outboxes[i]);
        ++delivered;
      }

    std::vector<LocalAgentState> next(m);
    auto work = [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) next[i] = neighbor_view_step(contexts_[i], states_[i], inboxes[i]).state;
    };
    if (threads <= 1 || m < 2) {
      work(0, m);
    } else {
      std::vector<std::jthread> pool;
      const std::size_t chunk = (m + threads - 1) / threads;
      for (std::size_t begin = 0; begin < m; begin += chunk) pool.emplace_back(work, begin, std::min(m, begin + chunk));
    }  // jthreads join here: the round barrier
    states_ = std::move(next);
    return delivered;
  }

  StackedPoint iterate() const {
    const std::size_t n = states_.front().x.size();
    StackedPoint x(states_.size(), n);
    for (std::size_t i = 0; i < states_.size(); ++i) x.block(i) = states_[i].x;
    return x;
  }

  const LocalAgentState& agent(std::size_t i) const { return states_.at(i); }
  const AgentContext& context(std::size_t i) const { return contexts_.at(i); }

 private:
  NetworkGraph graph_;
  std::vector<AgentContext> contexts_;
  std::vector<LocalAgentState> states_;
};

}  // namespace extra_lab
