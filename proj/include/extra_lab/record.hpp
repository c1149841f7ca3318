#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "extra_lab/objectives.hpp"
#include "json.hpp"

namespace extra_lab {

struct MetricSample {
  std::size_t k = 0;
  double consensus_error = 0.0;
  double avg_grad_norm = 0.0;
  double objective = 0.0;
  std::optional<double> dist_to_targets;
};

enum class Stationarity {
  nonconsensual,
  consensual_nonstationary,
  consensual_first_order,
  consensual_second_order,
  consensual_strict_saddle,
};

constexpr std::string_view to_string(Stationarity s) {
  switch (s) {
    case Stationarity::nonconsensual: return "nonconsensual";
    case Stationarity::consensual_nonstationary: return "consensual_nonstationary";
    case Stationarity::consensual_first_order: return "consensual_first_order";
    case Stationarity::consensual_second_order: return "consensual_second_order";
    case Stationarity::consensual_strict_saddle: return "consensual_strict_saddle";
  }
  return "unknown";
}

struct StationarityVerdict {
  Stationarity label = Stationarity::nonconsensual;
  double consensus_residual = 0.0;
  double summed_gradient_norm = 0.0;
  /// lambda_min of sum_i Hessian f_i(x_i); only evaluated once the first two
  /// checks pass.
  std::optional<double> summed_hessian_lambda_min;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::size_t iterations = 0;  // completed rounds
  std::vector<MetricSample> series;
  StackedPoint initial_iterate;
  StackedPoint final_iterate;
  std::optional<StationarityVerdict> verdict;
  double wall_time_seconds = 0.0;
  std::optional<std::string> error;
  nlohmann::ordered_json config;  // snapshot of the experiment configuration
  nlohmann::ordered_json meta;    // solver metadata: spectral facts, bounds, alpha, targets
};

}  // namespace extra_lab
