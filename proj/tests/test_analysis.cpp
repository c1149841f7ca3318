#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "extra_lab/analysis.hpp"
#include "extra_lab/solvers.hpp"
#include "support/error_kind.hpp"
#include "support/oracles.hpp"

using namespace extra_lab;
using extra_lab::testing::kind_of;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

MixingPair metropolis_pair(const NetworkGraph& g, double theta = 0.5) {
  return make_mixing_pair(metropolis_weights(g), theta, g);
}

StackedPoint gaussian_point(std::size_t m, std::size_t n, std::uint64_t seed, double sd = 1.0) {
  PhiloxStream rng(seed, 0, RngDomain::init);
  StackedPoint x(m, n);
  for (Eigen::Index i = 0; i < x.data().size(); ++i) x.data()(i) = rng.gaussian(0.0, sd);
  return x;
}

}  // namespace

TEST(Metrics, ConsensusErrorExamples) {
  EXPECT_NEAR(consensus_error(StackedPoint(2, 1, vec({1.0, -1.0}))), std::sqrt(2.0), 1e-15);
  EXPECT_EQ(consensus_error(StackedPoint::consensual(4, vec({3.0, -2.0}))), 0.0);
}

TEST(Metrics, ConsensusErrorZeroIffConsensual) {
  PhiloxStream rng(9, 0, RngDomain::search);
  for (int t = 0; t < 50; ++t) {
    const std::size_t m = 2 + rng.next_u32() % 6;
    const StackedPoint x = gaussian_point(m, 3, static_cast<std::uint64_t>(t));
    EXPECT_GT(consensus_error(x), 0.0);
    EXPECT_NEAR(consensus_error(StackedPoint::consensual(m, x.average())), 0.0, 1e-15);
  }
}

TEST(Metrics, AverageGradientNorm) {
  // f1 = x^2/2, f2 = (x-2)^2/2 at (1, 1): local gradients -1 and 1 cancel.
  const auto pair = make_quadratics({Matrix::Ones(1, 1), Matrix::Ones(1, 1)}, {vec({0.0}), vec({-2.0})});
  EXPECT_EQ(avg_gradient_norm(pair, StackedPoint(2, 1, vec({1.0, 1.0}))), 0.0);
  // At (3, 3) both gradients are (3, 1): stacked average block is 2, norm sqrt(2) * 2.
  EXPECT_NEAR(avg_gradient_norm(pair, StackedPoint(2, 1, vec({3.0, 3.0}))), 2.0 * std::sqrt(2.0), 1e-14);
}

TEST(Metrics, DistanceToConsensualTargets) {
  const std::vector<Vector> targets{vec({1.0, 1.0}), vec({-1.0, -1.0})};
  const StackedPoint x(2, 2, vec({1.0, 1.0, 1.0, 2.0}));
  EXPECT_NEAR(distance_to_consensual(x, targets), 1.0, 1e-15);
}

TEST(Bounds, ExamplesAndMinimum) {
  EXPECT_NEAR(step_bound_thm1(0.0, 1.0), 1.0 / 61.0, 1e-16);
  EXPECT_NEAR(step_bound_thm1(0.5, 1.0), 0.75 / 61.0, 1e-16);
  // tiny lambda_min(V) makes the second term bind
  EXPECT_NEAR(step_bound_thm2(0.0, 1.0, 1e-3), 1e-3, 1e-18);
  EXPECT_NEAR(step_bound_thm2(0.0, 1.0, 0.5), 1.0 / 61.0, 1e-16);
  EXPECT_EQ(kind_of([] { step_bound_thm1(1.0, 1.0); }), ErrorKind::parameter);
  EXPECT_EQ(kind_of([] { step_bound_thm1(0.5, 0.0); }), ErrorKind::parameter);
  EXPECT_EQ(kind_of([] { step_bound_thm2(0.5, 1.0, 0.0); }), ErrorKind::parameter);
}

TEST(Bounds, DecreasingInLipschitzAndLambda) {
  double prev = step_bound_thm1(0.3, 0.1);
  for (double l = 0.2; l < 10.0; l += 0.1) {
    const double cur = step_bound_thm1(0.3, l);
    EXPECT_LT(cur, prev);
    prev = cur;
  }
  EXPECT_GT(step_bound_thm1(0.2, 2.0), step_bound_thm1(0.6, 2.0));
}

TEST(Classify, QuarticLabels) {
  const std::size_t m = 4;
  const auto obj = make_identical_quartic(m, 2);
  EXPECT_EQ(classify_point(obj, StackedPoint::consensual(m, vec({0.0, 0.0}))).label,
            Stationarity::consensual_strict_saddle);
  const auto v = classify_point(obj, StackedPoint::consensual(m, vec({1.0, 0.0})));
  EXPECT_EQ(v.label, Stationarity::consensual_second_order);
  ASSERT_TRUE(v.summed_hessian_lambda_min.has_value());
  EXPECT_NEAR(*v.summed_hessian_lambda_min, 1.0, 1e-12);
  EXPECT_EQ(classify_point(obj, StackedPoint::consensual(m, vec({0.5, 0.0}))).label,
            Stationarity::consensual_nonstationary);
  EXPECT_EQ(classify_point(obj, gaussian_point(m, 2, 1)).label, Stationarity::nonconsensual);
  EXPECT_EQ(kind_of([&] { classify_point(obj, gaussian_point(m, 2, 1), {0.0, 1e-6, 1e-8}); }), ErrorKind::parameter);
}

TEST(Classify, BilinearOriginIsStrictSaddle) {
  const auto obj = generate_bilinear_logistic(20, 0.1, 1);
  const auto v = classify_point(obj, StackedPoint(20, 2));
  EXPECT_EQ(v.label, Stationarity::consensual_strict_saddle);
}

TEST(Classify, LooserToleranceNeverDowngrades) {
  const auto obj = generate_bilinear_logistic(6, 0.1, 3);
  auto rank = [](Stationarity s) {
    switch (s) {
      case Stationarity::nonconsensual: return 0;
      case Stationarity::consensual_nonstationary: return 1;
      default: return 2;
    }
  };
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const double sd = std::pow(10.0, -static_cast<double>(seed % 9));
    StackedPoint x = gaussian_point(6, 2, seed, sd);
    const Vector shift = gaussian_point(1, 2, seed + 1000).data() * 1e-3;
    x.as_columns().colwise() += shift;
    ClassifyTolerances tight{1e-8, 1e-8, 1e-8}, loose{1e-3, 1e-3, 1e-8};
    EXPECT_GE(rank(classify_point(obj, x, loose).label), rank(classify_point(obj, x, tight).label));
  }
}

TEST(TMap, SingleAgentJacobian) {
  const auto g = complete_graph(1);
  const auto pair = metropolis_pair(g);
  const auto obj = make_quadratics({Matrix::Ones(1, 1)}, {Vector::Zero(1)});
  const Matrix dt = t_map_jacobian(obj, StackedPoint(1, 1), 0.1, pair);
  Matrix expected(2, 2);
  expected << 0.9, 1.0, 0.0, 1.0;
  EXPECT_LT((dt - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(dt.determinant(), 0.9, 1e-15);
  EXPECT_NEAR(lemma4_certificate(obj, StackedPoint(1, 1), 0.1, pair).det, 0.9, 1e-15);
}

TEST(TMap, ZeroStepIsBareMixing) {
  const auto g = ring_graph(4);
  const auto pair = metropolis_pair(g, 0.4);
  const auto obj = random_quadratics(4, 2, 7);
  const Matrix dt = t_map_jacobian(obj, gaussian_point(4, 2, 2), 0.0, pair);
  const Matrix w = kron_identity(pair.W(), 2), v = kron_identity(pair.V(), 2);
  EXPECT_EQ(dt.topLeftCorner(8, 8), w);
  EXPECT_EQ(dt.bottomLeftCorner(8, 8), w - v);
}

TEST(TMap, JacobianMatchesFiniteDifferencesAndIgnoresCompanion) {
  const std::size_t m = 5;
  const auto g = ring_graph(m);
  const auto pair = metropolis_pair(g, 0.4);
  const auto obj = generate_bilinear_logistic(m, 0.1, 4);
  const double alpha = 0.2;
  const StackedPoint x = gaussian_point(m, 2, 11);
  const Matrix analytic = t_map_jacobian(obj, x, alpha, pair);
  for (std::uint64_t yseed : {21u, 22u}) {
    const StackedPoint y = gaussian_point(m, 2, yseed);
    const Eigen::Index mn = x.data().size();
    Vector base(2 * mn);
    base << x.data(), y.data();
    auto map = [&](const Vector& xy) {
      const auto [nx, ny] = t_map(obj, StackedPoint(m, 2, xy.head(mn)), StackedPoint(m, 2, xy.tail(mn)), alpha, pair);
      Vector out(2 * mn);
      out << nx.data(), ny.data();
      return out;
    };
    Matrix fd(2 * mn, 2 * mn);
    for (Eigen::Index c = 0; c < 2 * mn; ++c) {
      const double h = oracle::fd_step(base(c));
      Vector plus = base, minus = base;
      plus(c) += h;
      minus(c) -= h;
      fd.col(c) = (map(plus) - map(minus)) / (2.0 * h);
    }
    EXPECT_LT((fd - analytic).cwiseAbs().maxCoeff(), 1e-7) << "y seed " << yseed;
  }
}

TEST(TMap, StrictSaddleGivesExpandingDirection) {
  const std::size_t m = 20;
  const auto pair = metropolis_pair(complete_graph(m));
  const auto obj = generate_bilinear_logistic(m, 0.1, 1);
  for (double alpha : {0.01, 0.05, 0.2}) {
    const Matrix dt = t_map_jacobian(obj, StackedPoint(m, 2), alpha, pair);
    EXPECT_GT(spectral_radius(dt), 1.0) << "alpha " << alpha;
  }
}

TEST(Invertibility, InvertibleBelowTheBound) {
  PhiloxStream rng(33, 0, RngDomain::search);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t m = 2 + rng.next_u32() % 7;
    const auto g = m >= 3 ? ring_graph(m) : complete_graph(m);
    const auto pair = metropolis_pair(g, 0.45);
    const bool logistic = seed % 2 == 0;
    const auto obj = logistic ? generate_bilinear_logistic(m, 0.1, seed) : random_quadratics(m, 2, seed);
    const StackedPoint x = gaussian_point(m, 2, seed, 0.5);
    const double radius = std::max(1.0, x.data().cwiseAbs().maxCoeff() * std::sqrt(2.0));
    const double alpha = 0.9 * pair.spectral().lambda_min_V / lipschitz_bound(obj, radius);
    const auto cert = lemma4_certificate(obj, x, alpha, pair);
    EXPECT_TRUE(cert.invertible) << "seed " << seed << " det " << cert.det;
    EXPECT_NEAR(std::abs(t_map_jacobian(obj, x, alpha, pair).determinant()), std::abs(cert.det),
                1e-9 * cert.scale);
  }
}

TEST(Invertibility, SingularAboveTheBound) {
  // V = [[.75,.25],[.25,.75]], Hessians 2I, alpha .25: V - alpha H is rank one.
  const auto g = complete_graph(2);
  const auto pair = metropolis_pair(g, 0.5);
  const Matrix a = 2.0 * Matrix::Identity(1, 1);
  const auto obj = make_quadratics({a, a}, {Vector::Zero(1), Vector::Zero(1)});
  const auto cert = lemma4_certificate(obj, StackedPoint(2, 1), 0.25, pair);
  EXPECT_FALSE(cert.invertible);
  EXPECT_EQ(cert.det, 0.0);
}

TEST(Cesaro, ZeroSeries) {
  std::vector<MetricSample> series(100);
  for (std::size_t k = 0; k < series.size(); ++k) series[k].k = k + 1;
  const auto report = cesaro_rates(series);
  EXPECT_TRUE(report.consensus.partial_sums_bounded);
  EXPECT_EQ(report.consensus.loglog_slope, -std::numeric_limits<double>::infinity());
}

TEST(Cesaro, SummableSeriesHasUnitSlope) {
  std::vector<MetricSample> series(1000);
  for (std::size_t k = 0; k < series.size(); ++k) {
    series[k].k = k + 1;
    series[k].consensus_error = 1.0 / static_cast<double>(k + 1);  // squared: 1/k^2
    series[k].avg_grad_norm = 1.0;
  }
  const auto report = cesaro_rates(series);
  EXPECT_TRUE(report.consensus.partial_sums_bounded);
  EXPECT_NEAR(report.consensus.loglog_slope, -1.0, 0.01);
  EXPECT_FALSE(report.gradient.partial_sums_bounded);
  EXPECT_NEAR(report.gradient.loglog_slope, 0.0, 1e-9);
}

TEST(Cesaro, ShortSeriesRejected) {
  std::vector<MetricSample> series(49);
  EXPECT_EQ(kind_of([&] { cesaro_rates(series); }), ErrorKind::parameter);
}
