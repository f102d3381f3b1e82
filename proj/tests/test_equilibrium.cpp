#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace dsg;

namespace {

// Frozen from the stacked-space oracle (player cost under the exact
// equilibrium, Example 1, t0 = 1).
constexpr double kJ2 = 1109.997845512194;
constexpr double kJ10 = 1144.154851420395;

}  // namespace

TEST(Equilibrium, OptimalCostMatchesOracle) {
  const auto m = oracle::example1(50);
  for (auto [n, frozen] : {std::pair{2, kJ2}, {10, kJ10}}) {
    const auto p = WeightProfile::homogeneous(n);
    const auto a = realize_weights(p);
    const auto noise = oracle::example1_noise(n);
    const auto e = oracle::evaluate(m, a, noise, spne(m, p, 50), 0);
    EXPECT_NEAR(e.cost[0], frozen, 1e-9 * frozen);
    EXPECT_NEAR(optimal_cost(m, p, noise, 0).total, frozen, 1e-9 * frozen);
    EXPECT_NEAR(expected_cost(m, a, noise, spne(m, p, 50), 0).to_go[0], frozen,
                1e-9 * frozen);
  }
}

TEST(Equilibrium, NoProfitableDeviationExample1) {
  const auto m = oracle::example1(50);
  for (int n : {2, 3, 5}) {
    const auto p = WeightProfile::homogeneous(n);
    const auto a = realize_weights(p);
    const auto noise = oracle::example1_noise(n);
    const auto g = spne(m, p, 50);
    const auto e = oracle::evaluate(m, a, noise, g, 0);
    const auto lib = unilateral_deviation_benefit(m, noise, a, g, 0);
    for (int t0 = 1; t0 <= 50; ++t0) {
      EXPECT_LT(std::abs(e.benefit[t0 - 1]), 1e-8 * e.cost[0]);
      EXPECT_GE(lib.benefit[t0 - 1], 0.0);
      EXPECT_LT(lib.benefit[t0 - 1], 1e-8);
    }
  }
}

TEST(Equilibrium, NoProfitableDeviationRandomGeneral) {
  oracle::Rng r(21);
  for (int k = 0; k < 5; ++k) {
    const int n = oracle::rand_int(r, 2, 4);
    const auto m = oracle::random_general(r, 2, 2, 6);
    const auto p = WeightProfile::homogeneous(n);
    const auto a = realize_weights(p);
    const auto noise = oracle::random_noise(r, n, 2, false);
    const auto g = spne(m, p, 6);
    for (int i = 0; i < n; ++i) {
      const auto e = oracle::evaluate(m, a, noise, g, i);
      const auto lib = unilateral_deviation_benefit(m, noise, a, g, i);
      for (int t0 = 1; t0 <= 6; ++t0) {
        EXPECT_LT(std::abs(e.benefit[t0 - 1]), 1e-9 * (1.0 + std::abs(e.cost[0])));
        EXPECT_LT(lib.benefit[t0 - 1], 1e-9 * (1.0 + std::abs(e.cost[0])));
      }
    }
  }
}

TEST(Equilibrium, DeviationOracleDetectsSuboptimalGains) {
  const auto m = oracle::example1(20);
  const auto p = WeightProfile::homogeneous(3);
  const auto a = realize_weights(p);
  const auto noise = oracle::example1_noise(3);
  auto g = spne(m, p, 20);
  for (auto& th : g.theta) th *= 0.8;
  const auto e = oracle::evaluate(m, a, noise, g, 0);
  const auto lib = unilateral_deviation_benefit(m, noise, a, g, 0);
  EXPECT_GT(e.benefit[0], 0.1);
  EXPECT_NEAR(lib.benefit[0], e.benefit[0], 1e-9 * e.cost[0]);
}

TEST(Equilibrium, SocialGainsAreEquilibriumForPositiveWeights) {
  oracle::Rng r(22);
  for (int k = 0; k < 3; ++k) {
    const auto m = oracle::random_social(r, 2, 1, 8);
    const auto a = oracle::random_weights(r, 4);
    const auto noise = oracle::random_noise(r, 4, 2, false);
    const auto g = spne(m, WeightProfile::positive(a), 8, true);
    for (int i = 0; i < 4; ++i) {
      const auto e = oracle::evaluate(m, a, noise, g, i);
      EXPECT_LT(std::abs(e.benefit[0]), 1e-9 * (1.0 + std::abs(e.cost[0])));
    }
  }
}

TEST(Equilibrium, ExpectedCostMatchesOracleForAnyProfile) {
  oracle::Rng r(23);
  const auto m = oracle::random_general(r, 2, 1, 7);
  const auto a = oracle::random_weights(r, 3);
  const auto noise = oracle::random_noise(r, 3, 2, false);
  auto g = zero_strategy(m, 7);
  for (auto& th : g.theta) th = oracle::randn(r, 1, 2, 0.3);
  for (auto& th : g.theta_bar) th = oracle::randn(r, 1, 2, 0.3);
  for (int i = 0; i < 3; ++i) {
    const auto e = oracle::evaluate(m, a, noise, g, i);
    const auto c = expected_cost(m, a, noise, g, i).to_go;
    for (int t0 = 1; t0 <= 7; ++t0)
      EXPECT_NEAR(c[t0 - 1], e.cost[t0 - 1], 1e-10 * (1.0 + std::abs(e.cost[0])));
  }
}

TEST(Equilibrium, PredictionFollowsMeanDynamics) {
  const auto m = oracle::example1(10);
  const auto g = sapde(m, 4, Vector::Constant(1, 10.0), 10);
  for (int t = 1; t < 10; ++t)
    EXPECT_NEAR(g.z[t](0, 0), (1.0 + g.thb(t)(0, 0)) * g.z[t - 1](0, 0), 1e-12);
  EXPECT_EQ(g.ref, Reference::Prediction);
}

TEST(Equilibrium, SapdeGainsApproachMeanField) {
  const auto m = oracle::example1(50);
  const auto inf = swmfe(m, Vector::Constant(1, 10.0), 50);
  double prev = 1e300;
  for (int n = 2; n <= 1024; n *= 2) {
    const auto g = sapde(m, n, Vector::Constant(1, 10.0), 50);
    double d = 0.0;
    for (int t = 1; t <= 50; ++t)
      d = std::max({d, max_abs(g.th(t) - inf.th(t)), max_abs(g.thb(t) - inf.thb(t))});
    EXPECT_LE(d, prev);
    prev = d;
  }
  EXPECT_LT(1024 * prev, 2.0);
}

TEST(Equilibrium, MeanDeepStateUsesWeights) {
  NoiseModel nm;
  nm.initial_mean = {Vector::Constant(1, 1.0), Vector::Constant(1, 3.0)};
  EXPECT_DOUBLE_EQ(mean_deep_state({0.25, 0.75}, nm)(0), 2.5);
}

TEST(Equilibrium, ArbitraryPositiveWeightsNeedSocialCost) {
  const auto m = oracle::example1(5);
  EXPECT_THROW(spne(m, WeightProfile::positive({0.3, 0.7}), 5), Error);
}
