#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace dsg;

namespace {

double rel_diff(const Matrix& a, const Matrix& b) {
  return max_abs(a - b) / (1.0 + max_abs(b));
}

}  // namespace

// Example 1 at t = T: P_{T+1} = 0, so P_T is the lifted stage cost
// [[1, .5], [.5, 5]] and the gains vanish.
TEST(Riccati, TerminalStageIsStageCost) {
  const auto m = oracle::example1(2);
  const auto sol = solve_finite(m, 0.5);
  const auto& last = sol.at(2);
  EXPECT_DOUBLE_EQ(last.theta(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(last.theta_bar(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(last.P(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(last.P(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(last.P(1, 1), 5.0);
}

// Example 1 at alpha = 0, one step before the end: the deviation channel
// weighs (Q, R) = (1, 5) and the mean channel (Q + Sx, R + Su) = (0.5, 5),
// so theta = -1/6 and theta_bar = -0.5/5.5.
TEST(Riccati, ScalarMeanFieldGainByHand) {
  const auto m = oracle::example1(2);
  const auto sol = solve_finite(m, 0.0);
  EXPECT_NEAR(sol.at(1).theta(0, 0), -1.0 / 6.0, 1e-15);
  EXPECT_NEAR(sol.at(1).theta_bar(0, 0), -0.5 / (5.0 + 0.5), 1e-15);
}

TEST(Riccati, SymmetryPreserved) {
  oracle::Rng r(11);
  for (int k = 0; k < 10; ++k) {
    const auto m = oracle::random_general(r, 3, 2, 15);
    const auto sol = solve_finite(m, 0.2);
    for (int t = 1; t <= 15; ++t)
      EXPECT_LT(asymmetry(sol.at(t).P), 1e-9 * (1.0 + max_abs(sol.at(t).P)));
  }
}

TEST(Riccati, DecoupledEquivalence) {
  oracle::Rng r(12);
  for (int k = 0; k < 10; ++k) {
    const auto m = oracle::random_decoupled(r, oracle::rand_int(r, 1, 3),
                                            oracle::rand_int(r, 1, 3), 12);
    const auto d = solve_decoupled_infinite(m);
    const auto f = solve_finite(m, 0.0);
    for (int t = 1; t <= 12; ++t) {
      EXPECT_LT(rel_diff(f.at(t).theta, d.theta[t - 1]), 1e-10);
      EXPECT_LT(rel_diff(f.at(t).theta_bar, d.theta_bar[t - 1]), 1e-10);
    }
  }
}

TEST(Riccati, DecoupledRejectsMeanFieldDynamics) {
  auto m = oracle::example1(3);
  m.stages[0].Abar(0, 0) = 0.1;
  EXPECT_THROW(solve_decoupled_infinite(m), Error);
}

TEST(Riccati, SocialGainsDoNotDependOnAlpha) {
  oracle::Rng r(13);
  for (int k = 0; k < 5; ++k) {
    const auto m = oracle::random_social(r, 2, 2, 10);
    const auto s = solve_social(m);
    for (double alpha : {0.01, 0.1, 0.37, 0.5, 0.9}) {
      const auto f = solve_finite(m, alpha);
      for (int t = 1; t <= 10; ++t) {
        EXPECT_LT(rel_diff(f.at(t).theta, s.theta[t - 1]), 1e-10);
        EXPECT_LT(rel_diff(f.at(t).theta_bar, s.theta_bar[t - 1]), 1e-10);
      }
    }
  }
}

TEST(Riccati, ScalingConsistency) {
  oracle::Rng r(14);
  const auto m = oracle::random_general(r, 2, 2, 8);
  GameModel scaled = m;
  for (auto& s : scaled.stages) s = s.scaled_cost(3.5);
  const auto a = solve_finite(m, 0.25), b = solve_finite(scaled, 0.25);
  for (int t = 1; t <= 8; ++t) {
    EXPECT_LT(rel_diff(b.at(t).theta, a.at(t).theta), 1e-12);
    EXPECT_LT(rel_diff(b.at(t).theta_bar, a.at(t).theta_bar), 1e-12);
    EXPECT_LT(rel_diff(b.at(t).P, 3.5 * a.at(t).P), 1e-12);
    EXPECT_LT(rel_diff(b.at(t).Pd, 3.5 * a.at(t).Pd), 1e-12);
  }
}

TEST(Riccati, AlgebraicMatchesLongDiscountedHorizon) {
  GameModel m = oracle::example1(1);
  m.horizon.reset();
  m.stages.resize(1);
  const double gamma = 0.9;
  const auto alg = solve_algebraic(m, 0.1, gamma);
  EXPECT_LT(alg.residual, 1e-9);
  const auto fin = solve_finite(discounted_horizon(m, gamma, 400), 0.1);
  EXPECT_LT(rel_diff(fin.at(1).theta, alg.at(1).theta), 1e-8);
  EXPECT_LT(rel_diff(fin.at(1).theta_bar, alg.at(1).theta_bar), 1e-8);
  EXPECT_LT(rel_diff(fin.at(1).P, alg.at(1).P), 1e-8);
}

TEST(Riccati, ContinuityInAlpha) {
  const auto m = oracle::example1(50);
  const auto base = solve_finite(m, 0.0);
  double prev = 1e300;
  for (int n : {4, 16, 64, 256, 1024}) {
    const auto s = solve_finite(m, 1.0 / n);
    double d = 0.0;
    for (int t = 1; t <= 50; ++t)
      d = std::max({d, max_abs(s.at(t).theta - base.at(t).theta),
                    max_abs(s.at(t).theta_bar - base.at(t).theta_bar)});
    EXPECT_LT(d, prev);
    prev = d;
  }
  EXPECT_LT(prev, 1e-2);
}

TEST(Riccati, PositiveDefinitenessFailureIsReported) {
  auto m = oracle::example1(5);
  for (auto& s : m.stages) s.R(0, 0) = -1.0;
  const auto sol = solve_finite(m, 0.5);
  EXPECT_THROW(detail::require_pd(sol, "check"), Error);
}

TEST(Assumptions, Example1) {
  const auto r = check_assumptions(oracle::example1(50), WeightProfile::homogeneous(10));
  EXPECT_EQ(r["A2"].status, Status::Holds);
  EXPECT_EQ(r["A3"].status, Status::Holds);
  EXPECT_EQ(r["A4"].status, Status::Holds);
}

TEST(Assumptions, SocialStructure) {
  oracle::Rng r(15);
  const auto m = oracle::random_social(r, 2, 1, 5);
  const auto rep = check_assumptions(m, WeightProfile::positive({0.2, 0.3, 0.5}));
  EXPECT_EQ(rep["A5"].status, Status::Holds);
}

TEST(Assumptions, StationaryChecks) {
  GameModel m = oracle::example1(1);
  m.horizon.reset();
  m.stages.resize(1);
  const auto r = check_assumptions(m, WeightProfile::homogeneous(10), std::nullopt, 0.9);
  EXPECT_EQ(r["A9"].status, Status::Holds) << r["A9"].note;
  EXPECT_NE(r["A13"].status, Status::Fails) << r["A13"].note;
}
