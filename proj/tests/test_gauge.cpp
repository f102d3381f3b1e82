#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace dsg;

namespace {

double rel(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(b)); }

// Player i's cost in gauge coordinates for arbitrary weights.
double gauge_cost(const StageMatrices& s, const std::vector<double>& a,
                  const Matrix& X, const Matrix& U, int i) {
  const int n = static_cast<int>(a.size());
  std::vector<Vector> xs, us;
  for (int j = 0; j < n; ++j) {
    xs.push_back(X.col(j));
    us.push_back(U.col(j));
  }
  const GaugeState gx = to_gauge(xs, a), gu = to_gauge(us, a);
  const LiftedBlocks L = lift(s, a[i]);
  const double r = a[i] / (1.0 - a[i]);
  Vector vx(2 * X.rows()), vu(2 * U.rows());
  vx << gx.deltas[i], gx.bar;
  vu << gu.deltas[i], gu.bar;
  double c = vx.dot(L.Q * vx) + vu.dot(L.R * vu);
  c -= r * (gx.deltas[i].dot(s.Gx * gx.deltas[i]) +
            gu.deltas[i].dot(s.Gu * gu.deltas[i]));
  for (int j = 0; j < n; ++j)
    c += a[j] * (gx.deltas[j].dot(s.Gx * gx.deltas[j]) +
                 gu.deltas[j].dot(s.Gu * gu.deltas[j]));
  return c;
}

}  // namespace

TEST(Gauge, RoundTrip) {
  oracle::Rng r(1);
  const auto a = oracle::random_weights(r, 5);
  std::vector<Vector> x;
  for (int j = 0; j < 5; ++j) x.push_back(oracle::randn(r, 3, 1));
  const GaugeState g = to_gauge(x, a);
  Vector s = Vector::Zero(3);
  for (int j = 0; j < 5; ++j) {
    EXPECT_LT(max_abs(from_gauge(g, j) - x[j]), 1e-14);
    s += a[j] * g.deltas[j];
  }
  EXPECT_LT(max_abs(s), 1e-14);  // weighted deviations cancel
}

TEST(Gauge, CostEquivalence) {
  oracle::Rng r(2);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const int dx = oracle::rand_int(r, 1, 3), du = oracle::rand_int(r, 1, 3);
    const int n = oracle::rand_int(r, 2, 6);
    const auto m = oracle::random_general(r, dx, du, 1);
    const auto a = k % 2 ? oracle::random_weights(r, n)
                         : realize_weights(WeightProfile::homogeneous(n));
    const Matrix X = oracle::randn(r, dx, n, 3.0), U = oracle::randn(r, du, n, 3.0);
    for (int i = 0; i < n; ++i)
      worst = std::max(worst, rel(gauge_cost(m.at(1), a, X, U, i),
                                  stage_cost(m.at(1), a, X, U, i)));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Gauge, DynamicsEquivalence) {
  oracle::Rng r(3);
  double worst = 0.0;
  for (int k = 0; k < 30; ++k) {
    const int dx = oracle::rand_int(r, 1, 3), du = oracle::rand_int(r, 1, 3);
    const int n = oracle::rand_int(r, 2, 6);
    const auto m = oracle::random_general(r, dx, du, 1);
    const auto& s = m.at(1);
    const auto a = oracle::random_weights(r, n);
    const Matrix X = oracle::randn(r, dx, n), U = oracle::randn(r, du, n),
                 W = oracle::randn(r, dx, n);
    std::vector<Vector> xs, us, ws, xn;
    Vector xb = Vector::Zero(dx), ub = Vector::Zero(du);
    for (int j = 0; j < n; ++j) {
      xb += a[j] * X.col(j);
      ub += a[j] * U.col(j);
    }
    for (int j = 0; j < n; ++j) {
      xs.push_back(X.col(j));
      us.push_back(U.col(j));
      ws.push_back(W.col(j));
      xn.push_back(s.A * X.col(j) + s.B * U.col(j) + s.Abar * xb +
                   s.Bbar * ub + W.col(j));
    }
    const GaugeState gx = to_gauge(xs, a), gu = to_gauge(us, a),
                     gw = to_gauge(ws, a), gn = to_gauge(xn, a);
    const LiftedBlocks L = lift(s, a[0]);
    for (int i = 0; i < n; ++i) {
      Vector v(2 * dx), u(2 * du), w(2 * dx), expect(2 * dx);
      v << gx.deltas[i], gx.bar;
      u << gu.deltas[i], gu.bar;
      w << gw.deltas[i], gw.bar;
      expect << gn.deltas[i], gn.bar;
      worst = std::max(worst, max_abs(L.A * v + L.B * u + w - expect));
    }
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(Gauge, LiftPattern) {
  const auto s = oracle::example1(1).at(1);
  const LiftedBlocks L = lift(s, 0.5);
  // alpha/(1-alpha) = 1 multiplies Gx = 0.
  EXPECT_DOUBLE_EQ(L.Q(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(L.Q(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(L.Q(1, 1), 5.0);
  EXPECT_DOUBLE_EQ(L.R(0, 0), 5.0);
  EXPECT_DOUBLE_EQ(L.R(1, 1), 5.0);
  EXPECT_THROW(lift(s, 1.0), Error);
}

TEST(Gauge, MomentsMatchDirectComputation) {
  oracle::Rng r(4);
  const int n = 4, dx = 2;
  const auto a = oracle::random_weights(r, n);
  const Matrix J = oracle::rand_psd(r, n * dx, 0.2);
  std::vector<Vector> mu;
  for (int j = 0; j < n; ++j) mu.push_back(oracle::randn(r, dx, 1));
  const int i = 2;
  // Linear map from the stacked vector to (dx^i, xbar).
  Matrix L = Matrix::Zero(2 * dx, n * dx);
  for (int j = 0; j < n; ++j) {
    L.block(0, j * dx, dx, dx) = -a[j] * Matrix::Identity(dx, dx);
    L.block(dx, j * dx, dx, dx) = a[j] * Matrix::Identity(dx, dx);
  }
  L.block(0, i * dx, dx, dx) += Matrix::Identity(dx, dx);
  Vector m(n * dx);
  for (int j = 0; j < n; ++j) m.segment(j * dx, dx) = mu[j];
  const GaugeMoments g = gauge_moments(a, mu, Covariance::full(J), dx, i);
  EXPECT_LT(max_abs(g.cov - L * J * L.transpose()), 1e-13);
  EXPECT_LT(max_abs(g.mean - L * m), 1e-13);
}

TEST(Exchangeable, RoundTripFromModel) {
  oracle::Rng r(5);
  for (int k = 0; k < 10; ++k) {
    const int n = oracle::rand_int(r, 3, 5);
    const auto m = oracle::random_general(r, 2, 1, 3);
    const auto back = from_exchangeable(to_stacked(m, n));
    for (int t = 1; t <= 3; ++t) {
      const auto &p = m.at(t), &q = back.at(t);
      for (auto [x, y] : {std::pair{&p.A, &q.A}, {&p.Abar, &q.Abar}, {&p.B, &q.B},
                          {&p.Bbar, &q.Bbar}, {&p.Q, &q.Q}, {&p.Sx, &q.Sx},
                          {&p.Qbar, &q.Qbar}, {&p.Gx, &q.Gx}, {&p.R, &q.R},
                          {&p.Su, &q.Su}, {&p.Rbar, &q.Rbar}, {&p.Gu, &q.Gu}})
        EXPECT_LT(max_abs(*x - *y), 1e-10 * (1.0 + max_abs(*x)));
    }
  }
}

// With two players the pair block is absent, so the parameters are not
// identifiable; the cost and dynamics still agree.
TEST(Exchangeable, TwoPlayerCostAgrees) {
  oracle::Rng r(9);
  const auto m = oracle::random_general(r, 2, 2, 1);
  const auto back = from_exchangeable(to_stacked(m, 2));
  const std::vector<double> a{0.5, 0.5};
  for (int k = 0; k < 20; ++k) {
    const Matrix X = oracle::randn(r, 2, 2), U = oracle::randn(r, 2, 2);
    for (int i = 0; i < 2; ++i)
      EXPECT_NEAR(stage_cost(back.at(1), a, X, U, i),
                  stage_cost(m.at(1), a, X, U, i), 1e-10);
  }
  EXPECT_LT(max_abs(back.at(1).Abar - m.at(1).Abar), 1e-12);
}

TEST(Exchangeable, RoundTripFromStacked) {
  oracle::Rng r(6);
  for (int k = 0; k < 10; ++k) {
    const int n = oracle::rand_int(r, 3, 5);
    const auto g = oracle::random_exchangeable(r, n, 2, 2, 2);
    const auto h = to_stacked(from_exchangeable(g), n);
    for (size_t t = 0; t < g.stages.size(); ++t) {
      EXPECT_LT(max_abs(g.stages[t].A - h.stages[t].A), 1e-10);
      EXPECT_LT(max_abs(g.stages[t].B - h.stages[t].B), 1e-10);
      for (int i = 0; i < n; ++i) {
        EXPECT_LT(max_abs(g.stages[t].Q[i] - h.stages[t].Q[i]), 1e-10);
        EXPECT_LT(max_abs(g.stages[t].R[i] - h.stages[t].R[i]), 1e-10);
      }
    }
  }
}

TEST(Exchangeable, PermutationInvariance) {
  oracle::Rng r(7);
  const int n = 4, d = 2;
  const auto g = oracle::random_exchangeable(r, n, d, 1, 1);
  // Swap players 1 and 3.
  Eigen::PermutationMatrix<Eigen::Dynamic> px(n * d), pu(n);
  std::vector<int> perm = {0, 3, 2, 1};
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < d; ++k) px.indices()[j * d + k] = perm[j] * d + k;
    pu.indices()[j] = perm[j];
  }
  auto h = g;
  const auto& s = g.stages[0];
  auto& t = h.stages[0];
  t.A = px * s.A * px.transpose();
  t.B = px * s.B * pu.transpose();
  for (int i = 0; i < n; ++i) {
    t.Q[perm[i]] = px * s.Q[i] * px.transpose();
    t.R[perm[i]] = pu * s.R[i] * pu.transpose();
  }
  EXPECT_LT(max_abs(t.A - s.A), 1e-14);
  EXPECT_LT(max_abs(t.B - s.B), 1e-14);
  for (int i = 0; i < n; ++i) EXPECT_LT(max_abs(t.Q[i] - s.Q[i]), 1e-14);
  EXPECT_TRUE(check_exchangeable(h).empty());
}

TEST(Exchangeable, RejectsBrokenPattern) {
  oracle::Rng r(8);
  auto g = oracle::random_exchangeable(r, 3, 1, 1, 1);
  g.stages[0].Q[2](0, 0) += 1.0;
  EXPECT_FALSE(check_exchangeable(g).empty());
  EXPECT_THROW(from_exchangeable(g), Error);
}
