// SPDX-License-Identifier: MIT
//
// Gauge transformation x^i -> (x^i - xbar, xbar), the lifted block
// dynamics and the alpha-indexed cost blocks.

#pragma once

#include <vector>

#include "dsg/model.hpp"

namespace dsg {

struct GaugeState {
  std::vector<Vector> deltas;
  Vector bar;
  std::vector<double> weights;
};

inline GaugeState to_gauge(const std::vector<Vector>& x,
                           const std::vector<double>& a) {
  if (x.size() != a.size() || x.empty())
    throw input_error("to_gauge: state and weight counts differ");
  GaugeState g;
  g.weights = a;
  g.bar = Vector::Zero(x.front().size());
  for (size_t j = 0; j < x.size(); ++j) {
    if (x[j].size() != g.bar.size())
      throw input_error("to_gauge: inconsistent state dimensions");
    g.bar += a[j] * x[j];
  }
  for (const auto& xi : x) g.deltas.push_back(xi - g.bar);
  return g;
}

inline Vector from_gauge(const GaugeState& g, int i) {
  return g.deltas.at(static_cast<size_t>(i)) + g.bar;
}

struct LiftedBlocks {
  Matrix A, B, Q, R;
};

// Cost blocks for deviation/mean coordinates. The alpha/(1-alpha) terms on
// the deviation block pair with the correction subtracted in the player's
// transformed cost.
inline LiftedBlocks lift(const StageMatrices& s, double alpha) {
  if (!(alpha < 1.0)) throw input_error("lift: alpha must be < 1");
  const double r = alpha / (1.0 - alpha);
  LiftedBlocks L;
  L.A = block_diag(s.A, s.A + s.Abar);
  L.B = block_diag(s.B, s.B + s.Bbar);
  const auto pattern = [r](const Matrix& own, const Matrix& cross,
                           const Matrix& bar, const Matrix& g) {
    const int d = static_cast<int>(own.rows());
    Matrix m(2 * d, 2 * d);
    m.topLeftCorner(d, d) = own + r * g;
    m.topRightCorner(d, d) = own + cross;
    m.bottomLeftCorner(d, d) = own + cross;
    m.bottomRightCorner(d, d) = own + 2.0 * cross + bar + g;
    return sym(m);
  };
  L.Q = pattern(s.Q, s.Sx, s.Qbar, s.Gx);
  L.R = pattern(s.R, s.Su, s.Rbar, s.Gu);
  return L;
}

inline LiftedBlocks lift(const GameModel& m, int t, double alpha) {
  return lift(m.at(t), alpha);
}

// First and second moments of (x^i - xbar, xbar) and of the weighted sum
// of deviations, computed exactly from a stacked covariance.
struct GaugeMoments {
  Vector mean;    // 2dx: (E[dx^i], E[xbar])
  Matrix cov;     // 2dx x 2dx covariance of (dx^i, xbar)
  Matrix own;     // E[dx^i dx^i'] (second moment)
  Matrix others;  // sum_{j != i} a^j E[dx^j dx^j'] (second moment)

  Matrix second() const { return cov + mean * mean.transpose(); }
};

inline GaugeMoments gauge_moments(const std::vector<double>& a,
                                  const std::vector<Vector>& means,
                                  const Covariance& c, int dx, int i) {
  const int n = static_cast<int>(a.size());
  Vector mbar = Vector::Zero(dx);
  for (int j = 0; j < n; ++j)
    if (!means.empty()) mbar += a[j] * means[j];
  const auto mean_delta = [&](int j) -> Vector {
    return means.empty() ? Vector(Vector::Zero(dx)) : Vector(means[j] - mbar);
  };

  // Covariances: cov(x^j, xbar), var(xbar), var(dx^j).
  std::vector<Matrix> cx(static_cast<size_t>(n));
  Matrix vbar = Matrix::Zero(dx, dx);
  if (c.is_joint()) {
    const Matrix& J = *c.joint;
    Matrix wbar = Matrix::Zero(dx, n * dx);
    for (int j = 0; j < n; ++j)
      wbar.block(0, j * dx, dx, dx) = a[j] * Matrix::Identity(dx, dx);
    const Matrix Jw = J * wbar.transpose();  // n*dx x dx
    vbar = sym(wbar * Jw);
    for (int j = 0; j < n; ++j) cx[j] = Jw.block(j * dx, 0, dx, dx);
  } else {
    for (int j = 0; j < n; ++j) {
      cx[j] = a[j] * c.blocks[j];
      vbar += a[j] * a[j] * c.blocks[j];
    }
  }
  const auto var_delta = [&](int j) -> Matrix {
    const Matrix cj = c.block(j, j, dx);
    return sym(cj - cx[j] - cx[j].transpose() + vbar);
  };

  GaugeMoments g;
  g.mean.resize(2 * dx);
  g.mean << mean_delta(i), mbar;
  g.cov.resize(2 * dx, 2 * dx);
  const Matrix cdb = cx[i] - vbar;  // cov(dx^i, xbar)
  g.cov << var_delta(i), cdb, cdb.transpose(), vbar;
  const Vector mi = mean_delta(i);
  g.own = g.cov.topLeftCorner(dx, dx) + mi * mi.transpose();
  g.others = Matrix::Zero(dx, dx);
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    const Vector mj = mean_delta(j);
    g.others += a[j] * (var_delta(j) + mj * mj.transpose());
  }
  return g;
}

}  // namespace dsg
