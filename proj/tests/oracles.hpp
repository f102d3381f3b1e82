// SPDX-License-Identifier: MIT
//
// Independent reference computations for the tests. Nothing here goes
// through the gauge coordinates: every player's state is kept explicitly on
// the stacked vector y = (x^1, ..., x^n, 1).

#pragma once

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "dsg/dsg.hpp"

namespace oracle {

using dsg::GameModel;
using dsg::Matrix;
using dsg::NoiseModel;
using dsg::StageMatrices;
using dsg::Strategy;
using dsg::Vector;

// Example 1: x' = x + u + w, cost x^2 - x*xbar + 5 xbar^2 + 5 u^2.
inline GameModel example1(int T = 50) {
  GameModel m;
  m.horizon = T;
  StageMatrices s = StageMatrices::zero(1, 1);
  s.A(0, 0) = 1.0;
  s.B(0, 0) = 1.0;
  s.Q(0, 0) = 1.0;
  s.Sx(0, 0) = -0.5;
  s.Qbar(0, 0) = 5.0;
  s.R(0, 0) = 5.0;
  m.stages.assign(static_cast<size_t>(T), s);
  return m;
}

inline NoiseModel example1_noise(int n, double var_x = 2.0, double var_w = 1.0) {
  return NoiseModel::make_iid(n, Vector::Constant(1, 10.0),
                              Matrix::Constant(1, 1, var_x),
                              Matrix::Constant(1, 1, var_w));
}

// Player i's problem on y with all players' default actions given by g and
// player i's action replaced by v.
struct Stacked {
  int N = 0, du = 0;
  std::vector<Matrix> Ay, By, Qyy, Nyv, Rvv, W, Kown;  // index t-1
  Matrix S1;
};

inline Stacked build(const GameModel& m, const std::vector<double>& a,
                     const NoiseModel& noise, const Strategy& g, int i) {
  const int n = static_cast<int>(a.size()), dx = m.d_x, du = m.d_u;
  const int nx = n * dx, nu = n * du, N = nx + 1, T = g.horizon();
  Stacked p;
  p.N = N;
  p.du = du;

  Matrix Ex = Matrix::Zero(nx, N);
  Ex.leftCols(nx).setIdentity();
  Matrix Wx = Matrix::Zero(dx, nx), Wu = Matrix::Zero(du, nu);
  for (int j = 0; j < n; ++j) {
    Wx.block(0, j * dx, dx, dx) = a[j] * Matrix::Identity(dx, dx);
    Wu.block(0, j * du, du, du) = a[j] * Matrix::Identity(du, du);
  }
  const auto pick = [](int j, int d, int total) {
    Matrix P = Matrix::Zero(d, total);
    P.block(0, j * d, d, d).setIdentity();
    return P;
  };
  const Matrix Pi = pick(i, dx, nx), Ui = pick(i, du, nu);

  for (int t = 1; t <= T; ++t) {
    const StageMatrices& s = m.at(t);
    // Every player's default action u^j = K_j y.
    Matrix Kall = Matrix::Zero(nu, N);
    for (int j = 0; j < n; ++j) {
      const Matrix th = g.th(t), d = g.thb(t) - g.th(t);
      Kall.block(j * du, j * dx, du, dx) += th;
      if (g.ref == dsg::Reference::DeepState)
        Kall.block(j * du, 0, du, nx) += d * Wx;
      else
        Kall.block(j * du, nx, du, 1) += d * g.z[t - 1];
    }
    const Matrix Kown = Ui * Kall;
    const Matrix My = Kall - Ui.transpose() * Kown;  // others only
    const Matrix Ev = Ui.transpose();

    Matrix Cx = Pi.transpose() * s.Q * Pi + Pi.transpose() * s.Sx * Wx +
                Wx.transpose() * s.Sx.transpose() * Pi +
                Wx.transpose() * s.Qbar * Wx;
    Matrix Cu = Ui.transpose() * s.R * Ui + Ui.transpose() * s.Su * Wu +
                Wu.transpose() * s.Su.transpose() * Ui +
                Wu.transpose() * s.Rbar * Wu;
    for (int j = 0; j < n; ++j) {
      const Matrix Pj = pick(j, dx, nx), Uj = pick(j, du, nu);
      Cx += a[j] * Pj.transpose() * s.Gx * Pj;
      Cu += a[j] * Uj.transpose() * s.Gu * Uj;
    }
    p.Qyy.push_back(Ex.transpose() * Cx * Ex + My.transpose() * Cu * My);
    p.Nyv.push_back(My.transpose() * Cu * Ev);
    p.Rvv.push_back(Ev.transpose() * Cu * Ev);

    Matrix Abig = Matrix::Zero(nx, nx), Bbig = Matrix::Zero(nx, nu);
    Matrix Ones = Matrix::Zero(nx, dx);
    for (int j = 0; j < n; ++j) {
      Abig.block(j * dx, j * dx, dx, dx) = s.A;
      Bbig.block(j * dx, j * du, dx, du) = s.B;
      Ones.block(j * dx, 0, dx, dx).setIdentity();
    }
    Matrix Ay = Matrix::Zero(N, N), By = Matrix::Zero(N, du);
    Ay.topRows(nx) = Abig * Ex + Bbig * My + Ones * (s.Abar * Wx * Ex + s.Bbar * Wu * My);
    Ay(nx, nx) = 1.0;
    By.topRows(nx) = Bbig * Ev + Ones * s.Bbar * Wu * Ev;
    p.Ay.push_back(Ay);
    p.By.push_back(By);
    p.Kown.push_back(Kown);

    Matrix W = Matrix::Zero(N, N);
    if (t < T) W.topLeftCorner(nx, nx) = noise.noise_at(t).dense(n, dx);
    p.W.push_back(W);
  }
  Vector mu = Vector::Zero(N);
  for (int j = 0; j < n; ++j) mu.segment(j * dx, dx) = noise.initial_mean[j];
  mu(nx) = 1.0;
  p.S1 = mu * mu.transpose();
  p.S1.topLeftCorner(nx, nx) += noise.initial_cov.dense(n, dx);
  return p;
}

// Value matrices of the default policy and of the best response.
struct Values {
  std::vector<Matrix> P_policy, P_best;  // index t-1, size T+1
};

inline Values values(const Stacked& p) {
  const int T = static_cast<int>(p.Ay.size());
  Values v;
  v.P_policy.assign(static_cast<size_t>(T) + 1, Matrix::Zero(p.N, p.N));
  v.P_best = v.P_policy;
  for (int t = T; t >= 1; --t) {
    const Matrix& A = p.Ay[t - 1];
    const Matrix& B = p.By[t - 1];
    const Matrix& K = p.Kown[t - 1];
    const Matrix& N = p.Nyv[t - 1];
    const Matrix& R = p.Rvv[t - 1];
    {
      const Matrix& P = v.P_policy[t];
      const Matrix Phi = A + B * K;
      Matrix Pt = p.Qyy[t - 1] + N * K + K.transpose() * N.transpose() +
                  K.transpose() * R * K + Phi.transpose() * P * Phi;
      v.P_policy[t - 1] = 0.5 * (Pt + Pt.transpose());
    }
    {
      const Matrix& P = v.P_best[t];
      const Matrix H = R + B.transpose() * P * B;
      const Matrix G = N.transpose() + B.transpose() * P * A;
      Matrix Pt = p.Qyy[t - 1] + A.transpose() * P * A -
                  G.transpose() * H.ldlt().solve(G);
      v.P_best[t - 1] = 0.5 * (Pt + Pt.transpose());
    }
  }
  return v;
}

// Second moment of y at each t under the default policy.
inline std::vector<Matrix> moments(const Stacked& p) {
  const int T = static_cast<int>(p.Ay.size());
  std::vector<Matrix> S{p.S1};
  for (int t = 1; t < T; ++t) {
    const Matrix Phi = p.Ay[t - 1] + p.By[t - 1] * p.Kown[t - 1];
    S.push_back(Phi * S.back() * Phi.transpose() + p.W[t - 1]);
  }
  return S;
}

inline double cost_from(const Matrix& S, const std::vector<Matrix>& P,
                        const std::vector<Matrix>& W, int t0) {
  const int T = static_cast<int>(W.size());
  double c = (S * P[t0 - 1]).trace();
  for (int t = t0; t < T; ++t) c += (W[t - 1] * P[t]).trace();
  return c;
}

struct Evaluation {
  std::vector<double> cost;     // player i's expected cost-to-go, index t0-1
  std::vector<double> benefit;  // cost minus best-response cost, index t0-1
};

inline Evaluation evaluate(const GameModel& m, const std::vector<double>& a,
                           const NoiseModel& noise, const Strategy& g, int i) {
  const Stacked p = build(m, a, noise, g, i);
  const Values v = values(p);
  const auto S = moments(p);
  Evaluation e;
  for (int t0 = 1; t0 <= g.horizon(); ++t0) {
    const double c = cost_from(S[t0 - 1], v.P_policy, p.W, t0);
    e.cost.push_back(c);
    e.benefit.push_back(c - cost_from(S[t0 - 1], v.P_best, p.W, t0));
  }
  return e;
}

// ---------------------------------------------------------- random models

using Rng = std::mt19937_64;

inline Matrix randn(Rng& r, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = d(r);
  return m;
}

inline Matrix rand_sym(Rng& r, int d, double scale = 1.0) {
  const Matrix m = randn(r, d, d, scale);
  return 0.5 * (m + m.transpose());
}

// Positive semidefinite with rank <= d, plus shift * I.
inline Matrix rand_psd(Rng& r, int d, double shift = 0.0) {
  const Matrix m = randn(r, d, d);
  return m * m.transpose() / d + shift * Matrix::Identity(d, d);
}

inline int rand_int(Rng& r, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(r);
}

// Mean field absent from the dynamics, Q, Q + Sx >= 0 and R, R + Su > 0.
inline GameModel random_decoupled(Rng& r, int dx, int du, int T) {
  GameModel m;
  m.d_x = dx;
  m.d_u = du;
  m.horizon = T;
  for (int t = 1; t <= T; ++t) {
    StageMatrices s = StageMatrices::zero(dx, du);
    s.A = randn(r, dx, dx, 0.6);
    s.B = randn(r, dx, du);
    s.Q = rand_psd(r, dx);
    s.Sx = rand_psd(r, dx) - 0.5 * s.Q;  // Q + Sx = Q/2 + psd
    s.Qbar = rand_sym(r, dx);
    s.Gx = rand_psd(r, dx);
    s.R = rand_psd(r, du, 0.5);
    s.Su = rand_psd(r, du) - 0.5 * s.R;
    s.Rbar = rand_psd(r, du);
    s.Gu = rand_psd(r, du);
    m.stages.push_back(s);
  }
  return m;
}

// Social cost: only Qbar, Gx, Rbar, Gu present.
inline GameModel random_social(Rng& r, int dx, int du, int T) {
  GameModel m;
  m.d_x = dx;
  m.d_u = du;
  m.horizon = T;
  for (int t = 1; t <= T; ++t) {
    StageMatrices s = StageMatrices::zero(dx, du);
    s.A = randn(r, dx, dx, 0.6);
    s.Abar = randn(r, dx, dx, 0.3);
    s.B = randn(r, dx, du);
    s.Bbar = randn(r, dx, du, 0.3);
    s.Gx = rand_psd(r, dx);
    s.Qbar = rand_psd(r, dx) - 0.5 * s.Gx;
    s.Gu = rand_psd(r, du, 0.5);
    s.Rbar = rand_psd(r, du) - 0.5 * s.Gu;
    m.stages.push_back(s);
  }
  return m;
}

// Fully general, well-conditioned cost.
inline GameModel random_general(Rng& r, int dx, int du, int T) {
  GameModel m;
  m.d_x = dx;
  m.d_u = du;
  m.horizon = T;
  for (int t = 1; t <= T; ++t) {
    StageMatrices s = StageMatrices::zero(dx, du);
    s.A = randn(r, dx, dx, 0.5);
    s.Abar = randn(r, dx, dx, 0.2);
    s.B = randn(r, dx, du);
    s.Bbar = randn(r, dx, du, 0.2);
    s.Q = rand_psd(r, dx, 0.5);
    s.Sx = rand_sym(r, dx, 0.2);
    s.Qbar = rand_psd(r, dx);
    s.Gx = rand_psd(r, dx);
    s.R = rand_psd(r, du, 1.0);
    s.Su = rand_sym(r, du, 0.2);
    s.Rbar = rand_psd(r, du);
    s.Gu = rand_psd(r, du);
    m.stages.push_back(s);
  }
  return m;
}

inline NoiseModel random_noise(Rng& r, int n, int dx, bool iid) {
  NoiseModel nm;
  nm.iid = iid;
  const Vector mu = randn(r, dx, 1);
  const Matrix c0 = rand_psd(r, dx, 0.1), w0 = rand_psd(r, dx, 0.1);
  std::vector<Matrix> c, w;
  for (int j = 0; j < n; ++j) {
    nm.initial_mean.push_back(iid ? mu : Vector(randn(r, dx, 1)));
    c.push_back(iid ? c0 : rand_psd(r, dx, 0.1));
    w.push_back(iid ? w0 : rand_psd(r, dx, 0.1));
  }
  nm.initial_cov = dsg::Covariance::independent(c);
  nm.noise_cov = {dsg::Covariance::independent(w)};
  return nm;
}

inline std::vector<double> random_weights(Rng& r, int n) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::vector<double> a;
  double s = 0.0;
  for (int j = 0; j < n; ++j) s += a.emplace_back(u(r));
  for (double& v : a) v /= s;
  // Exact unit sum.
  double acc = 0.0;
  for (int j = 0; j + 1 < n; ++j) acc += a[j];
  a.back() = 1.0 - acc;
  return a;
}

// Random stacked exchangeable game built block by block.
inline dsg::StackedExchangeableGame random_exchangeable(Rng& r, int n, int dx,
                                                        int du, int T) {
  dsg::StackedExchangeableGame g;
  g.n = n;
  g.d_x = dx;
  g.d_u = du;
  const auto cost = [&](int d) {
    const Matrix own = rand_sym(r, d), cross = rand_sym(r, d),
                 other = rand_sym(r, d),
                 pair = n >= 3 ? rand_sym(r, d) : Matrix(Matrix::Zero(d, d));
    std::vector<Matrix> qs;
    for (int i = 0; i < n; ++i) {
      Matrix q(n * d, n * d);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          q.block(a * d, b * d, d, d) =
              a == i && b == i ? own
              : a == i || b == i ? cross
              : a == b           ? other
                                 : pair;
      qs.push_back(q);
    }
    return qs;
  };
  for (int t = 0; t < T; ++t) {
    dsg::StackedStage st;
    const Matrix ad = randn(r, dx, dx), ao = randn(r, dx, dx);
    const Matrix bd = randn(r, dx, du), bo = randn(r, dx, du);
    st.A.resize(n * dx, n * dx);
    st.B.resize(n * dx, n * du);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        st.A.block(a * dx, b * dx, dx, dx) = a == b ? ad : ao;
        st.B.block(a * dx, b * du, dx, du) = a == b ? bd : bo;
      }
    st.Q = cost(dx);
    st.R = cost(du);
    g.stages.push_back(std::move(st));
  }
  return g;
}

}  // namespace oracle
