// SPDX-License-Identifier: MIT
//
// Performance gaps of the no-sharing strategies via Lyapunov recursions on
// the relative-distance error system, and deviation benefits via an exact
// best response on the stacked state.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dsg/equilibrium.hpp"

namespace dsg {

// State (e^i, e, zeta): deviation of player i, predicted-vs-actual deep
// state under the no-sharing profile, and the same under the equilibrium.
struct ErrorSystem {
  enum class Variant { FiniteN, Infinite };
  Variant variant = Variant::FiniteN;
  std::vector<Matrix> A;  // index t-1
  std::vector<Matrix> Q;  // index t-1
  std::vector<Matrix> M;  // index t-1, size T+1 (M[T] = 0)

  int horizon() const { return static_cast<int>(A.size()); }
};

// Transition and cost of the error system for one step with gains
// (theta, theta_bar).
inline std::pair<Matrix, Matrix> error_step(const StageMatrices& s,
                                            const Matrix& th,
                                            const Matrix& thb, double alpha) {
  const int dx = static_cast<int>(s.A.rows());
  const Matrix Am = s.A + s.Abar, Bm = s.B + s.Bbar;
  Matrix A = Matrix::Zero(3 * dx, 3 * dx);
  A.block(0, 0, dx, dx) = s.A + s.B * th;
  A.block(dx, dx, dx, dx) = Am + Bm * th;
  A.block(2 * dx, 2 * dx, dx, dx) = Am + Bm * thb;

  const LiftedBlocks L = lift(s, alpha);
  const int du = static_cast<int>(s.B.cols());
  const auto q = [&](int i, int j) { return L.Q.block(i * dx, j * dx, dx, dx); };
  const auto r = [&](int i, int j) { return L.R.block(i * du, j * du, du, du); };
  Matrix Q = Matrix::Zero(3 * dx, 3 * dx);
  const Matrix q12 = q(0, 1) + th.transpose() * r(0, 1) * th;
  const Matrix q13 = -q(0, 1) - th.transpose() * r(0, 1) * thb;
  Q.block(0, dx, dx, dx) = q12;
  Q.block(dx, 0, dx, dx) = q12.transpose();
  Q.block(0, 2 * dx, dx, dx) = q13;
  Q.block(2 * dx, 0, dx, dx) = q13.transpose();
  Q.block(dx, dx, dx, dx) = sym(q(1, 1) + th.transpose() * r(1, 1) * th);
  Q.block(2 * dx, 2 * dx, dx, dx) =
      sym(-q(1, 1) - thb.transpose() * r(1, 1) * thb);
  return {A, Q};
}

inline ErrorSystem error_system(const GameModel& m, const Strategy& g,
                                ErrorSystem::Variant v, double alpha) {
  ErrorSystem es;
  es.variant = v;
  const int T = g.horizon();
  for (int t = 1; t <= T; ++t) {
    auto [A, Q] = error_step(m.at(t), g.th(t), g.thb(t), alpha);
    es.A.push_back(std::move(A));
    es.Q.push_back(std::move(Q));
  }
  const int d = 3 * m.d_x;
  es.M.assign(static_cast<size_t>(T) + 1, Matrix::Zero(d, d));
  for (int t = T; t >= 1; --t)
    es.M[t - 1] = sym(es.A[t - 1].transpose() * es.M[t] * es.A[t - 1] +
                      es.Q[t - 1]);
  return es;
}

// Second moments of (e^i, e, zeta) at the first step, or of the matching
// noise vector (dw^i, wbar, wbar).
inline Matrix moment_block(const GaugeMoments& g, int dx, bool include_mean) {
  const Matrix vd = include_mean ? g.own : g.cov.topLeftCorner(dx, dx);
  const Matrix c = g.cov.topRightCorner(dx, dx);
  const Matrix vb = g.cov.bottomRightCorner(dx, dx);
  Matrix H(3 * dx, 3 * dx);
  H << vd, c, c, c.transpose(), vb, vb, c.transpose(), vb, vb;
  return sym(H);
}

struct GapReport {
  std::string strategy;
  int n = 0;
  std::vector<double> gap;                  // max_i |dJ^i|, index t0-1
  std::vector<std::vector<double>> signed_gap;  // [player][t0-1]
  std::vector<int> players;                 // players evaluated
  std::optional<ErrorSystem> system;
  double spectral_radius = 0.0;             // discounted case
};

namespace detail {

inline std::vector<int> players_to_check(const NoiseModel& noise, int n) {
  if (noise.iid) return {0};
  std::vector<int> p;
  for (int i = 0; i < n; ++i) p.push_back(i);
  return p;
}

inline void finish(GapReport& r) {
  const size_t T = r.signed_gap.front().size();
  r.gap.assign(T, 0.0);
  for (const auto& row : r.signed_gap)
    for (size_t k = 0; k < T; ++k) r.gap[k] = std::max(r.gap[k], std::abs(row[k]));
}

}  // namespace detail

// Lyapunov evaluation of sum_{t>=t0} E[xi_t' Q_t xi_t] for one player, with
// the moments of xi propagated forward from the first step.
inline std::vector<double> lyapunov_gap(const ErrorSystem& es,
                                        const Matrix& Hx,
                                        const std::vector<Matrix>& Hw) {
  const int T = es.horizon();
  std::vector<double> noise_tail(static_cast<size_t>(T) + 1, 0.0);
  for (int t = T - 1; t >= 1; --t)
    noise_tail[t - 1] = noise_tail[t] + (Hw[t - 1] * es.M[t]).trace();
  std::vector<double> out(static_cast<size_t>(T));
  Matrix S = Hx;
  for (int t0 = 1; t0 <= T; ++t0) {
    out[t0 - 1] = (S * es.M[t0 - 1]).trace() + noise_tail[t0 - 1];
    if (t0 < T)
      S = sym(es.A[t0 - 1] * S * es.A[t0 - 1].transpose() + Hw[t0 - 1]);
  }
  return out;
}

// Exact gap J^i(g_hat) - J^i(g_star) from closed-form expected costs.
inline std::vector<double> exact_gap(const GameModel& m,
                                     const std::vector<double>& a,
                                     const NoiseModel& noise,
                                     const Strategy& g_hat,
                                     const Strategy& g_star, int i) {
  const auto c1 = expected_cost(m, a, noise, g_hat, i).to_go;
  const auto c0 = expected_cost(m, a, noise, g_star, i).to_go;
  std::vector<double> out(c1.size());
  for (size_t k = 0; k < c1.size(); ++k) out[k] = c1[k] - c0[k];
  return out;
}

enum class NsKind { Sapde, Swmfe };

inline const char* to_string(NsKind k) {
  return k == NsKind::Sapde ? "sapde" : "swmfe";
}

// Performance gap for t0 = 1..T under homogeneous weights. The
// finite-population strategy uses the Lyapunov recursion on the error
// system; the mean-field strategy uses different gains from the
// equilibrium, so its gap is evaluated from exact expected costs.
inline GapReport performance_gap(const GameModel& m, const NoiseModel& noise,
                                 int n, NsKind kind,
                                 std::optional<int> T = std::nullopt) {
  const int steps = m.steps(T);
  const auto profile = WeightProfile::homogeneous(n);
  const auto a = realize_weights(profile);
  if (noise.players() != n)
    throw input_error("noise model player count differs from n");
  const Vector z1 = mean_deep_state(a, noise);
  GapReport r;
  r.strategy = to_string(kind);
  r.n = n;
  r.players = detail::players_to_check(noise, n);
  const Strategy g_star = spne(m, profile, steps);
  if (kind == NsKind::Sapde) {
    const Strategy g = sapde(m, n, z1, steps);
    const ErrorSystem es =
        error_system(m, g, ErrorSystem::Variant::FiniteN, 1.0 / n);
    for (int i : r.players) {
      const Matrix Hx = moment_block(
          gauge_moments(a, noise.initial_mean, noise.initial_cov, m.d_x, i),
          m.d_x, true);
      std::vector<Matrix> Hw;
      for (int t = 1; t <= steps; ++t)
        Hw.push_back(moment_block(
            gauge_moments(a, {}, noise.noise_at(t), m.d_x, i), m.d_x, false));
      r.signed_gap.push_back(lyapunov_gap(es, Hx, Hw));
    }
    r.system = es;
  } else {
    const Strategy g = swmfe(m, z1, steps);
    for (int i : r.players)
      r.signed_gap.push_back(exact_gap(m, a, noise, g, g_star, i));
  }
  detail::finish(r);
  return r;
}

// Discounted stationary gap for the finite-population strategy:
// gamma^(t0-1) ((1-gamma) tr(Hx M) + gamma tr(Hw M)) with
// M = gamma A'MA + Q.
inline GapReport performance_gap_discounted(const GameModel& m,
                                            const NoiseModel& noise, int n,
                                            double gamma, int t0 = 1,
                                            double tol = 1e-12,
                                            int max_iter = 1000000) {
  if (!m.stationary())
    throw input_error("discounted gap needs a stationary model");
  const auto a = realize_weights(WeightProfile::homogeneous(n));
  const auto sol = solve_algebraic(m, 1.0 / n, gamma);
  detail::require_pd(sol, "positive definiteness condition");
  const auto& st = sol.at(1);
  auto [A, Q] = error_step(m.at(1), st.theta, st.theta_bar, 1.0 / n);
  GapReport r;
  r.strategy = "sapde";
  r.n = n;
  r.spectral_radius = spectral_radius(A);
  if (!(gamma * r.spectral_radius * r.spectral_radius < 1.0)) {
    std::ostringstream os;
    os << "error system is not stable under discounting (gamma*rho^2 = "
       << gamma * r.spectral_radius * r.spectral_radius
       << "); the prediction can destabilize the game";
    throw math_error(os.str());
  }
  Matrix M = Matrix::Zero(Q.rows(), Q.cols());
  bool done = false;
  for (int k = 0; k < max_iter && !done; ++k) {
    const Matrix Mn = sym(gamma * A.transpose() * M * A + Q);
    done = max_abs(Mn - M) < tol * (1.0 + max_abs(Mn));
    M = Mn;
  }
  if (!done) throw math_error("discounted Lyapunov iteration did not converge");
  ErrorSystem es;
  es.A = {A};
  es.Q = {Q};
  es.M = {M};
  r.players = detail::players_to_check(noise, n);
  const double pre = std::pow(gamma, t0 - 1);
  for (int i : r.players) {
    const Matrix Hx = moment_block(
        gauge_moments(a, noise.initial_mean, noise.initial_cov, m.d_x, i),
        m.d_x, true);
    const Matrix Hw = moment_block(
        gauge_moments(a, {}, noise.noise_at(1), m.d_x, i), m.d_x, false);
    r.signed_gap.push_back(
        {pre * ((1 - gamma) * (Hx * M).trace() + gamma * (Hw * M).trace())});
  }
  r.system = es;
  detail::finish(r);
  return r;
}

// Player i's problem on the stacked state y = (x^1, ..., x^n, 1) when the
// other players follow fixed linear strategies.
struct StackedProblem {
  int N = 0;
  std::vector<Matrix> A, B, Qy, Nyv, Rv, W;  // index t-1
  Matrix S1;                                  // E[y_1 y_1']
};

inline StackedProblem stacked_problem(const GameModel& m,
                                      const std::vector<double>& a,
                                      const NoiseModel& noise,
                                      const Strategy& env, int i) {
  const int n = static_cast<int>(a.size()), dx = m.d_x, du = m.d_u;
  const int T = env.horizon();
  const int N = n * dx + 1;
  StackedProblem p;
  p.N = N;
  const auto E = [&](int k) {
    Matrix e = Matrix::Zero(dx, N);
    e.block(0, k * dx, dx, dx).setIdentity();
    return e;
  };
  Matrix Wbar = Matrix::Zero(dx, N);
  for (int k = 0; k < n; ++k) Wbar.block(0, k * dx, dx, dx).diagonal().setConstant(a[k]);
  const Matrix Ei = E(i);

  for (int t = 1; t <= T; ++t) {
    const auto& s = m.at(t);
    const Matrix& th = env.th(t);
    const Matrix& thb = env.thb(t);
    Matrix Ref;
    if (env.ref == Reference::DeepState) {
      Ref = Wbar;
    } else {
      Ref = Matrix::Zero(dx, N);
      Ref.col(N - 1) = env.z[t - 1];
    }
    const Matrix common = (thb - th) * Ref;  // du x N
    Matrix L = Matrix::Zero(du, N);
    for (int j = 0; j < n; ++j)
      if (j != i) L += a[j] * (th * E(j) + common);

    Matrix A = Matrix::Zero(N, N), B = Matrix::Zero(N, du);
    const Matrix shared = s.Abar * Wbar + s.Bbar * L;
    for (int k = 0; k < n; ++k) {
      Matrix rows = s.A * E(k) + shared;
      if (k != i) rows += s.B * (th * E(k) + common);
      A.block(k * dx, 0, dx, N) = rows;
      B.block(k * dx, 0, dx, du) = a[i] * s.Bbar;
      if (k == i) B.block(k * dx, 0, dx, du) += s.B;
    }
    A(N - 1, N - 1) = 1.0;

    Matrix Qy = Ei.transpose() * s.Q * Ei +
                Ei.transpose() * s.Sx * Wbar + Wbar.transpose() * s.Sx * Ei +
                Wbar.transpose() * s.Qbar * Wbar + L.transpose() * s.Rbar * L;
    for (int j = 0; j < n; ++j) {
      const Matrix Ej = E(j);
      Qy += a[j] * Ej.transpose() * s.Gx * Ej;
      if (j != i) {
        const Matrix Kj = th * Ej + common;
        Qy += a[j] * Kj.transpose() * s.Gu * Kj;
      }
    }
    p.A.push_back(A);
    p.B.push_back(B);
    p.Qy.push_back(sym(Qy));
    p.Nyv.push_back(L.transpose() * s.Su + a[i] * L.transpose() * s.Rbar);
    p.Rv.push_back(sym(s.R + 2.0 * a[i] * s.Su + a[i] * a[i] * s.Rbar +
                       a[i] * s.Gu));
    Matrix W = Matrix::Zero(N, N);
    W.topLeftCorner(n * dx, n * dx) = noise.noise_at(t).dense(n, dx);
    p.W.push_back(W);
  }
  Vector mu(N);
  for (int k = 0; k < n; ++k) mu.segment(k * dx, dx) = noise.initial_mean[k];
  mu(N - 1) = 1.0;
  p.S1 = mu * mu.transpose();
  p.S1.topLeftCorner(n * dx, n * dx) += noise.initial_cov.dense(n, dx);
  return p;
}

// Gain of player i's own strategy on the stacked state.
inline std::vector<Matrix> stacked_policy(const GameModel& m,
                                          const std::vector<double>& a,
                                          const Strategy& g, int i) {
  const int n = static_cast<int>(a.size()), dx = m.d_x, du = m.d_u;
  const int N = n * dx + 1;
  std::vector<Matrix> out;
  for (int t = 1; t <= g.horizon(); ++t) {
    Matrix K = Matrix::Zero(du, N);
    K.block(0, i * dx, du, dx) = g.th(t);
    const Matrix d = g.thb(t) - g.th(t);
    if (g.ref == Reference::DeepState) {
      for (int k = 0; k < n; ++k) K.block(0, k * dx, du, dx) += a[k] * d;
    } else {
      K.col(N - 1) += d * g.z[t - 1];
    }
    out.push_back(K);
  }
  return out;
}

struct BestResponse {
  std::vector<Matrix> gain;  // v* = gain * y, index t-1
  std::vector<Matrix> H;     // Hessian R_v + B'PB, index t-1
  std::vector<Matrix> P;     // optimal value matrices, size T+1
};

inline BestResponse best_response(const StackedProblem& p) {
  const int T = static_cast<int>(p.A.size());
  BestResponse br;
  br.gain.resize(static_cast<size_t>(T));
  br.H.resize(static_cast<size_t>(T));
  br.P.assign(static_cast<size_t>(T) + 1, Matrix::Zero(p.N, p.N));
  for (int t = T; t >= 1; --t) {
    const Matrix& P = br.P[t];
    const Matrix& A = p.A[t - 1];
    const Matrix& B = p.B[t - 1];
    const Matrix PB = P * B;
    const Matrix H = sym(p.Rv[t - 1] + B.transpose() * PB);
    if (!is_pd(H))
      throw math_error("best-response problem is unbounded below at t=" +
                       std::to_string(t));
    const Matrix G = p.Nyv[t - 1] + A.transpose() * PB;  // N x du
    const Eigen::LLT<Matrix> llt(H);
    const Matrix Lg = llt.solve(G.transpose());  // du x N
    br.gain[t - 1] = -Lg;
    br.H[t - 1] = H;
    br.P[t - 1] = sym(p.Qy[t - 1] + A.transpose() * P * A - G * Lg);
  }
  return br;
}

// Cost-to-go of player i following `policy` (v = K y) from each t0, with the
// state distribution generated by that same policy.
inline std::vector<double> policy_cost(const StackedProblem& p,
                                       const std::vector<Matrix>& policy) {
  const int T = static_cast<int>(p.A.size());
  std::vector<Matrix> V(static_cast<size_t>(T) + 1, Matrix::Zero(p.N, p.N));
  for (int t = T; t >= 1; --t) {
    const Matrix& K = policy[t - 1];
    const Matrix Phi = p.A[t - 1] + p.B[t - 1] * K;
    const Matrix NK = p.Nyv[t - 1] * K;
    V[t - 1] = sym(p.Qy[t - 1] + NK + NK.transpose() +
                   K.transpose() * p.Rv[t - 1] * K +
                   Phi.transpose() * V[t] * Phi);
  }
  std::vector<double> tail(static_cast<size_t>(T) + 1, 0.0);
  for (int t = T - 1; t >= 1; --t)
    tail[t - 1] = tail[t] + (p.W[t - 1] * V[t]).trace();
  std::vector<double> out(static_cast<size_t>(T));
  Matrix S = p.S1;
  for (int t = 1; t <= T; ++t) {
    out[t - 1] = (S * V[t - 1]).trace() + tail[t - 1];
    const Matrix Phi = p.A[t - 1] + p.B[t - 1] * policy[t - 1];
    S = Phi * S * Phi.transpose() + p.W[t - 1];
  }
  return out;
}

struct DeviationReport {
  std::vector<double> benefit;  // index t0-1
};

struct DeviationOptions {
  int cap = 512;  // max n * d_x
};

// J^i(g^i, g^{-i}) - min over player i's strategies, for every t0, with the
// state at t0 distributed as under the profile. Computed as the sum of
// expected advantages (v - v*)' H (v - v*) along the profile's trajectory,
// which avoids cancellation between two large costs.
inline DeviationReport unilateral_deviation_benefit(
    const GameModel& m, const NoiseModel& noise, const std::vector<double>& a,
    const Strategy& g, int i, DeviationOptions opt = {}) {
  const int n = static_cast<int>(a.size());
  if (n * m.d_x > opt.cap)
    throw input_error("stacked state exceeds the configured cap");
  const StackedProblem p = stacked_problem(m, a, noise, g, i);
  const BestResponse br = best_response(p);
  const auto K = stacked_policy(m, a, g, i);
  const int T = g.horizon();
  std::vector<double> adv(static_cast<size_t>(T));
  Matrix S = p.S1;
  for (int t = 1; t <= T; ++t) {
    const Matrix D = K[t - 1] - br.gain[t - 1];
    adv[t - 1] = (D.transpose() * br.H[t - 1] * D * S).trace();
    const Matrix Phi = p.A[t - 1] + p.B[t - 1] * K[t - 1];
    S = Phi * S * Phi.transpose() + p.W[t - 1];
  }
  DeviationReport r;
  r.benefit.assign(static_cast<size_t>(T), 0.0);
  double acc = 0.0;
  for (int t = T; t >= 1; --t) {
    acc += adv[t - 1];
    r.benefit[t - 1] = acc;
  }
  return r;
}

// Sensitivity of player i's cost to the environment switching from the
// equilibrium to the no-sharing profile, maximized over a probe family of
// own strategies: the best responses to either environment and scaled
// copies of the equilibrium gains. An estimate at t0 = 1, not a supremum.
inline double environment_sensitivity(const GameModel& m,
                                      const NoiseModel& noise,
                                      const std::vector<double>& a,
                                      const Strategy& g_hat,
                                      const Strategy& g_star, int i,
                                      std::vector<double> scales = {0.5, 0.75,
                                                                    1.0, 1.25,
                                                                    1.5}) {
  const StackedProblem p_hat = stacked_problem(m, a, noise, g_hat, i);
  const StackedProblem p_star = stacked_problem(m, a, noise, g_star, i);
  std::vector<std::vector<Matrix>> probes;
  probes.push_back(best_response(p_hat).gain);
  probes.push_back(best_response(p_star).gain);
  const auto K_star = stacked_policy(m, a, g_star, i);
  for (double c : scales) {
    std::vector<Matrix> k;
    for (const auto& x : K_star) k.push_back(c * x);
    probes.push_back(std::move(k));
  }
  double worst = 0.0;
  for (const auto& k : probes)
    worst = std::max(worst, std::abs(policy_cost(p_hat, k).front() -
                                     policy_cost(p_star, k).front()));
  return worst;
}

}  // namespace dsg
