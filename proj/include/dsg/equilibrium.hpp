// SPDX-License-Identifier: MIT
//
// Linear feedback strategies built from Riccati gains: the exact
// equilibrium with deep-state feedback, the no-sharing strategies that
// replace the deep state by a deterministic prediction, and exact expected
// costs.

#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dsg/riccati.hpp"

namespace dsg {

enum class StrategyKind {
  SpneFinite,
  SpneInfinite,
  SpneSocial,
  Sapde,
  Swmfe,
  CustomLinear
};

enum class Reference { DeepState, Prediction };

inline const char* to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::SpneFinite: return "spne_finite_n";
    case StrategyKind::SpneInfinite: return "spne_infinite";
    case StrategyKind::SpneSocial: return "spne_social";
    case StrategyKind::Sapde: return "sapde";
    case StrategyKind::Swmfe: return "swmfe";
    case StrategyKind::CustomLinear: return "custom_linear";
  }
  return "unknown";
}

// u^i_t = theta_t x^i_t + (theta_bar_t - theta_t) r_t, with r_t the observed
// deep state or a precomputed prediction.
struct Strategy {
  StrategyKind kind = StrategyKind::CustomLinear;
  std::vector<Matrix> theta, theta_bar;  // index t-1
  Reference ref = Reference::DeepState;
  std::vector<Vector> z;  // prediction, index t-1
  int n = 0;

  int horizon() const { return static_cast<int>(theta.size()); }
  const Matrix& th(int t) const { return theta[static_cast<size_t>(t - 1)]; }
  const Matrix& thb(int t) const {
    return theta_bar[static_cast<size_t>(t - 1)];
  }
  Vector reference(int t, const Vector& xbar) const {
    return ref == Reference::DeepState ? xbar : z[static_cast<size_t>(t - 1)];
  }
  Vector action(int t, const Vector& x, const Vector& xbar) const {
    return th(t) * x + (thb(t) - th(t)) * reference(t, xbar);
  }
};

inline Strategy zero_strategy(const GameModel& m, int T) {
  Strategy s;
  s.theta.assign(static_cast<size_t>(T), Matrix::Zero(m.d_u, m.d_x));
  s.theta_bar = s.theta;
  return s;
}

struct Prediction {
  enum class Kind { PopulationSizeDependent, MeanField };
  Kind kind = Kind::PopulationSizeDependent;
  std::vector<Vector> z;  // index t-1
};

// z_{t+1} = (A + Abar + (B + Bbar) theta_bar_t) z_t, z_1 = E[xbar_1].
inline Prediction predict(const GameModel& m,
                          const std::vector<Matrix>& theta_bar,
                          const Vector& z1, int T,
                          Prediction::Kind kind =
                              Prediction::Kind::PopulationSizeDependent) {
  Prediction p;
  p.kind = kind;
  p.z.push_back(z1);
  for (int t = 1; t < T; ++t) {
    const auto& s = m.at(t);
    p.z.push_back((s.A + s.Abar + (s.B + s.Bbar) * theta_bar[t - 1]) *
                  p.z.back());
  }
  return p;
}

inline Vector mean_deep_state(const std::vector<double>& a,
                              const NoiseModel& noise) {
  Vector z = Vector::Zero(noise.initial_mean.front().size());
  for (size_t j = 0; j < a.size(); ++j) z += a[j] * noise.initial_mean[j];
  return z;
}

namespace detail {

inline void gains_from(const RiccatiSolution& sol, int T, Strategy& s) {
  for (int t = 1; t <= T; ++t) {
    s.theta.push_back(sol.at(t).theta);
    s.theta_bar.push_back(sol.at(t).theta_bar);
  }
}

// Refuses solutions whose best-response Hessian is not positive definite.
inline void require_pd(const RiccatiSolution& sol, const std::string& what) {
  for (int t = 1; t <= sol.horizon(); ++t) {
    const auto& st = sol.at(t);
    const Matrix comb = (1 - sol.alpha) * st.F + sol.alpha * st.Fbar;
    if (!(st.min_eig_combo > pd_tol(comb)) && max_abs(comb) > 0.0) {
      std::ostringstream os;
      os << what << " fails at t=" << t << ": min eig of (1-a)F + a Fbar is "
         << st.min_eig_combo << " (alpha=" << sol.alpha << ")";
      throw math_error(os.str());
    }
  }
}

}  // namespace detail

// Exact equilibrium with deep-state feedback.
inline Strategy spne(const GameModel& m, const WeightProfile& profile,
                     std::optional<int> T = std::nullopt, bool social = false) {
  const int steps = m.steps(T);
  Strategy s;
  s.n = profile.n;
  s.ref = Reference::DeepState;
  realize_weights(profile);
  if (social) {
    for (double a : realize_weights(profile))
      if (!(a > 0.0)) throw math_error("social equilibrium needs positive weights");
    const auto d = solve_social(m, steps);
    s.kind = StrategyKind::SpneSocial;
    s.theta = d.theta;
    s.theta_bar = d.theta_bar;
    return s;
  }
  switch (profile.kind) {
    case WeightProfile::Kind::Homogeneous: {
      const auto sol = solve_finite(m, 1.0 / profile.n, steps);
      detail::require_pd(sol, "positive definiteness condition");
      s.kind = StrategyKind::SpneFinite;
      detail::gains_from(sol, steps, s);
      return s;
    }
    case WeightProfile::Kind::Vanishing: {
      const auto sol = solve_finite(m, 0.0, steps);
      detail::require_pd(sol, "infinite-population condition");
      s.kind = StrategyKind::SpneInfinite;
      detail::gains_from(sol, steps, s);
      return s;
    }
    case WeightProfile::Kind::Positive:
      break;
  }
  throw math_error(
      "no exact equilibrium for arbitrary positive weights unless the cost is "
      "social");
}

// No-sharing strategy driven by the prediction computed with the same
// finite-population gains.
inline Strategy sapde(const GameModel& m, int n, const Vector& z1,
                      std::optional<int> T = std::nullopt) {
  Strategy s = spne(m, WeightProfile::homogeneous(n), T);
  s.kind = StrategyKind::Sapde;
  s.ref = Reference::Prediction;
  s.z = predict(m, s.theta_bar, z1, s.horizon()).z;
  return s;
}

// No-sharing strategy driven by the mean-field prediction and gains.
inline Strategy swmfe(const GameModel& m, const Vector& z1,
                      std::optional<int> T = std::nullopt) {
  const int steps = m.steps(T);
  const auto sol = solve_finite(m, 0.0, steps);
  detail::require_pd(sol, "infinite-population condition");
  Strategy s;
  s.kind = StrategyKind::Swmfe;
  s.ref = Reference::Prediction;
  detail::gains_from(sol, steps, s);
  s.z = predict(m, s.theta_bar, z1, steps, Prediction::Kind::MeanField).z;
  return s;
}

// Exact expected cost of player i when every player follows the same linear
// strategy. Returns the per-step expected costs; cost-to-go from t0 is the
// tail sum. Works for any weights summing to one and correlated noise.
struct ExpectedCost {
  std::vector<double> step;     // index t-1
  std::vector<double> to_go;    // index t0-1
};

inline ExpectedCost expected_cost(const GameModel& m,
                                  const std::vector<double>& a,
                                  const NoiseModel& noise, const Strategy& g,
                                  int i) {
  const int T = g.horizon(), dx = m.d_x, du = m.d_u;
  const int nv = 2 * dx + 1;
  const GaugeMoments g0 =
      gauge_moments(a, noise.initial_mean, noise.initial_cov, dx, i);

  // Second moment of v = (dx^i, xbar, 1).
  Vector mv(nv);
  mv << g0.mean, 1.0;
  Matrix S = mv * mv.transpose();
  S.topLeftCorner(2 * dx, 2 * dx) += g0.cov;
  // sum_j a^j E[dx^j dx^j'].
  Matrix D = g0.others + a[i] * g0.own;

  ExpectedCost out;
  out.step.resize(static_cast<size_t>(T));
  for (int t = 1; t <= T; ++t) {
    const auto& s = m.at(t);
    const LiftedBlocks L = lift(s, 0.0);
    const Matrix& th = g.th(t);
    const Matrix& thb = g.thb(t);
    // (du^i, ubar) = Ku v.
    Matrix Ku = Matrix::Zero(2 * du, nv);
    Ku.block(0, 0, du, dx) = th;
    if (g.ref == Reference::DeepState) {
      Ku.block(du, dx, du, dx) = thb;
    } else {
      Ku.block(du, dx, du, dx) = th;
      Ku.block(du, 2 * dx, du, 1) = (thb - th) * g.z[t - 1];
    }
    Matrix C = Ku.transpose() * L.R * Ku;
    C.topLeftCorner(2 * dx, 2 * dx) += L.Q;
    const Matrix Gd = s.Gx + th.transpose() * s.Gu * th;
    out.step[t - 1] = (C * S).trace() + (Gd * D).trace();

    if (t == T) break;
    Matrix Phi = Matrix::Zero(nv, nv);
    Phi.block(0, 0, dx, dx) = s.A + s.B * th;
    const Matrix Am = s.A + s.Abar, Bm = s.B + s.Bbar;
    Phi.block(dx, dx, dx, dx) = Am + Bm * Ku.block(du, dx, du, dx);
    Phi.block(dx, 2 * dx, dx, 1) = Bm * Ku.block(du, 2 * dx, du, 1);
    Phi(2 * dx, 2 * dx) = 1.0;
    const GaugeMoments w = gauge_moments(a, {}, noise.noise_at(t), dx, i);
    S = Phi * S * Phi.transpose();
    S.topLeftCorner(2 * dx, 2 * dx) += w.cov;
    const Matrix Ad = s.A + s.B * th;
    D = Ad * D * Ad.transpose() + w.others + a[i] * w.own;
  }
  out.to_go.assign(static_cast<size_t>(T), 0.0);
  double acc = 0.0;
  for (int t = T; t >= 1; --t) {
    acc += out.step[t - 1];
    out.to_go[t - 1] = acc;
  }
  return out;
}

struct CostBreakdown {
  double total = 0.0;
  double initial_pair = 0.0;    // E[(dx^i, xbar)' P_1 (dx^i, xbar)]
  double initial_others = 0.0;  // terms on the other players' deviations
  std::vector<double> ell;      // index t-1, size T+1, ell[T] = 0
};

// Optimal cost of player i under the exact equilibrium with homogeneous
// weights, from the value function
//   V_t = (dx^i, xbar)' P_t (dx^i, xbar) + ell_t
//         + sum_{j != i} a dx^j' Pd_t dx^j - a^2/(1-a) dx^i' Pd_t dx^i,
// evaluated with second moments so nonzero means are included.
inline CostBreakdown optimal_cost(const GameModel& m,
                                  const WeightProfile& profile,
                                  const NoiseModel& noise, int i,
                                  std::optional<int> T = std::nullopt) {
  if (profile.kind != WeightProfile::Kind::Homogeneous)
    throw input_error("optimal_cost needs homogeneous weights");
  const auto a = realize_weights(profile);
  const int steps = m.steps(T);
  const double al = 1.0 / profile.n;
  const auto sol = solve_finite(m, al, steps);
  detail::require_pd(sol, "positive definiteness condition");
  const double own_coef = al * al / (1.0 - al);

  CostBreakdown cb;
  cb.ell.assign(static_cast<size_t>(steps) + 1, 0.0);
  for (int t = steps; t >= 1; --t) {
    double add = 0.0;
    if (t < steps) {
      const auto& nx = sol.at(t + 1);
      const GaugeMoments w = gauge_moments(a, {}, noise.noise_at(t), m.d_x, i);
      add = (w.cov * nx.P).trace() + (w.others * nx.Pd).trace() -
            own_coef * (w.own * nx.Pd).trace();
    }
    cb.ell[static_cast<size_t>(t - 1)] = cb.ell[static_cast<size_t>(t)] + add;
  }
  const GaugeMoments x1 =
      gauge_moments(a, noise.initial_mean, noise.initial_cov, m.d_x, i);
  const auto& s1 = sol.at(1);
  cb.initial_pair = (x1.second() * s1.P).trace();
  cb.initial_others =
      (x1.others * s1.Pd).trace() - own_coef * (x1.own * s1.Pd).trace();
  cb.total = cb.initial_pair + cb.ell[0] + cb.initial_others;
  return cb;
}

}  // namespace dsg
