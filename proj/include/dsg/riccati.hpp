// SPDX-License-Identifier: MIT
//
// Non-standard Riccati recursion for the deviation/mean coordinates, its
// discounted algebraic counterpart, and the decoupled standard Riccati
// specializations.

#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dsg/gauge.hpp"

namespace dsg {

struct RiccatiStage {
  Matrix P;      // 2dx x 2dx value matrix on (dx^i, xbar)
  Matrix Pd;     // dx x dx value matrix on the other players' deviations
  Matrix theta, theta_bar;
  Matrix F, Fbar, K, Kbar;
  double min_eig_combo = 0.0;  // min eig of (1-a)F + a Fbar
  double min_eig_F = 0.0, min_eig_Fbar = 0.0;
  double cond_F = 1.0, cond_Fbar = 1.0;
};

struct RiccatiSolution {
  double alpha = 0.0;
  std::optional<double> discount;
  bool stationary = false;
  std::vector<RiccatiStage> stages;  // index t-1; one entry when stationary
  int iterations = 0;
  double residual = 0.0;

  const RiccatiStage& at(int t) const {
    return stationary ? stages.front() : stages.at(static_cast<size_t>(t - 1));
  }
  int horizon() const { return static_cast<int>(stages.size()); }
};

namespace detail {

inline bool exactly_zero(const Matrix& m) { return max_abs(m) == 0.0; }

// theta = F^{-1} K. A zero F with zero K (no cost on actions or states)
// gives the zero gain; otherwise near-singular F is reported.
inline std::optional<Matrix> gain(const Matrix& F, const Matrix& K, double c) {
  if (exactly_zero(F) && exactly_zero(K))
    return Matrix::Zero(K.rows(), K.cols());
  if (!(c <= kSingularCond)) return std::nullopt;
  return F.partialPivLu().solve(K);
}

}  // namespace detail

struct StepResult {
  RiccatiStage stage;
  std::string failure;  // empty on success
};

// One backward step. `g` scales the next-step value (1 for the finite
// recursion, the discount factor for the algebraic map).
inline StepResult riccati_step(const StageMatrices& s, double alpha,
                               const Matrix& Pn, const Matrix& Pdn,
                               double g = 1.0) {
  const int dx = static_cast<int>(s.A.rows()), du = static_cast<int>(s.B.cols());
  const LiftedBlocks L = lift(s, alpha);
  const Matrix M = L.R + g * L.B.transpose() * Pn * L.B;
  const Matrix N = g * L.B.transpose() * Pn * L.A;
  const auto m = [&](const Matrix& X, int i, int j, int c) {
    return X.block(i * du, j * c, du, c);
  };
  StepResult out;
  RiccatiStage& st = out.stage;
  const double a = alpha;
  st.F = (1 - a) * m(M, 0, 0, du) + a * m(M, 1, 0, du);
  st.Fbar = (1 - a) * m(M, 0, 1, du) + a * m(M, 1, 1, du);
  st.K = -((1 - a) * m(N, 0, 0, dx) + a * m(N, 1, 0, dx));
  st.Kbar = -((1 - a) * m(N, 0, 1, dx) + a * m(N, 1, 1, dx));
  st.cond_F = cond(st.F);
  st.cond_Fbar = cond(st.Fbar);
  st.min_eig_F = min_eig(st.F);
  st.min_eig_Fbar = min_eig(st.Fbar);
  st.min_eig_combo = min_eig((1 - a) * st.F + a * st.Fbar);

  const auto th = detail::gain(st.F, st.K, st.cond_F);
  const auto thb = detail::gain(st.Fbar, st.Kbar, st.cond_Fbar);
  if (!th || !thb) {
    std::ostringstream os;
    os << (th ? "Fbar" : "F") << " is numerically singular (cond "
       << (th ? st.cond_Fbar : st.cond_F) << ")";
    out.failure = os.str();
    return out;
  }
  st.theta = *th;
  st.theta_bar = *thb;
  const Matrix Th = block_diag(st.theta, st.theta_bar);
  const Matrix Acl = L.A + L.B * Th;
  st.P = sym(L.Q + Th.transpose() * L.R * Th + g * Acl.transpose() * Pn * Acl);
  const Matrix Ad = s.A + s.B * st.theta;
  st.Pd = sym(s.Gx + st.theta.transpose() * s.Gu * st.theta +
              g * Ad.transpose() * Pdn * Ad);
  return out;
}

inline RiccatiSolution solve_finite(const GameModel& model, double alpha,
                                    std::optional<int> T = std::nullopt) {
  if (!(alpha < 1.0)) throw input_error("solve_finite: alpha must be < 1");
  const int steps = model.steps(T);
  const int dx = model.d_x;
  RiccatiSolution sol;
  sol.alpha = alpha;
  sol.discount = model.discount;
  sol.stages.resize(static_cast<size_t>(steps));
  Matrix P = Matrix::Zero(2 * dx, 2 * dx), Pd = Matrix::Zero(dx, dx);
  for (int t = steps; t >= 1; --t) {
    StepResult r = riccati_step(model.at(t), alpha, P, Pd);
    if (!r.failure.empty()) {
      std::ostringstream os;
      os << "Riccati recursion failed at t=" << t << " (alpha=" << alpha
         << "): " << r.failure;
      throw math_error(os.str());
    }
    P = r.stage.P;
    Pd = r.stage.Pd;
    sol.stages[static_cast<size_t>(t - 1)] = std::move(r.stage);
  }
  return sol;
}

struct AlgebraicOptions {
  double tol = 1e-12;
  int max_iter = 100000;
};

// Fixed-point iteration of the discounted map, started from zero.
inline RiccatiSolution solve_algebraic(const GameModel& model, double alpha,
                                       double gamma,
                                       AlgebraicOptions opt = {}) {
  if (!model.stationary())
    throw input_error("solve_algebraic needs a stationary model");
  if (!(gamma > 0.0 && gamma < 1.0))
    throw input_error("solve_algebraic: discount must lie in (0,1)");
  const int dx = model.d_x;
  const StageMatrices& s = model.at(1);
  Matrix P = Matrix::Zero(2 * dx, 2 * dx), Pd = Matrix::Zero(dx, dx);
  RiccatiSolution sol;
  sol.alpha = alpha;
  sol.discount = gamma;
  sol.stationary = true;
  double diff = 0.0;
  for (int k = 1; k <= opt.max_iter; ++k) {
    StepResult r = riccati_step(s, alpha, P, Pd, gamma);
    if (!r.failure.empty())
      throw math_error("algebraic Riccati iteration failed at iteration " +
                       std::to_string(k) + ": " + r.failure);
    const double scale = 1.0 + std::max(max_abs(P), max_abs(Pd));
    diff = std::max(max_abs(r.stage.P - P), max_abs(r.stage.Pd - Pd));
    P = r.stage.P;
    Pd = r.stage.Pd;
    if (diff < opt.tol * scale) {
      const StepResult check = riccati_step(s, alpha, P, Pd, gamma);
      sol.stages = {check.stage};
      sol.stages.front().P = P;
      sol.stages.front().Pd = Pd;
      const double res = std::max(max_abs(check.stage.P - P),
                                  max_abs(check.stage.Pd - Pd)) /
                         (1.0 + std::max(max_abs(P), max_abs(Pd)));
      sol.iterations = k;
      sol.residual = res;
      if (res > 10.0 * opt.tol)
        throw math_error("algebraic Riccati residual too large: " +
                         std::to_string(res));
      return sol;
    }
  }
  std::ostringstream os;
  os << "algebraic Riccati iteration did not converge in " << opt.max_iter
     << " iterations (last change " << diff << ")";
  throw math_error(os.str());
}

// Standard Riccati recursion P = Q + A'PA - A'PB (R + B'PB)^{-1} B'PA.
struct StandardRiccati {
  std::vector<Matrix> P;     // index t-1
  std::vector<Matrix> gain;  // u = gain * x
};

struct StandardStage {
  Matrix A, B, Q, R;
};

inline std::pair<Matrix, Matrix> standard_step(const StandardStage& s,
                                               const Matrix& Pn, double g) {
  const Matrix H = s.R + g * s.B.transpose() * Pn * s.B;
  if (!(cond(H) <= kSingularCond))
    throw math_error("standard Riccati: R + B'PB is singular");
  const Matrix k = -H.partialPivLu().solve(g * s.B.transpose() * Pn * s.A);
  const Matrix Acl = s.A + s.B * k;
  const Matrix P =
      sym(s.Q + k.transpose() * s.R * k + g * Acl.transpose() * Pn * Acl);
  return {P, k};
}

template <class StageFn>
StandardRiccati standard_riccati(int T, int dx, StageFn stage) {
  StandardRiccati out;
  out.P.resize(static_cast<size_t>(T));
  out.gain.resize(static_cast<size_t>(T));
  Matrix P = Matrix::Zero(dx, dx);
  for (int t = T; t >= 1; --t) {
    auto [Pt, k] = standard_step(stage(t), P, 1.0);
    out.P[static_cast<size_t>(t - 1)] = Pt;
    out.gain[static_cast<size_t>(t - 1)] = k;
    P = Pt;
  }
  return out;
}

inline StandardRiccati standard_riccati_algebraic(const StandardStage& s,
                                                  double gamma,
                                                  AlgebraicOptions opt = {}) {
  Matrix P = Matrix::Zero(s.A.rows(), s.A.rows());
  for (int k = 1; k <= opt.max_iter; ++k) {
    auto [Pn, g] = standard_step(s, P, gamma);
    const double d = max_abs(Pn - P);
    P = Pn;
    if (d < opt.tol * (1.0 + max_abs(P))) {
      auto [Pc, gc] = standard_step(s, P, gamma);
      return {{P}, {gc}};
    }
  }
  throw math_error("standard algebraic Riccati iteration did not converge");
}

struct DecoupledSolution {
  StandardRiccati first;   // deviation channel
  StandardRiccati second;  // mean channel
  std::vector<Matrix> theta, theta_bar;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw math_error("precondition violated: " + what);
}

template <class Pick>
DecoupledSolution decoupled(const GameModel& m, std::optional<int> T,
                            std::optional<double> gamma, Pick pick) {
  DecoupledSolution out;
  if (gamma) {
    const auto [s1, s2] = pick(m.at(1));
    out.first = standard_riccati_algebraic(s1, *gamma);
    out.second = standard_riccati_algebraic(s2, *gamma);
  } else {
    const int steps = m.steps(T);
    out.first = standard_riccati(steps, m.d_x,
                                 [&](int t) { return pick(m.at(t)).first; });
    out.second = standard_riccati(steps, m.d_x,
                                  [&](int t) { return pick(m.at(t)).second; });
  }
  out.theta = out.first.gain;
  out.theta_bar = out.second.gain;
  return out;
}

}  // namespace detail

// Infinite-population solution when the mean field does not enter the
// dynamics: two standard Riccati equations with weights (Q, R) and
// (Q + Sx, R + Su).
inline DecoupledSolution solve_decoupled_infinite(
    const GameModel& m, std::optional<int> T = std::nullopt,
    std::optional<double> gamma = std::nullopt) {
  const int steps = gamma ? 1 : m.steps(T);
  for (int t = 1; t <= steps; ++t) {
    const auto& s = m.at(t);
    detail::require(max_abs(s.Abar) == 0.0 && max_abs(s.Bbar) == 0.0,
                    "Abar = Bbar = 0");
    detail::require(is_psd(s.Q), "Q positive semidefinite");
    detail::require(is_psd(s.Q + s.Sx), "Q + Sx positive semidefinite");
    detail::require(is_pd(s.R), "R positive definite");
    detail::require(is_pd(s.R + s.Su), "R + Su positive definite");
  }
  return detail::decoupled(m, T, gamma, [](const StageMatrices& s) {
    return std::pair{StandardStage{s.A, s.B, s.Q, s.R},
                     StandardStage{s.A + s.Abar, s.B + s.Bbar, s.Q + s.Sx,
                                   s.R + s.Su}};
  });
}

// Social cost: only the weighted terms are present; the gains do not depend
// on the weights.
inline DecoupledSolution solve_social(const GameModel& m,
                                      std::optional<int> T = std::nullopt,
                                      std::optional<double> gamma = std::nullopt) {
  const int steps = gamma ? 1 : m.steps(T);
  for (int t = 1; t <= steps; ++t) {
    const auto& s = m.at(t);
    detail::require(max_abs(s.Q) == 0.0 && max_abs(s.Sx) == 0.0 &&
                        max_abs(s.R) == 0.0 && max_abs(s.Su) == 0.0,
                    "Q = Sx = R = Su = 0");
    detail::require(is_psd(s.Gx), "Gx positive semidefinite");
    detail::require(is_psd(s.Qbar + s.Gx), "Qbar + Gx positive semidefinite");
    detail::require(is_pd(s.Gu), "Gu positive definite");
    detail::require(is_pd(s.Rbar + s.Gu), "Rbar + Gu positive definite");
  }
  return detail::decoupled(m, T, gamma, [](const StageMatrices& s) {
    return std::pair{StandardStage{s.A, s.B, s.Gx, s.Gu},
                     StandardStage{s.A + s.Abar, s.B + s.Bbar, s.Qbar + s.Gx,
                                   s.Rbar + s.Gu}};
  });
}

}  // namespace dsg
