// SPDX-License-Identifier: MIT
//
// Runtime checks of the existence conditions: invertibility and positive
// definiteness along the Riccati recursion, structural conditions for the
// decoupled cases, and stability conditions for the discounted problem.

#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dsg/gap.hpp"

namespace dsg {

enum class Status { Holds, Fails, NotApplicable };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Holds: return "holds";
    case Status::Fails: return "fails";
    case Status::NotApplicable: return "not-applicable";
  }
  return "unknown";
}

struct AssumptionResult {
  Status status = Status::NotApplicable;
  std::string note;
  std::map<std::string, double> scalars;
  std::map<std::string, std::vector<double>> series;
};

struct AssumptionReport {
  std::map<std::string, AssumptionResult> items;  // "A2", "A3", ...
  const AssumptionResult& operator[](const std::string& k) const {
    return items.at(k);
  }
};

struct AssumptionOptions {
  int alpha_grid = 21;
  std::vector<double> n0_candidates = {10, 100, 1e3, 1e4, 1e5, 1e6};
  int algebraic_max_iter = 100000;
};

namespace detail {

// Runs the recursion at a fixed alpha without throwing; stops at the first
// singular step.
struct Sweep {
  bool ok = true;
  int failed_at = 0;
  std::string failure;
  std::vector<double> min_combo, cond_F, cond_Fbar, min_F, min_Fbar;
  double inv_bound = 0.0;  // max over t of ||F^{-1}||, ||Fbar^{-1}||
};

inline double inv_norm(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  return smin > 0 ? 1.0 / smin : std::numeric_limits<double>::infinity();
}

inline Sweep sweep(const GameModel& m, double alpha, int T) {
  Sweep sw;
  const int dx = m.d_x;
  Matrix P = Matrix::Zero(2 * dx, 2 * dx), Pd = Matrix::Zero(dx, dx);
  for (int t = T; t >= 1; --t) {
    StepResult r = riccati_step(m.at(t), alpha, P, Pd);
    const auto& st = r.stage;
    sw.min_combo.push_back(st.min_eig_combo);
    sw.cond_F.push_back(st.cond_F);
    sw.cond_Fbar.push_back(st.cond_Fbar);
    sw.min_F.push_back(st.min_eig_F);
    sw.min_Fbar.push_back(st.min_eig_Fbar);
    sw.inv_bound = std::max({sw.inv_bound, inv_norm(st.F), inv_norm(st.Fbar)});
    const Matrix comb = (1 - alpha) * st.F + alpha * st.Fbar;
    if (!r.failure.empty() || !(st.min_eig_combo > pd_tol(comb))) {
      sw.ok = false;
      sw.failed_at = t;
      sw.failure = r.failure.empty() ? "(1-a)F + a Fbar not positive definite"
                                     : r.failure;
      if (!r.failure.empty()) break;
    }
    if (r.failure.empty()) {
      P = st.P;
      Pd = st.Pd;
    }
  }
  // Stored backward; present forward in t.
  for (auto* v : {&sw.min_combo, &sw.cond_F, &sw.cond_Fbar, &sw.min_F,
                  &sw.min_Fbar})
    std::reverse(v->begin(), v->end());
  return sw;
}

inline double min_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : *std::min_element(v.begin(), v.end());
}

inline double max_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

inline bool structural_decoupled(const StageMatrices& s) {
  return max_abs(s.Abar) == 0.0 && max_abs(s.Bbar) == 0.0 && is_psd(s.Q) &&
         is_psd(s.Q + s.Sx) && is_pd(s.R) && is_pd(s.R + s.Su);
}

inline bool structural_social(const StageMatrices& s) {
  return max_abs(s.Q) == 0.0 && max_abs(s.Sx) == 0.0 && max_abs(s.R) == 0.0 &&
         max_abs(s.Su) == 0.0 && is_psd(s.Gx) && is_psd(s.Qbar + s.Gx) &&
         is_pd(s.Gu) && is_pd(s.Rbar + s.Gu);
}

}  // namespace detail

// T is the horizon for finite checks (defaults to the model horizon; for a
// stationary model it is used with discounting). gamma enables the
// infinite-horizon checks.
inline AssumptionReport check_assumptions(const GameModel& model,
                                          const WeightProfile& profile,
                                          std::optional<int> T = std::nullopt,
                                          std::optional<double> gamma =
                                              std::nullopt,
                                          AssumptionOptions opt = {}) {
  AssumptionReport rep;
  if (!gamma && model.discount && model.stationary()) gamma = model.discount;
  std::optional<int> steps = T;
  if (!steps && model.horizon) steps = model.horizon;
  // Finite recursion, discounted when the model is stationary.
  std::optional<GameModel> fin;
  if (steps)
    fin = model.stationary() && gamma
              ? discounted_horizon(model, *gamma, *steps)
              : with_horizon(model, *steps);
  const int n = profile.n;
  const double gmax =
      profile.kind == WeightProfile::Kind::Vanishing ? profile.gamma_max : 1.0;

  // A2: homogeneous weights at alpha = 1/n.
  {
    AssumptionResult r;
    if (profile.kind == WeightProfile::Kind::Homogeneous && fin && n >= 2) {
      const auto sw = detail::sweep(*fin, 1.0 / n, *steps);
      r.status = sw.ok ? Status::Holds : Status::Fails;
      r.note = sw.ok ? "" : sw.failure + " at t=" + std::to_string(sw.failed_at);
      r.scalars["alpha"] = 1.0 / n;
      r.scalars["min_eig_combo"] = detail::min_of(sw.min_combo);
      r.scalars["min_eig_F"] = detail::min_of(sw.min_F);
      r.scalars["min_eig_Fbar"] = detail::min_of(sw.min_Fbar);
      r.scalars["max_cond_F"] = detail::max_of(sw.cond_F);
      r.scalars["max_cond_Fbar"] = detail::max_of(sw.cond_Fbar);
      r.series["min_eig_combo"] = sw.min_combo;
      r.series["min_eig_Fbar"] = sw.min_Fbar;
      r.series["cond_F"] = sw.cond_F;
      r.series["cond_Fbar"] = sw.cond_Fbar;
    } else {
      r.note = "needs homogeneous weights with n >= 2 and a horizon";
    }
    rep.items["A2"] = r;
  }

  // A3: the same conditions uniformly on a grid around alpha = 0, for the
  // largest radius gamma_max / n0 that passes.
  {
    AssumptionResult r;
    if (fin) {
      const auto sw0 = detail::sweep(*fin, 0.0, *steps);
      r.series["min_eig_F_at_0"] = sw0.min_F;
      r.scalars["min_eig_F_at_0"] = detail::min_of(sw0.min_F);
      r.scalars["min_eig_Fbar_at_0"] = detail::min_of(sw0.min_Fbar);
      std::vector<double> n0s = opt.n0_candidates;
      if (profile.kind != WeightProfile::Kind::Positive && n >= 2)
        n0s.insert(n0s.begin(), n);
      std::sort(n0s.begin(), n0s.end());
      r.status = Status::Fails;
      r.note = "no radius passed";
      if (!sw0.ok) {
        std::ostringstream os;
        os << "F_t(0) not positive definite at t=" << sw0.failed_at
           << " (min eigenvalue " << detail::min_of(sw0.min_F) << ")";
        if (sw0.failure.find("positive definite") == std::string::npos)
          os << ": " << sw0.failure;
        r.note = os.str();
        n0s.clear();
      }
      const int k = std::max(opt.alpha_grid, 1);
      for (double n0 : n0s) {
        const double rad = gmax / n0;
        bool ok = true;
        double bound = 0.0, worst = std::numeric_limits<double>::infinity();
        for (int j = 0; j < k && ok; ++j) {
          const double al = k == 1 ? 0.0 : -rad + 2.0 * rad * j / (k - 1);
          const auto sw = detail::sweep(*fin, al, *steps);
          ok = sw.ok;
          bound = std::max(bound, sw.inv_bound);
          worst = std::min(worst, detail::min_of(sw.min_combo));
        }
        if (ok) {
          r.status = Status::Holds;
          r.note.clear();
          r.scalars["n0"] = n0;
          r.scalars["radius"] = rad;
          r.scalars["uniform_inverse_bound"] = bound;
          r.scalars["min_eig_combo"] = worst;
          break;
        }
      }
    } else {
      r.note = "needs a horizon";
    }
    rep.items["A3"] = r;
  }

  const int check_steps =
      model.stationary() ? 1 : static_cast<int>(model.stages.size());
  // A4: decoupled mean field.
  {
    AssumptionResult r;
    bool ok = true;
    for (int t = 1; t <= check_steps; ++t)
      ok = ok && detail::structural_decoupled(model.at(t));
    r.status = ok ? Status::Holds : Status::Fails;
    rep.items["A4"] = r;
  }
  // A5: social cost with positive weights.
  {
    AssumptionResult r;
    bool ok = true;
    for (int t = 1; t <= check_steps; ++t)
      ok = ok && detail::structural_social(model.at(t));
    try {
      for (double a : realize_weights(profile)) ok = ok && a > 0.0;
    } catch (const Error&) {
      ok = false;
    }
    r.status = ok ? Status::Holds : Status::Fails;
    rep.items["A5"] = r;
  }

  const bool infinite = model.stationary() && gamma.has_value();
  // A9/A10: convergence and contraction of the discounted fixed point.
  {
    AssumptionResult r9, r10;
    if (infinite) {
      r9.status = r10.status = Status::Holds;
      std::vector<double> alphas = {0.0};
      if (profile.kind == WeightProfile::Kind::Homogeneous && n >= 2)
        alphas.push_back(1.0 / n);
      for (double al : alphas) {
        const int dx = model.d_x;
        Matrix P = Matrix::Zero(2 * dx, 2 * dx), Pd = Matrix::Zero(dx, dx);
        double prev = 0.0, ratio = 0.0;
        bool conv = false;
        int it = 0;
        std::string fail;
        for (it = 1; it <= opt.algebraic_max_iter; ++it) {
          StepResult s = riccati_step(model.at(1), al, P, Pd, *gamma);
          if (!s.failure.empty()) {
            fail = s.failure;
            break;
          }
          const double d = std::max(max_abs(s.stage.P - P), max_abs(s.stage.Pd - Pd));
          // Ratio of successive changes near the fixed point.
          if (it > 2 && prev > 0.0) ratio = d / prev;
          prev = d;
          P = s.stage.P;
          Pd = s.stage.Pd;
          if (d < 1e-12 * (1.0 + std::max(max_abs(P), max_abs(Pd)))) {
            conv = true;
            break;
          }
        }
        const std::string tag = al == 0.0 ? "_alpha0" : "_alpha1n";
        r9.scalars["iterations" + tag] = it;
        r10.scalars["contraction_ratio" + tag] = ratio;
        if (!conv) {
          r9.status = Status::Fails;
          r9.note = fail.empty() ? "no convergence" : fail;
        }
        if (!conv || !(ratio < 1.0)) r10.status = Status::Fails;
      }
    } else {
      r9.note = r10.note = "needs a stationary model with discount";
    }
    rep.items["A9"] = r9;
    rep.items["A10"] = r10;
  }

  // A11/A12: stabilizability and detectability.
  {
    AssumptionResult r11, r12;
    if (model.stationary()) {
      const auto& s = model.at(1);
      const bool ok11 = detail::structural_decoupled(s) && stabilizable(s.A, s.B) &&
                        detectable(s.A, psd_sqrt(s.Q)) &&
                        detectable(s.A, psd_sqrt(s.Q + s.Sx));
      r11.status = ok11 ? Status::Holds : Status::Fails;
      const bool ok12 =
          rep.items["A5"].status == Status::Holds && stabilizable(s.A, s.B) &&
          stabilizable(s.A + s.Abar, s.B + s.Bbar) &&
          detectable(s.A, psd_sqrt(s.Gx)) &&
          detectable(s.A + s.Abar, psd_sqrt(s.Qbar + s.Gx));
      r12.status = ok12 ? Status::Holds : Status::Fails;
    } else {
      r11.note = r12.note = "needs a stationary model";
    }
    rep.items["A11"] = r11;
    rep.items["A12"] = r12;
  }

  // A13: Schur stability of the error systems with stationary gains; the
  // discounted Lyapunov series also needs gamma * rho^2 < 1.
  {
    AssumptionResult r;
    if (infinite && profile.kind == WeightProfile::Kind::Homogeneous && n >= 2) {
      try {
        bool ok = true;
        for (double al : {1.0 / n, 0.0}) {
          const auto sol = solve_algebraic(model, al, *gamma);
          const auto& st = sol.at(1);
          const auto [A, Q] = error_step(model.at(1), st.theta, st.theta_bar, al);
          const double rho = spectral_radius(A);
          const std::string tag = al == 0.0 ? "_infinite" : "_finite_n";
          r.scalars["spectral_radius" + tag] = rho;
          r.scalars["gamma_rho_sq" + tag] = *gamma * rho * rho;
          ok = ok && rho < 1.0;
        }
        r.status = ok ? Status::Holds : Status::Fails;
      } catch (const Error& e) {
        r.status = Status::Fails;
        r.note = e.what();
      }
    } else {
      r.note = "needs a stationary discounted model with homogeneous weights";
    }
    rep.items["A13"] = r;
  }
  return rep;
}

}  // namespace dsg
