// SPDX-License-Identifier: MIT
//
// Game model: dynamics and cost matrices, weight profiles and
// noise statistics, plus validation.

#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dsg/core.hpp"

namespace dsg {

// Matrices of one time step. Dynamics
//   x^i' = A x^i + B u^i + Abar xbar + Bbar ubar + w^i
// and per-step cost of player i
//   x'Qx + 2x'Sx xbar + xbar'Qbar xbar + sum_j a^j x^j'Gx x^j
//   + u'Ru + 2u'Su ubar + ubar'Rbar ubar + sum_j a^j u^j'Gu u^j.
struct StageMatrices {
  Matrix A, Abar, B, Bbar;
  Matrix Q, Sx, Qbar, Gx;
  Matrix R, Su, Rbar, Gu;

  static StageMatrices zero(int dx, int du) {
    const Matrix X = Matrix::Zero(dx, dx), U = Matrix::Zero(du, du),
                 XU = Matrix::Zero(dx, du);
    return {X, X, XU, XU, X, X, X, X, U, U, U, U};
  }

  StageMatrices scaled_cost(double c) const {
    StageMatrices s = *this;
    for (Matrix* m : {&s.Q, &s.Sx, &s.Qbar, &s.Gx, &s.R, &s.Su, &s.Rbar, &s.Gu})
      *m *= c;
    return s;
  }
};

struct GameModel {
  int d_x = 1;
  int d_u = 1;
  std::optional<int> horizon;  // empty for a stationary model
  std::optional<double> discount;
  std::vector<StageMatrices> stages;  // one per step, or one if stationary

  bool stationary() const { return !horizon.has_value(); }

  // t is 1-based.
  const StageMatrices& at(int t) const {
    return stationary() ? stages.front() : stages.at(static_cast<size_t>(t - 1));
  }

  // Horizon to use when solving; stationary models need an explicit T.
  int steps(std::optional<int> T = std::nullopt) const {
    if (T) return *T;
    if (horizon) return *horizon;
    throw input_error("stationary model needs an explicit horizon");
  }
};

// Finite-horizon copy with T explicit steps.
inline GameModel with_horizon(const GameModel& m, int T) {
  GameModel out = m;
  out.horizon = T;
  out.stages.clear();
  for (int t = 1; t <= T; ++t) out.stages.push_back(m.at(t));
  return out;
}

// Finite-horizon model whose step-t costs are scaled by gamma^(t-1), so the
// undiscounted recursion solves the discounted problem.
inline GameModel discounted_horizon(const GameModel& m, double gamma, int T) {
  GameModel out = with_horizon(m, T);
  double g = 1.0;
  for (auto& s : out.stages) {
    s = s.scaled_cost(g);
    g *= gamma;
  }
  out.discount = gamma;
  return out;
}

struct WeightProfile {
  enum class Kind { Homogeneous, Positive, Vanishing };
  Kind kind = Kind::Homogeneous;
  int n = 0;
  std::vector<double> alpha;  // Positive
  std::vector<double> gamma;  // Vanishing
  double gamma_max = 1.0;

  static WeightProfile homogeneous(int n) {
    WeightProfile p;
    p.n = n;
    return p;
  }
  static WeightProfile positive(std::vector<double> a) {
    WeightProfile p;
    p.kind = Kind::Positive;
    p.n = static_cast<int>(a.size());
    p.alpha = std::move(a);
    return p;
  }
  static WeightProfile vanishing(std::vector<double> g, double gmax) {
    WeightProfile p;
    p.kind = Kind::Vanishing;
    p.n = static_cast<int>(g.size());
    p.gamma = std::move(g);
    p.gamma_max = gmax;
    return p;
  }
};

inline std::vector<double> realize_weights(const WeightProfile& p) {
  if (p.n < 1) throw input_error("weight profile needs n >= 1");
  std::vector<double> a;
  switch (p.kind) {
    case WeightProfile::Kind::Homogeneous:
      a.assign(static_cast<size_t>(p.n), 1.0 / p.n);
      break;
    case WeightProfile::Kind::Positive:
      a = p.alpha;
      break;
    case WeightProfile::Kind::Vanishing:
      for (double g : p.gamma) a.push_back(g / p.n);
      break;
  }
  if (static_cast<int>(a.size()) != p.n)
    throw input_error("weight vector length differs from n");
  double s = 0.0;
  for (double v : a) s += v;
  if (std::abs(s - 1.0) > 1e-12) {
    std::ostringstream os;
    os << "weights sum to " << s << " instead of 1";
    throw input_error(os.str());
  }
  return a;
}

// Covariance of the stacked player vector: either independent per-player
// blocks or one joint matrix of size n*d_x.
struct Covariance {
  std::vector<Matrix> blocks;
  std::optional<Matrix> joint;

  static Covariance independent(std::vector<Matrix> b) {
    return {std::move(b), std::nullopt};
  }
  static Covariance shared(int n, const Matrix& b) {
    return {std::vector<Matrix>(static_cast<size_t>(n), b), std::nullopt};
  }
  static Covariance full(Matrix j) { return {{}, std::move(j)}; }

  bool is_joint() const { return joint.has_value(); }

  Matrix block(int i, int j, int dx) const {
    if (joint) return joint->block(i * dx, j * dx, dx, dx);
    if (i != j) return Matrix::Zero(dx, dx);
    return blocks.at(static_cast<size_t>(i));
  }

  Matrix dense(int n, int dx) const {
    if (joint) return *joint;
    Matrix out = Matrix::Zero(n * dx, n * dx);
    for (int i = 0; i < n; ++i) out.block(i * dx, i * dx, dx, dx) = blocks[i];
    return out;
  }

  bool is_zero() const {
    if (joint) return max_abs(*joint) == 0.0;
    for (const auto& b : blocks)
      if (max_abs(b) != 0.0) return false;
    return true;
  }
};

struct NoiseModel {
  std::vector<Vector> initial_mean;  // one per player
  Covariance initial_cov;
  std::vector<Covariance> noise_cov;  // one per step, or one shared
  bool iid = false;

  int players() const { return static_cast<int>(initial_mean.size()); }

  const Covariance& noise_at(int t) const {
    return noise_cov.size() == 1 ? noise_cov.front()
                                 : noise_cov.at(static_cast<size_t>(t - 1));
  }

  static NoiseModel make_iid(int n, const Vector& mu, const Matrix& var_x,
                             const Matrix& var_w) {
    NoiseModel nm;
    nm.initial_mean.assign(static_cast<size_t>(n), mu);
    nm.initial_cov = Covariance::shared(n, var_x);
    nm.noise_cov = {Covariance::shared(n, var_w)};
    nm.iid = true;
    return nm;
  }
};

struct ValidationReport {
  std::vector<std::string> issues;
  bool ok() const { return issues.empty(); }
};

namespace detail {

inline void check_shape(ValidationReport& r, const std::string& where,
                        const Matrix& m, int rows, int cols) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << where << ": expected " << rows << "x" << cols << ", got " << m.rows()
       << "x" << m.cols();
    r.issues.push_back(os.str());
  }
}

inline void check_sym(ValidationReport& r, const std::string& where,
                      const Matrix& m) {
  if (m.rows() == m.cols() && asymmetry(m) > 1e-12)
    r.issues.push_back(where + ": not symmetric");
}

inline void check_cov(ValidationReport& r, const std::string& where,
                      const Covariance& c, int n, int dx) {
  if (c.joint) {
    check_shape(r, where + ".joint", *c.joint, n * dx, n * dx);
    if (c.joint->rows() == n * dx && min_eig(*c.joint) < -1e-10)
      r.issues.push_back(where + ".joint: not positive semidefinite");
    return;
  }
  if (static_cast<int>(c.blocks.size()) != n) {
    r.issues.push_back(where + ": expected one block per player");
    return;
  }
  for (int i = 0; i < n; ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    check_shape(r, w, c.blocks[i], dx, dx);
    check_sym(r, w, c.blocks[i]);
    if (c.blocks[i].rows() == dx && c.blocks[i].cols() == dx &&
        min_eig(c.blocks[i]) < -1e-10)
      r.issues.push_back(w + ": not positive semidefinite");
  }
}

}  // namespace detail

inline ValidationReport validate_model(const GameModel& m,
                                       const WeightProfile& profile,
                                       const NoiseModel& noise) {
  ValidationReport r;
  const int dx = m.d_x, du = m.d_u;
  if (dx < 1 || du < 1) r.issues.push_back("dimensions must be positive");
  if (m.discount && (*m.discount <= 0.0 || *m.discount >= 1.0))
    r.issues.push_back("discount must lie in (0,1)");
  if (m.stationary() && m.stages.size() != 1)
    r.issues.push_back("stationary model must store exactly one matrix set");
  if (m.horizon && (*m.horizon < 1 ||
                    static_cast<int>(m.stages.size()) != *m.horizon))
    r.issues.push_back("stage count differs from horizon");

  for (size_t k = 0; k < m.stages.size(); ++k) {
    const auto& s = m.stages[k];
    const std::string at = "t=" + std::to_string(k + 1) + " ";
    detail::check_shape(r, at + "A", s.A, dx, dx);
    detail::check_shape(r, at + "Abar", s.Abar, dx, dx);
    detail::check_shape(r, at + "B", s.B, dx, du);
    detail::check_shape(r, at + "Bbar", s.Bbar, dx, du);
    const std::pair<const char*, const Matrix*> xs[] = {
        {"Q", &s.Q}, {"Sx", &s.Sx}, {"Qbar", &s.Qbar}, {"Gx", &s.Gx}};
    for (auto [name, mat] : xs) {
      detail::check_shape(r, at + name, *mat, dx, dx);
      detail::check_sym(r, at + name, *mat);
    }
    const std::pair<const char*, const Matrix*> us[] = {
        {"R", &s.R}, {"Su", &s.Su}, {"Rbar", &s.Rbar}, {"Gu", &s.Gu}};
    for (auto [name, mat] : us) {
      detail::check_shape(r, at + name, *mat, du, du);
      detail::check_sym(r, at + name, *mat);
    }
  }

  std::vector<double> alpha;
  try {
    alpha = realize_weights(profile);
  } catch (const Error& e) {
    r.issues.push_back(std::string("weights: ") + e.what());
  }
  if (profile.kind == WeightProfile::Kind::Positive)
    for (double a : profile.alpha)
      if (!(a > 0.0)) r.issues.push_back("weights: non-positive entry");
  if (profile.kind == WeightProfile::Kind::Vanishing)
    for (double g : profile.gamma)
      if (std::abs(g) > profile.gamma_max)
        r.issues.push_back("weights: |gamma| exceeds gamma_max");

  const int n = profile.n;
  if (noise.players() != n) {
    r.issues.push_back("noise: player count differs from weights");
    return r;
  }
  for (const auto& mu : noise.initial_mean)
    if (mu.size() != dx) r.issues.push_back("noise: mean has wrong size");
  detail::check_cov(r, "noise.initial_cov", noise.initial_cov, n, dx);
  if (noise.noise_cov.empty()) r.issues.push_back("noise: missing noise_cov");
  if (noise.noise_cov.size() > 1 && m.horizon &&
      static_cast<int>(noise.noise_cov.size()) != *m.horizon)
    r.issues.push_back("noise: noise_cov sequence length differs from horizon");
  for (size_t k = 0; k < noise.noise_cov.size(); ++k)
    detail::check_cov(r, "noise.noise_cov[" + std::to_string(k) + "]",
                      noise.noise_cov[k], n, dx);

  if (noise.iid) {
    const auto block_diag_only = [&](const Covariance& c) {
      if (!c.joint) return true;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (i != j && max_abs(c.block(i, j, dx)) > 0.0) return false;
      return true;
    };
    bool ok = block_diag_only(noise.initial_cov);
    for (const auto& c : noise.noise_cov) ok = ok && block_diag_only(c);
    if (!ok) r.issues.push_back("noise: iid flag with correlated covariance");
    for (const auto& mu : noise.initial_mean)
      if (mu.size() == noise.initial_mean.front().size() &&
          max_abs(mu - noise.initial_mean.front()) > 0.0)
        r.issues.push_back("noise: iid flag with differing means");
  }
  return r;
}

// Per-step cost of player i for stacked states X (d_x x n) and actions
// U (d_u x n), evaluated directly in the original coordinates.
inline double stage_cost(const StageMatrices& s, const std::vector<double>& a,
                         const Matrix& X, const Matrix& U, int i) {
  const int n = static_cast<int>(a.size());
  Vector xb = Vector::Zero(X.rows()), ub = Vector::Zero(U.rows());
  for (int j = 0; j < n; ++j) {
    xb += a[j] * X.col(j);
    ub += a[j] * U.col(j);
  }
  const Vector xi = X.col(i), ui = U.col(i);
  double c = xi.dot(s.Q * xi) + 2.0 * xi.dot(s.Sx * xb) + xb.dot(s.Qbar * xb) +
             ui.dot(s.R * ui) + 2.0 * ui.dot(s.Su * ub) + ub.dot(s.Rbar * ub);
  for (int j = 0; j < n; ++j)
    c += a[j] * (X.col(j).dot(s.Gx * X.col(j)) + U.col(j).dot(s.Gu * U.col(j)));
  return c;
}

}  // namespace dsg
