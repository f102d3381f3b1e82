// SPDX-License-Identifier: MIT
//
// Conversion between a general exchangeable LQ game written on the stacked
// state (x^1, ..., x^n) and the deep-structured form with homogeneous weights.

#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "dsg/model.hpp"

namespace dsg {

struct StackedStage {
  Matrix A;               // n*dx x n*dx
  Matrix B;               // n*dx x n*du
  std::vector<Matrix> Q;  // per player, n*dx x n*dx
  std::vector<Matrix> R;  // per player, n*du x n*du
};

struct StackedExchangeableGame {
  int n = 2;
  int d_x = 1;
  int d_u = 1;
  std::vector<StackedStage> stages;
};

namespace detail {

// Pattern of a per-player cost matrix under exchangeability: own block,
// own-other block, other diagonal block, other-other block.
struct CostPattern {
  Matrix own, cross, other, pair;
};

inline Matrix blk(const Matrix& m, int i, int j, int d) {
  return m.block(i * d, j * d, d, d);
}

inline Matrix blk(const Matrix& m, int i, int j, int dr, int dc) {
  return m.block(i * dr, j * dc, dr, dc);
}

inline CostPattern extract_pattern(const Matrix& q0, int n, int d) {
  CostPattern p;
  p.own = blk(q0, 0, 0, d);
  p.cross = blk(q0, 0, 1, d);
  p.other = blk(q0, 1, 1, d);
  p.pair = n >= 3 ? blk(q0, 1, 2, d) : Matrix::Zero(d, d);
  return p;
}

inline Matrix expected_block(const CostPattern& p, int i, int a, int b) {
  if (a == i && b == i) return p.own;
  if (a == i) return p.cross;
  if (b == i) return p.cross.transpose();
  if (a == b) return p.other;
  return p.pair;
}

inline void check_cost(std::vector<std::string>& out, const std::string& tag,
                       const std::vector<Matrix>& qs, int n, int d,
                       double tol) {
  if (static_cast<int>(qs.size()) != n) {
    out.push_back(tag + ": expected one matrix per player");
    return;
  }
  const CostPattern p = extract_pattern(qs[0], n, d);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (max_abs(blk(qs[i], a, b, d) - expected_block(p, i, a, b)) > tol) {
          std::ostringstream os;
          os << tag << " player " << i << " block (" << a << "," << b
             << ") breaks exchangeability";
          out.push_back(os.str());
        }
  if (max_abs(p.cross - p.cross.transpose()) > tol)
    out.push_back(tag + ": own-other block is not symmetric");
  if (max_abs(p.pair - p.pair.transpose()) > tol)
    out.push_back(tag + ": other-other block is not symmetric");
}

inline void check_dyn(std::vector<std::string>& out, const std::string& tag,
                      const Matrix& m, int n, int dr, int dc, double tol) {
  const Matrix diag = blk(m, 0, 0, dr, dc), off = blk(m, 0, 1, dr, dc);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (max_abs(blk(m, a, b, dr, dc) - (a == b ? diag : off)) > tol) {
        std::ostringstream os;
        os << tag << " block (" << a << "," << b << ") breaks exchangeability";
        out.push_back(os.str());
      }
}

}  // namespace detail

// Lists every block that violates exchangeability; empty means valid.
inline std::vector<std::string> check_exchangeable(
    const StackedExchangeableGame& g, double tol = 1e-10) {
  std::vector<std::string> out;
  if (g.n < 2) out.push_back("exchangeable game needs n >= 2");
  const int nx = g.n * g.d_x, nu = g.n * g.d_u;
  for (size_t t = 0; t < g.stages.size() && out.empty(); ++t) {
    const auto& s = g.stages[t];
    const std::string at = "t=" + std::to_string(t + 1) + " ";
    if (s.A.rows() != nx || s.A.cols() != nx || s.B.rows() != nx ||
        s.B.cols() != nu) {
      out.push_back(at + "stacked dynamics have wrong size");
      continue;
    }
    detail::check_dyn(out, at + "A", s.A, g.n, g.d_x, g.d_x, tol);
    detail::check_dyn(out, at + "B", s.B, g.n, g.d_x, g.d_u, tol);
    detail::check_cost(out, at + "Q", s.Q, g.n, g.d_x, tol);
    detail::check_cost(out, at + "R", s.R, g.n, g.d_u, tol);
  }
  return out;
}

inline GameModel from_exchangeable(const StackedExchangeableGame& g,
                                   double tol = 1e-10) {
  const auto issues = check_exchangeable(g, tol);
  if (!issues.empty()) {
    std::string msg = "not exchangeable:";
    for (const auto& s : issues) msg += "\n  " + s;
    throw input_error(msg);
  }
  const int n = g.n;
  const double nd = n;
  GameModel m;
  m.d_x = g.d_x;
  m.d_u = g.d_u;
  m.horizon = static_cast<int>(g.stages.size());
  for (const auto& s : g.stages) {
    StageMatrices o;
    const Matrix a_t = detail::blk(s.A, 0, 0, g.d_x),
                 d_t = detail::blk(s.A, 0, 1, g.d_x);
    const Matrix b_t = detail::blk(s.B, 0, 0, g.d_x, g.d_u),
                 e_t = detail::blk(s.B, 0, 1, g.d_x, g.d_u);
    o.A = a_t - d_t;
    o.Abar = nd * d_t;
    o.B = b_t - e_t;
    o.Bbar = nd * e_t;

    // s_tilde = q^{ik} + q^{ki}', q_tilde = q^{kk}, s_hat = q^{kk'}.
    const auto reduce = [&](const Matrix& q0, int d, Matrix& own, Matrix& s,
                            Matrix& bar, Matrix& g_) {
      const auto p = detail::extract_pattern(q0, n, d);
      const Matrix s_tilde = p.cross + p.cross.transpose();
      const Matrix& q_tilde = p.other;
      const Matrix& s_hat = p.pair;
      own = sym(p.own - s_tilde - q_tilde + 2.0 * s_hat);
      s = sym(0.5 * nd * (s_tilde - 2.0 * s_hat));
      bar = sym(nd * nd * s_hat);
      g_ = sym(nd * (q_tilde - s_hat));
    };
    reduce(s.Q.front(), g.d_x, o.Q, o.Sx, o.Qbar, o.Gx);
    reduce(s.R.front(), g.d_u, o.R, o.Su, o.Rbar, o.Gu);
    m.stages.push_back(std::move(o));
  }
  return m;
}

// Stacked form of a deep-structured model with homogeneous weights 1/n.
inline StackedExchangeableGame to_stacked(const GameModel& m, int n,
                                          std::optional<int> T = std::nullopt) {
  StackedExchangeableGame g;
  g.n = n;
  g.d_x = m.d_x;
  g.d_u = m.d_u;
  const double nd = n;
  const int steps = m.steps(T);
  const auto fill_cost = [&](int d, const Matrix& own, const Matrix& s,
                             const Matrix& bar, const Matrix& gg) {
    const Matrix pair = bar / (nd * nd);
    const Matrix other = gg / nd + pair;
    const Matrix cross = s / nd + pair;
    const Matrix q_own = own + 2.0 * cross + other - 2.0 * pair;
    std::vector<Matrix> out;
    for (int i = 0; i < n; ++i) {
      Matrix q(n * d, n * d);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          Matrix v;
          if (a == i && b == i) v = q_own;
          else if (a == i || b == i) v = cross;
          else if (a == b) v = other;
          else v = pair;
          q.block(a * d, b * d, d, d) = v;
        }
      out.push_back(q);
    }
    return out;
  };
  for (int t = 1; t <= steps; ++t) {
    const auto& s = m.at(t);
    StackedStage st;
    const Matrix d_t = s.Abar / nd, e_t = s.Bbar / nd;
    st.A.resize(n * m.d_x, n * m.d_x);
    st.B.resize(n * m.d_x, n * m.d_u);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        st.A.block(a * m.d_x, b * m.d_x, m.d_x, m.d_x) =
            a == b ? Matrix(s.A + d_t) : d_t;
        st.B.block(a * m.d_x, b * m.d_u, m.d_x, m.d_u) =
            a == b ? Matrix(s.B + e_t) : e_t;
      }
    st.Q = fill_cost(m.d_x, s.Q, s.Sx, s.Qbar, s.Gx);
    st.R = fill_cost(m.d_u, s.R, s.Su, s.Rbar, s.Gu);
    g.stages.push_back(std::move(st));
  }
  return g;
}

}  // namespace dsg
