// SPDX-License-Identifier: MIT
//
// Shared aliases, error type and small dense linear-algebra helpers.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorKind { Input, Math, Instability };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error input_error(const std::string& s) { return {ErrorKind::Input, s}; }
inline Error math_error(const std::string& s) { return {ErrorKind::Math, s}; }

inline constexpr double kSingularCond = 1e12;

inline Matrix sym(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

// Relative asymmetry max|M - M'| / max(1, max|M|).
inline double asymmetry(const Matrix& m) {
  if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
  return max_abs(m - m.transpose()) / std::max(1.0, max_abs(m));
}

inline double min_eig(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// Tolerance for "positive" eigenvalues, scaled by the matrix magnitude.
inline double pd_tol(const Matrix& m) {
  return 1e-10 * m.diagonal().cwiseAbs().sum();
}

inline bool is_psd(const Matrix& m) { return min_eig(m) >= -pd_tol(m); }
inline bool is_pd(const Matrix& m) { return min_eig(m) > pd_tol(m); }

inline double cond(const Matrix& m) {
  if (m.size() == 0) return 1.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

inline double spectral_radius(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline Matrix block_diag(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

// Factor S = L L' of a PSD matrix. Falls back to eigenvalue clipping when
// the Cholesky factorization fails; `clipped` reports the fallback.
inline Matrix psd_factor(const Matrix& s, bool* clipped = nullptr) {
  if (clipped) *clipped = false;
  if (s.size() == 0) return s;
  Eigen::LLT<Matrix> llt(sym(s));
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(s));
  Vector d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  if (clipped) *clipped = es.eigenvalues().minCoeff() < -pd_tol(s);
  return es.eigenvectors() * d.asDiagonal();
}

// Discrete-time PBH test: every eigenvalue with |lambda| >= 1 must be
// controllable through `b`.
inline bool stabilizable(const Matrix& a, const Matrix& b) {
  const int n = static_cast<int>(a.rows());
  Eigen::EigenSolver<Matrix> es(a, false);
  for (int k = 0; k < n; ++k) {
    const std::complex<double> lam = es.eigenvalues()(k);
    if (std::abs(lam) < 1.0 - 1e-12) continue;
    Eigen::MatrixXcd pbh(n, n + b.cols());
    pbh.leftCols(n) = a.cast<std::complex<double>>() -
                      lam * Eigen::MatrixXcd::Identity(n, n);
    pbh.rightCols(b.cols()) = b.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pbh);
    const auto& s = svd.singularValues();
    if (s(n - 1) <= 1e-10 * std::max(1.0, s(0))) return false;
  }
  return true;
}

inline bool detectable(const Matrix& a, const Matrix& c) {
  return stabilizable(a.transpose(), c.transpose());
}

// Symmetric PSD square root.
inline Matrix psd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(m));
  return es.eigenvectors() *
         es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

}  // namespace dsg
