// SPDX-License-Identifier: MIT
//
// Monte Carlo simulation of the n-player game under linear strategy
// profiles. Replications are grouped in fixed blocks and merged in block
// order, so results do not depend on the number of worker threads.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <thread>
#include <vector>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include "dsg/equilibrium.hpp"

namespace dsg {

enum class Sampler { Gaussian, Uniform, Zero };

inline const char* to_string(Sampler s) {
  switch (s) {
    case Sampler::Gaussian: return "gaussian";
    case Sampler::Uniform: return "uniform";
    case Sampler::Zero: return "zero";
  }
  return "unknown";
}

inline constexpr double kInstabilityThreshold = 1e12;
inline constexpr long kBlockSize = 512;

struct SimConfig {
  int n = 1;
  int T = 1;
  long replications = 1;
  std::uint64_t seed = 0;
  std::vector<Strategy> profile;  // size 1 (shared) or n
  std::vector<double> weights;    // empty means 1/n
  Sampler sampler = Sampler::Gaussian;
  int threads = 1;
  long store_trajectories = 0;  // number of leading replications to keep
  bool per_player = true;
};

struct TrajectoryRow {
  long rep;
  int t, player;
  Vector x, u;
};

struct SimResult {
  int n = 0, T = 0;
  long replications = 0, used = 0, flagged = 0;
  // [player][t0-1]; empty when per_player is off.
  std::vector<std::vector<double>> mean, stderr_;
  // Player-averaged cost-to-go per replication, [t0-1].
  std::vector<double> pooled_mean, pooled_stderr;
  // Realized deep state per step, [t-1].
  std::vector<Vector> deep_mean, deep_sd;
  std::vector<TrajectoryRow> trajectories;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t rep_seed(std::uint64_t master, long rep,
                              std::uint64_t stream = 0) {
  return splitmix64(splitmix64(master ^ (stream * 0xD1B54A32D192ED03ULL)) +
                    static_cast<std::uint64_t>(rep));
}

// Welford accumulator over fixed-length vectors, with Chan's merge.
struct Accumulator {
  long count = 0;
  std::vector<double> mean, m2;

  explicit Accumulator(size_t k = 0) : mean(k, 0.0), m2(k, 0.0) {}

  void add(const double* v) {
    ++count;
    const double c = static_cast<double>(count);
    for (size_t k = 0; k < mean.size(); ++k) {
      const double d = v[k] - mean[k];
      mean[k] += d / c;
      m2[k] += d * (v[k] - mean[k]);
    }
  }

  void merge(const Accumulator& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(count),
                 nb = static_cast<double>(o.count), nt = na + nb;
    for (size_t k = 0; k < mean.size(); ++k) {
      const double d = o.mean[k] - mean[k];
      mean[k] += d * nb / nt;
      m2[k] += o.m2[k] + d * d * na * nb / nt;
    }
    count += o.count;
  }

  std::vector<double> stderr_() const {
    std::vector<double> out(mean.size(), 0.0);
    if (count < 2) return out;
    const double c = static_cast<double>(count);
    for (size_t k = 0; k < m2.size(); ++k)
      out[k] = std::sqrt(std::max(0.0, m2[k] / (c - 1.0)) / c);
    return out;
  }
};

// Cholesky factors for every covariance the sampler needs.
struct CovFactor {
  std::vector<Matrix> blocks;  // per player, may alias the same matrix
  std::optional<Matrix> joint;
  bool zero = false;
};

inline CovFactor factor(const Covariance& c, int n, int dx) {
  CovFactor f;
  f.zero = c.is_zero();
  if (f.zero) return f;
  if (c.is_joint()) {
    if (c.joint->rows() != n * dx)
      throw input_error("joint covariance has the wrong size for n");
    f.joint = psd_factor(sym(*c.joint));
    return f;
  }
  if (static_cast<int>(c.blocks.size()) != n)
    throw input_error("covariance block count differs from n");
  f.blocks.reserve(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) {
    if (j > 0 && max_abs(c.blocks[j] - c.blocks[j - 1]) == 0.0)
      f.blocks.push_back(f.blocks.back());
    else
      f.blocks.push_back(psd_factor(sym(c.blocks[j])));
  }
  return f;
}

struct NoisePlan {
  int n = 0, dx = 0, T = 0;
  Sampler sampler = Sampler::Gaussian;
  Matrix mean;  // dx x n
  CovFactor init;
  std::vector<CovFactor> step;  // size 1 or T-1
  const CovFactor& at(int t) const {
    return step.size() == 1 ? step.front() : step[static_cast<size_t>(t - 1)];
  }
};

inline NoisePlan plan_noise(const NoiseModel& nm, int n, int dx, int T,
                            Sampler s) {
  if (nm.players() != n)
    throw input_error("noise model has a different number of players");
  NoisePlan p;
  p.n = n;
  p.dx = dx;
  p.T = T;
  p.sampler = s;
  p.mean.resize(dx, n);
  for (int j = 0; j < n; ++j) p.mean.col(j) = nm.initial_mean[j];
  if (s == Sampler::Zero) return p;
  p.init = factor(nm.initial_cov, n, dx);
  if (nm.noise_cov.size() == 1) {
    p.step.push_back(factor(nm.noise_cov.front(), n, dx));
  } else {
    if (static_cast<int>(nm.noise_cov.size()) < T - 1)
      throw input_error("noise sequence shorter than the horizon");
    for (int t = 1; t < T; ++t) p.step.push_back(factor(nm.noise_at(t), n, dx));
  }
  return p;
}

}  // namespace detail

// All random inputs of one replication: initial states and per-step noise.
struct Draws {
  Matrix x1;  // dx x n
  Matrix w;   // dx x (n (T-1)); step t occupies columns (t-1)n .. tn-1

  auto step(int t, int n) const {
    return w.middleCols(static_cast<Eigen::Index>(t - 1) * n, n);
  }
};

namespace detail {

// Boost distributions give the same stream on every standard library.
template <class Rng>
void fill_standard(Rng& rng, Sampler s, double* out, Eigen::Index k) {
  if (s == Sampler::Gaussian) {
    boost::random::normal_distribution<double> nd(0.0, 1.0);
    for (Eigen::Index q = 0; q < k; ++q) out[q] = nd(rng);
  } else {
    const double h = std::sqrt(3.0);
    boost::random::uniform_real_distribution<double> ud(-h, h);
    for (Eigen::Index q = 0; q < k; ++q) out[q] = ud(rng);
  }
}

template <class Rng, class Block>
void apply_factor(Rng& rng, Sampler s, const CovFactor& f, Block out,
                  Vector& tmp) {
  const int dx = static_cast<int>(out.rows()), n = static_cast<int>(out.cols());
  if (f.zero) {
    out.setZero();
    return;
  }
  fill_standard(rng, s, out.data(), out.size());
  if (f.joint) {
    Eigen::Map<Vector> flat(out.data(), out.size());
    tmp.noalias() = *f.joint * flat;
    flat = tmp;
    return;
  }
  if (dx == 1) {
    for (int j = 0; j < n; ++j) out(0, j) *= f.blocks[j](0, 0);
    return;
  }
  tmp.resize(dx);
  for (int j = 0; j < n; ++j) {
    tmp.noalias() = f.blocks[j] * out.col(j);
    out.col(j) = tmp;
  }
}

}  // namespace detail

inline void sample_draws(const detail::NoisePlan& p, std::uint64_t seed,
                         Draws& d) {
  const int steps = std::max(0, p.T - 1);
  d.x1.resize(p.dx, p.n);
  d.w.resize(p.dx, static_cast<Eigen::Index>(p.n) * steps);
  if (p.sampler == Sampler::Zero) {
    d.x1 = p.mean;
    d.w.setZero();
    return;
  }
  std::mt19937_64 rng(seed);
  Vector tmp;
  detail::apply_factor(rng, p.sampler, p.init, d.x1.leftCols(p.n), tmp);
  d.x1 += p.mean;
  for (int t = 1; t <= steps; ++t)
    detail::apply_factor(rng, p.sampler, p.at(t),
                         d.w.middleCols(static_cast<Eigen::Index>(t - 1) * p.n,
                                        p.n),
                         tmp);
}

inline Draws sample_draws(const detail::NoisePlan& p, std::uint64_t seed) {
  Draws d;
  sample_draws(p, seed, d);
  return d;
}

struct Path {
  std::vector<Matrix> X, U;  // index t-1, d x n; only when kept
  Matrix xbar;               // dx x T
  Matrix cost;               // T x n per-step costs
  bool flagged = false;
};

inline const Strategy& strategy_of(const std::vector<Strategy>& profile,
                                   int j) {
  return profile.size() == 1 ? profile.front()
                             : profile[static_cast<size_t>(j)];
}

// Scratch buffers reused across replications.
struct RolloutWork {
  Matrix X, U, Xn;
  Vector xb, ub, off, sx, su, hx, hu;
};

namespace detail {

// y = M v for a column-major M of size r x c.
inline void matvec(const Matrix& M, const double* v, double* y) {
  const Eigen::Index r = M.rows(), c = M.cols();
  const double* m = M.data();
  for (Eigen::Index k = 0; k < r; ++k) y[k] = 0.0;
  for (Eigen::Index l = 0; l < c; ++l) {
    const double vl = v[l];
    const double* col = m + l * r;
    for (Eigen::Index k = 0; k < r; ++k) y[k] += col[k] * vl;
  }
}

inline double quad(const Matrix& M, const double* v) {
  const Eigen::Index d = M.rows();
  const double* m = M.data();
  double acc = 0.0;
  for (Eigen::Index l = 0; l < d; ++l) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) s += v[k] * m[l * d + k];
    acc += s * v[l];
  }
  return acc;
}

inline double dot(const double* x, const double* y, Eigen::Index d) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < d; ++k) s += x[k] * y[k];
  return s;
}

}  // namespace detail

namespace detail {

// Scalar state and action with a shared profile.
inline void rollout_scalar(const GameModel& m, const std::vector<double>& a,
                           const Strategy& g, const Draws& d, int T, Path& p,
                           RolloutWork& w, bool keep_path) {
  const int n = static_cast<int>(a.size());
  double* X = w.X.data();
  double* U = w.U.data();
  double* Xn = w.Xn.data();
  for (int t = 1; t <= T; ++t) {
    const auto& s = m.at(t);
    double xb = 0.0;
    for (int j = 0; j < n; ++j) xb += a[j] * X[j];
    const double th = g.th(t)(0, 0), thb = g.thb(t)(0, 0);
    const double ref =
        g.ref == Reference::DeepState ? xb : g.z[static_cast<size_t>(t - 1)](0);
    const double off = (thb - th) * ref;
    double ub = 0.0, gsum = 0.0, amax = 0.0;
    const double q = s.Q(0, 0), r = s.R(0, 0), gx = s.Gx(0, 0), gu = s.Gu(0, 0);
    for (int j = 0; j < n; ++j) {
      U[j] = th * X[j] + off;
      ub += a[j] * U[j];
      gsum += a[j] * (gx * X[j] * X[j] + gu * U[j] * U[j]);
      amax = std::max(amax, std::abs(X[j]));
    }
    const double sx = 2.0 * s.Sx(0, 0) * xb, su = 2.0 * s.Su(0, 0) * ub;
    const double common =
        s.Qbar(0, 0) * xb * xb + s.Rbar(0, 0) * ub * ub + gsum;
    double* c = p.cost.data() + (t - 1);
    for (int j = 0; j < n; ++j)
      c[static_cast<Eigen::Index>(j) * T] =
          X[j] * (q * X[j] + sx) + U[j] * (r * U[j] + su) + common;
    if (keep_path) {
      p.X.push_back(Eigen::Map<const Matrix>(X, 1, n));
      p.U.push_back(w.U);
    }
    p.xbar(0, t - 1) = xb;
    if (!std::isfinite(gsum + ub + xb) || amax > kInstabilityThreshold) {
      p.flagged = true;
      return;
    }
    if (t == T) break;
    const double A = s.A(0, 0), B = s.B(0, 0);
    const double drift = s.Abar(0, 0) * xb + s.Bbar(0, 0) * ub;
    const double* w1 = d.w.data() + static_cast<Eigen::Index>(t - 1) * n;
    for (int j = 0; j < n; ++j) Xn[j] = A * X[j] + B * U[j] + drift + w1[j];
    std::swap(X, Xn);
  }
  if (!p.cost.allFinite()) p.flagged = true;
}

}  // namespace detail

// Rolls the dynamics forward under the profile for one set of draws.
inline void rollout(const GameModel& m, const std::vector<double>& a,
                    const std::vector<Strategy>& profile, const Draws& d,
                    int T, Path& p, RolloutWork& w, bool keep_path = false) {
  const int n = static_cast<int>(a.size()), dx = m.d_x, du = m.d_u;
  p.flagged = false;
  p.X.clear();
  p.U.clear();
  p.cost.resize(T, n);
  p.xbar.resize(dx, T);
  w.X = d.x1;
  w.U.resize(du, n);
  w.Xn.resize(dx, n);
  for (Vector* v : {&w.xb, &w.sx, &w.hx}) v->resize(dx);
  for (Vector* v : {&w.ub, &w.off, &w.su, &w.hu}) v->resize(du);
  w.off.resize(std::max(dx, du));
  const bool shared = profile.size() == 1;
  if (shared && dx == 1 && du == 1) {
    detail::rollout_scalar(m, a, profile.front(), d, T, p, w, keep_path);
    return;
  }
  for (int t = 1; t <= T; ++t) {
    const auto& s = m.at(t);
    w.xb.setZero();
    for (int j = 0; j < n; ++j) w.xb += a[j] * w.X.col(j);
    if (shared) {
      const Strategy& g = profile.front();
      const Vector& ref = g.ref == Reference::DeepState
                              ? w.xb
                              : g.z[static_cast<size_t>(t - 1)];
      detail::matvec(g.thb(t), ref.data(), w.hu.data());
      detail::matvec(g.th(t), ref.data(), w.su.data());
      w.hu -= w.su;  // (theta_bar - theta) ref
      const Matrix& th = g.th(t);
      for (int j = 0; j < n; ++j) {
        double* u = w.U.col(j).data();
        detail::matvec(th, w.X.col(j).data(), u);
        for (int k = 0; k < du; ++k) u[k] += w.hu[k];
      }
    } else {
      for (int j = 0; j < n; ++j)
        w.U.col(j) = profile[static_cast<size_t>(j)].action(t, w.X.col(j), w.xb);
    }
    w.ub.setZero();
    for (int j = 0; j < n; ++j) w.ub += a[j] * w.U.col(j);

    // Terms shared by every player.
    double common = detail::quad(s.Qbar, w.xb.data()) +
                    detail::quad(s.Rbar, w.ub.data());
    for (int j = 0; j < n; ++j)
      common += a[j] * (detail::quad(s.Gx, w.X.col(j).data()) +
                        detail::quad(s.Gu, w.U.col(j).data()));
    detail::matvec(s.Sx, w.xb.data(), w.sx.data());
    detail::matvec(s.Su, w.ub.data(), w.su.data());
    double* c = p.cost.data() + (t - 1);
    for (int j = 0; j < n; ++j) {
      const double* x = w.X.col(j).data();
      const double* u = w.U.col(j).data();
      c[static_cast<Eigen::Index>(j) * T] =
          detail::quad(s.Q, x) + 2.0 * detail::dot(x, w.sx.data(), dx) +
          detail::quad(s.R, u) + 2.0 * detail::dot(u, w.su.data(), du) +
          common;
    }

    if (keep_path) {
      p.X.push_back(w.X);
      p.U.push_back(w.U);
    }
    p.xbar.col(t - 1) = w.xb;
    if (!w.X.allFinite() || !w.U.allFinite() ||
        w.X.cwiseAbs().maxCoeff() > kInstabilityThreshold) {
      p.flagged = true;
      return;
    }
    if (t == T) break;
    detail::matvec(s.Abar, w.xb.data(), w.hx.data());
    detail::matvec(s.Bbar, w.ub.data(), w.sx.data());
    w.hx += w.sx;
    const auto noise = d.step(t, n);
    for (int j = 0; j < n; ++j) {
      double* xn = w.Xn.col(j).data();
      detail::matvec(s.A, w.X.col(j).data(), xn);
      detail::matvec(s.B, w.U.col(j).data(), w.sx.data());
      for (int k = 0; k < dx; ++k) xn[k] += w.sx[k] + w.hx[k] + noise(k, j);
    }
    w.X.swap(w.Xn);
  }
  if (!p.cost.allFinite()) p.flagged = true;
}

inline Path rollout(const GameModel& m, const std::vector<double>& a,
                    const std::vector<Strategy>& profile, const Draws& d,
                    int T, bool keep_path = false) {
  Path p;
  RolloutWork w;
  rollout(m, a, profile, d, T, p, w, keep_path);
  return p;
}

namespace detail {

inline std::vector<double> resolve_weights(const SimConfig& c) {
  if (c.weights.empty())
    return std::vector<double>(static_cast<size_t>(c.n), 1.0 / c.n);
  if (static_cast<int>(c.weights.size()) != c.n)
    throw input_error("weights must have n entries");
  return c.weights;
}

inline void check_profile(const std::vector<Strategy>& profile, int n, int T) {
  if (profile.empty() ||
      (profile.size() != 1 && static_cast<int>(profile.size()) != n))
    throw input_error("profile must have 1 or n strategies");
  for (const auto& g : profile) {
    if (g.horizon() < T)
      throw input_error("strategy horizon shorter than the simulation");
    if (g.ref == Reference::Prediction && static_cast<int>(g.z.size()) < T)
      throw input_error("prediction shorter than the simulation");
  }
}

// Suffix sums of the per-step costs: cost-to-go from each t0, in place.
inline void cost_to_go(Matrix& cost) {
  for (Eigen::Index t = cost.rows() - 2; t >= 0; --t)
    cost.row(t) += cost.row(t + 1);
}

struct Scratch {
  Draws d1, d2;
  Path p1, p2;
  RolloutWork w;
  Matrix ctg;               // T x n
  Eigen::RowVectorXd pool;  // length T
};

struct BlockOut {
  Accumulator player, pooled, deep;
  long flagged = 0;
  std::vector<TrajectoryRow> rows;
};

// Runs replications in fixed blocks on a pool of threads. Each worker
// keeps its own scratch; merging follows block order.
template <class Body, class Make>
void run_blocks(long reps, int threads, const Body& body, const Make& make,
                BlockOut& total) {
  const long nblocks = (reps + kBlockSize - 1) / kBlockSize;
  const int workers = std::max(1, threads);
  const long wave = 4L * workers;
  std::vector<Scratch> scratch(static_cast<size_t>(workers));
  for (long b0 = 0; b0 < nblocks; b0 += wave) {
    const long b1 = std::min(nblocks, b0 + wave);
    std::vector<BlockOut> outs;
    outs.reserve(static_cast<size_t>(b1 - b0));
    for (long b = b0; b < b1; ++b) outs.push_back(make());
    std::atomic<long> next{b0};
    const auto work = [&](Scratch& sc) {
      for (long b = next++; b < b1; b = next++) {
        BlockOut& o = outs[static_cast<size_t>(b - b0)];
        const long r1 = std::min(reps, (b + 1) * kBlockSize);
        for (long r = b * kBlockSize; r < r1; ++r) body(r, o, sc);
      }
    };
    const int k = static_cast<int>(std::min<long>(workers, b1 - b0));
    if (k == 1) {
      work(scratch.front());
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < k; ++w)
        pool.emplace_back(work, std::ref(scratch[static_cast<size_t>(w)]));
      for (auto& th : pool) th.join();
    }
    for (auto& o : outs) {
      total.player.merge(o.player);
      total.pooled.merge(o.pooled);
      total.deep.merge(o.deep);
      total.flagged += o.flagged;
      for (auto& r : o.rows) total.rows.push_back(std::move(r));
    }
  }
}

// Adds a T x n cost-to-go matrix: per player (player-major) and averaged.
inline void add_costs(BlockOut& o, Scratch& sc, bool per_player) {
  if (per_player) o.player.add(sc.ctg.data());
  sc.pool.noalias() = sc.ctg.rowwise().mean().transpose();
  o.pooled.add(sc.pool.data());
}

inline std::vector<std::vector<double>> split(const std::vector<double>& v,
                                              int n, int T) {
  std::vector<std::vector<double>> out;
  for (int j = 0; j < n; ++j) {
    const auto b = v.begin() + static_cast<long>(j) * T;
    out.emplace_back(b, b + T);
  }
  return out;
}

inline void unpack(const BlockOut& tot, int n, int T, int dx, bool per_player,
                   SimResult& r) {
  r.used = tot.pooled.count;
  r.flagged = tot.flagged;
  r.pooled_mean = tot.pooled.mean;
  r.pooled_stderr = tot.pooled.stderr_();
  if (per_player) {
    r.mean = split(tot.player.mean, n, T);
    r.stderr_ = split(tot.player.stderr_(), n, T);
  }
  const auto dse = tot.deep.stderr_();
  const double c = static_cast<double>(std::max(1L, tot.deep.count));
  for (int t = 0; t < T; ++t) {
    Vector mu(dx), sd(dx);
    for (int k = 0; k < dx; ++k) {
      mu(k) = tot.deep.mean[static_cast<size_t>(t) * dx + k];
      // stderr * sqrt(count) recovers the sample standard deviation.
      sd(k) = dse[static_cast<size_t>(t) * dx + k] * std::sqrt(c);
    }
    r.deep_mean.push_back(mu);
    r.deep_sd.push_back(sd);
  }
}

inline void keep_rows(long rep, const Path& p, std::vector<TrajectoryRow>& out) {
  for (size_t t = 0; t < p.X.size(); ++t)
    for (int j = 0; j < p.X[t].cols(); ++j)
      out.push_back({rep, static_cast<int>(t) + 1, j, p.X[t].col(j),
                     p.U[t].col(j)});
}

}  // namespace detail

inline SimResult simulate(const GameModel& m, const NoiseModel& noise,
                          const SimConfig& c) {
  if (c.replications < 1) throw input_error("replications must be >= 1");
  if (c.n < 1 || c.T < 1) throw input_error("n and T must be positive");
  detail::check_profile(c.profile, c.n, c.T);
  const auto a = detail::resolve_weights(c);
  const auto plan = detail::plan_noise(noise, c.n, m.d_x, c.T, c.sampler);
  const int n = c.n, T = c.T, dx = m.d_x;
  const size_t kp = c.per_player ? static_cast<size_t>(n) * T : 0;

  const auto make = [&]() {
    return detail::BlockOut{detail::Accumulator(kp),
                            detail::Accumulator(static_cast<size_t>(T)),
                            detail::Accumulator(static_cast<size_t>(T) * dx),
                            0,
                            {}};
  };
  const auto body = [&](long r, detail::BlockOut& o, detail::Scratch& sc) {
    sample_draws(plan, detail::rep_seed(c.seed, r), sc.d1);
    const bool keep = r < c.store_trajectories;
    rollout(m, a, c.profile, sc.d1, T, sc.p1, sc.w, keep);
    if (keep) detail::keep_rows(r, sc.p1, o.rows);
    if (sc.p1.flagged) {
      ++o.flagged;
      return;
    }
    sc.ctg = sc.p1.cost;
    detail::cost_to_go(sc.ctg);
    detail::add_costs(o, sc, c.per_player);
    o.deep.add(sc.p1.xbar.data());
  };
  detail::BlockOut tot = make();
  detail::run_blocks(c.replications, c.threads, body, make, tot);

  SimResult res;
  res.n = n;
  res.T = T;
  res.replications = c.replications;
  detail::unpack(tot, n, T, dx, c.per_player, res);
  res.trajectories = std::move(tot.rows);
  return res;
}

struct GapEstimate {
  double estimate = 0.0;  // signed mean difference for the reported player
  double stderr_ = 0.0;
  int player = -1;        // -1 when pooled over exchangeable players
  long used = 0, flagged = 0;
  // Signed mean and standard error per t0, pooled and per player.
  std::vector<double> pooled_mean, pooled_stderr;
  std::vector<std::vector<double>> mean, stderr_by_player;
};

struct GapOptions {
  int threads = 1;
  Sampler sampler = Sampler::Gaussian;
  bool common_random_numbers = true;
  bool pool = false;  // average over players (exchangeable noise)
};

// Mean over replications of cost(g_hat) - cost(g_star) from t0. With
// common random numbers both profiles see the same draws. Without pooling
// the reported player maximizes the absolute mean difference.
inline GapEstimate empirical_performance_gap(const GameModel& m,
                                             const NoiseModel& noise, int n,
                                             const std::vector<Strategy>& g_hat,
                                             const std::vector<Strategy>& g_star,
                                             long reps, std::uint64_t seed,
                                             int t0, int T,
                                             const GapOptions& opt = {}) {
  if (reps < 1) throw input_error("replications must be >= 1");
  if (t0 < 1 || t0 > T) throw input_error("t0 outside the horizon");
  detail::check_profile(g_hat, n, T);
  detail::check_profile(g_star, n, T);
  const std::vector<double> a(static_cast<size_t>(n), 1.0 / n);
  const auto plan = detail::plan_noise(noise, n, m.d_x, T, opt.sampler);
  const size_t kp = opt.pool ? 0 : static_cast<size_t>(n) * T;

  const auto make = [&]() {
    return detail::BlockOut{detail::Accumulator(kp),
                            detail::Accumulator(static_cast<size_t>(T)),
                            detail::Accumulator(0), 0, {}};
  };
  const auto body = [&](long r, detail::BlockOut& o, detail::Scratch& sc) {
    sample_draws(plan, detail::rep_seed(seed, r), sc.d1);
    rollout(m, a, g_hat, sc.d1, T, sc.p1, sc.w);
    if (opt.common_random_numbers) {
      rollout(m, a, g_star, sc.d1, T, sc.p2, sc.w);
    } else {
      sample_draws(plan, detail::rep_seed(seed, r, 1), sc.d2);
      rollout(m, a, g_star, sc.d2, T, sc.p2, sc.w);
    }
    if (sc.p1.flagged || sc.p2.flagged) {
      ++o.flagged;
      return;
    }
    sc.ctg = sc.p1.cost - sc.p2.cost;
    detail::cost_to_go(sc.ctg);
    detail::add_costs(o, sc, !opt.pool);
  };
  detail::BlockOut tot = make();
  detail::run_blocks(reps, opt.threads, body, make, tot);

  GapEstimate g;
  g.used = tot.pooled.count;
  g.flagged = tot.flagged;
  g.pooled_mean = tot.pooled.mean;
  g.pooled_stderr = tot.pooled.stderr_();
  const size_t k = static_cast<size_t>(t0 - 1);
  if (opt.pool) {
    g.estimate = g.pooled_mean[k];
    g.stderr_ = g.pooled_stderr[k];
    return g;
  }
  g.mean = detail::split(tot.player.mean, n, T);
  g.stderr_by_player = detail::split(tot.player.stderr_(), n, T);
  double best = -1.0;
  for (int j = 0; j < n; ++j) {
    const double v = g.mean[j][k];
    if (std::abs(v) > best) {
      best = std::abs(v);
      g.estimate = v;
      g.stderr_ = g.stderr_by_player[j][k];
      g.player = j;
    }
  }
  return g;
}

inline void write_trajectory_csv(std::ostream& os,
                                 const std::vector<TrajectoryRow>& rows,
                                 int dx, int du) {
  os << "rep,t,player";
  for (int k = 0; k < dx; ++k) os << ",x" << k;
  for (int k = 0; k < du; ++k) os << ",u" << k;
  os << "\n";
  char buf[32];
  for (const auto& r : rows) {
    os << r.rep << ',' << r.t << ',' << r.player;
    for (int k = 0; k < r.x.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", r.x(k));
      os << ',' << buf;
    }
    for (int k = 0; k < r.u.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", r.u(k));
      os << ',' << buf;
    }
    os << "\n";
  }
}

}  // namespace dsg
