#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "sciss/errors.hpp"

namespace sciss {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct SolverConfig {
  int max_iters = 100;
  double grad_tol = 1e-8;
  int step_halvings = 30;

  void validate() const {
    if (max_iters < 1) throw InvalidArgument("SolverConfig: max_iters must be >= 1");
    if (!(grad_tol > 0.0)) throw InvalidArgument("SolverConfig: grad_tol must be > 0");
    if (step_halvings < 0) throw InvalidArgument("SolverConfig: step_halvings must be >= 0");
  }
};

inline constexpr double kPivotTolerance = 1e-12;

inline double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

inline bool is_symmetric(const Mat& m, double tol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = i + 1; j < m.cols(); ++j)
      if (std::abs(m(i, j) - m(j, i)) > tol) return false;
  return true;
}

/// Solves A x = b by LU with partial pivoting. A pivot below 1e-12 in
/// magnitude is treated as singular: every matrix solved here is a small
/// hessian or covariance that must be positive definite.
inline Vec solve_linear(const Mat& a, const Vec& b) {
  if (a.rows() != a.cols() || a.rows() != b.size() || a.rows() == 0)
    throw DimensionMismatch("solve_linear: A must be square and match b");
  Eigen::PartialPivLU<Mat> lu(a);
  const Mat& packed = lu.matrixLU();
  for (Eigen::Index i = 0; i < packed.rows(); ++i) {
    if (!(std::abs(packed(i, i)) >= kPivotTolerance))
      throw SingularMatrix("solve_linear: pivot " + std::to_string(i) + " below tolerance");
  }
  return lu.solve(b);
}

/// Inverse of a small nonsingular matrix, same singularity rule as solve_linear.
inline Mat invert(const Mat& a) {
  if (a.rows() != a.cols() || a.rows() == 0) throw DimensionMismatch("invert: matrix must be square");
  Eigen::PartialPivLU<Mat> lu(a);
  const Mat& packed = lu.matrixLU();
  for (Eigen::Index i = 0; i < packed.rows(); ++i) {
    if (!(std::abs(packed(i, i)) >= kPivotTolerance))
      throw SingularMatrix("invert: pivot " + std::to_string(i) + " below tolerance");
  }
  return lu.inverse();
}

/// Newton's method for f(x) = 0 with backtracking on ||f||_inf: a full step
/// that does not reduce the residual is halved up to `step_halvings` times.
/// Returns x with ||f(x)||_inf <= grad_tol or throws NoConvergence.
inline Vec newton_root(const std::function<Vec(const Vec&)>& f,
                       const std::function<Mat(const Vec&)>& jacobian, Vec x,
                       const SolverConfig& cfg = {}, int* iterations = nullptr) {
  cfg.validate();
  Vec fx = f(x);
  if (fx.size() != x.size()) throw DimensionMismatch("newton_root: f(x) and x differ in length");
  double norm = inf_norm(fx);
  for (int it = 0; it < cfg.max_iters; ++it) {
    if (!std::isfinite(norm)) throw NoConvergence("newton_root: non-finite residual");
    if (norm <= cfg.grad_tol) {
      if (iterations) *iterations = it;
      return x;
    }
    const Mat jac = jacobian(x);
    if (jac.rows() != x.size() || jac.cols() != x.size())
      throw DimensionMismatch("newton_root: jacobian has wrong shape");
    const Vec step = solve_linear(jac, -fx);

    double t = 1.0;
    Vec candidate = x + step;
    Vec f_candidate = f(candidate);
    double cand_norm = inf_norm(f_candidate);
    for (int h = 0; h < cfg.step_halvings && !(cand_norm < norm); ++h) {
      t *= 0.5;
      candidate = x + t * step;
      f_candidate = f(candidate);
      cand_norm = inf_norm(f_candidate);
    }
    // A non-improving step after all halvings is still taken: near the root
    // rounding can make ||f|| flat while the iterate is already acceptable.
    x = std::move(candidate);
    fx = std::move(f_candidate);
    norm = cand_norm;
  }
  if (norm <= cfg.grad_tol) {
    if (iterations) *iterations = cfg.max_iters;
    return x;
  }
  throw NoConvergence("newton_root: max_iters reached with residual " + std::to_string(norm));
}

/// Central finite-difference gradient.
inline Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-6) {
  Vec grad(x.size());
  Vec probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = f(probe);
    probe[i] = orig - h;
    const double down = f(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// Logistic link g(a) = e^a / (1 + e^a), evaluated without overflow.
inline double logistic(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

// log(1 + e^a)
inline double log1p_exp(double a) {
  return a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
}

inline double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double mean(const Vec& v) { return v.size() == 0 ? 0.0 : v.mean(); }

// Centered second moment with divisor n (the plug-in variance).
inline double plugin_variance(const Vec& v) {
  if (v.size() == 0) return 0.0;
  const double m = v.mean();
  return (v.array() - m).square().mean();
}

// Sample standard deviation with divisor n - 1; NaN when fewer than 2 values.
inline double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Normalizes log-weights in place into probabilities (max-shifted softmax).
// Returns false if every entry is -inf.
inline bool softmax_inplace(Vec& logw) {
  const double top = logw.maxCoeff();
  if (!std::isfinite(top)) return false;
  logw = (logw.array() - top).exp();
  logw /= logw.sum();
  return true;
}

}  // namespace sciss
