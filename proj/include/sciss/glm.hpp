#pragma once

#include <cmath>
#include <optional>

#include "sciss/numerics.hpp"

namespace sciss {

struct GlmFit {
  Vec coef;
  // Average negative hessian of the (weighted, penalized) log-likelihood at
  // the solution: (1/n) sum_i w_i g'(v_i^T b) v_i v_i^T + ridge I.
  Mat hessian;
  int iterations = 0;
};

// Linear predictors beyond this bound mean the fit ran off to a separated
// direction; downstream sandwich formulas are meaningless there. Newton on a
// separated sample stops once the score tail drops below grad_tol, which for
// the default 1e-8 happens near |eta| = 18, so the bound must sit below that.
inline constexpr double kSeparationBound = 15.0;

/// Logistic regression by Newton's method. Solves
///   (1/n) sum_i w_i v_i {y_i - g(v_i^T b)} - ridge * b = 0
/// starting from b = 0. `weights` defaults to all ones.
inline GlmFit fit_logistic(const Mat& design, const Vec& response, const std::optional<Vec>& weights = std::nullopt,
                           double ridge = 0.0, const SolverConfig& cfg = {}) {
  const Eigen::Index n = design.rows();
  const Eigen::Index k = design.cols();
  if (response.size() != n) throw DimensionMismatch("fit_logistic: response length != rows");
  if (weights && weights->size() != n) throw DimensionMismatch("fit_logistic: weights length != rows");
  if (n == 0) throw InvalidArgument("fit_logistic: empty design");
  if (ridge < 0.0) throw InvalidArgument("fit_logistic: ridge must be >= 0");
  const Vec wt = weights ? *weights : Vec::Ones(n);
  const double inv_n = 1.0 / static_cast<double>(n);

  if (ridge == 0.0) {
    const double lo = response.minCoeff();
    const double hi = response.maxCoeff();
    if (lo == hi) throw NoConvergence("fit_logistic: constant response, MLE does not exist");
  }

  auto probs = [&](const Vec& b) {
    Vec eta = design * b;
    for (Eigen::Index i = 0; i < n; ++i) eta[i] = logistic(eta[i]);
    return eta;
  };
  auto score = [&](const Vec& b) -> Vec {
    const Vec mu = probs(b);
    return inv_n * design.transpose() * (wt.array() * (response - mu).array()).matrix() - ridge * b;
  };
  auto info = [&](const Vec& b) -> Mat {
    const Vec mu = probs(b);
    const Vec curv = (wt.array() * mu.array() * (1.0 - mu.array())).matrix();
    Mat h = inv_n * design.transpose() * curv.asDiagonal() * design;
    h.diagonal().array() += ridge;
    return h;
  };
  GlmFit out;
  out.coef = newton_root(score, [&](const Vec& b) -> Mat { return -info(b); }, Vec::Zero(k), cfg, &out.iterations);
  // One more full step, kept if it helps: the score is then near machine
  // precision, so Sigma^{-1}-scaled quantities also vanish at grad_tol.
  {
    const Vec s0 = score(out.coef);
    const Vec polished = out.coef + solve_linear(info(out.coef), s0);
    if (inf_norm(score(polished)) < inf_norm(s0)) out.coef = polished;
  }
  // A positive ridge keeps the solution finite even on separated samples.
  if (ridge == 0.0 && (design * out.coef).cwiseAbs().maxCoeff() > kSeparationBound)
    throw NoConvergence("fit_logistic: separation detected (linear predictor diverging)");
  out.hessian = info(out.coef);
  return out;
}

/// Poisson log-link regression by Newton's method, starting from the
/// intercept-only solution when column 0 is an intercept.
inline GlmFit fit_poisson(const Mat& design, const Vec& counts, const SolverConfig& cfg = {}) {
  const Eigen::Index n = design.rows();
  const Eigen::Index k = design.cols();
  if (counts.size() != n) throw DimensionMismatch("fit_poisson: counts length != rows");
  if (n == 0) throw InvalidArgument("fit_poisson: empty design");
  const double inv_n = 1.0 / static_cast<double>(n);
  auto score = [&](const Vec& b) -> Vec {
    const Vec mu = (design * b).array().exp().matrix();
    return inv_n * design.transpose() * (counts - mu);
  };
  auto info = [&](const Vec& b) -> Mat {
    const Vec mu = (design * b).array().exp().matrix();
    return inv_n * design.transpose() * mu.asDiagonal() * design;
  };
  Vec start = Vec::Zero(k);
  const double avg = counts.mean();
  if (avg > 0.0 && (design.col(0).array() == 1.0).all()) start[0] = std::log(avg);
  GlmFit out;
  out.coef = newton_root(score, [&](const Vec& b) -> Mat { return -info(b); }, start, cfg, &out.iterations);
  out.hessian = info(out.coef);
  return out;
}

}  // namespace sciss
