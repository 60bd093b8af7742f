#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "sciss/dataset.hpp"
#include "sciss/glm.hpp"

namespace sciss {

// One node's conditional logistic fit. `coef` is theta_j in stacked-node order.
struct NodeFit {
  Vec coef;
  Mat hessian;      // Sigma_hat_{theta_j}
  Mat hessian_inv;
  int iterations = 0;
};

struct NodewiseFit {
  NodeLayout layout;
  std::vector<NodeFit> nodes;

  /// Empirical score Sigma^{-1} v {y_j - g(theta_j^T v)} for an arbitrary
  /// configuration y at adjustment features w.
  Vec score(int j, const OutcomeConfig& y, const Vec& w) const {
    const Vec v = layout.stacked(j, y, w);
    const NodeFit& nf = nodes[static_cast<std::size_t>(j)];
    const double resid = y[j] - logistic(nf.coef.dot(v));
    return nf.hessian_inv * (v * resid);
  }

  /// Score vectors of node j for all 2^q configurations, one per row.
  Mat score_table(int j, const Vec& w) const {
    const std::size_t count = config_count(layout.q);
    Mat out(static_cast<Eigen::Index>(count), layout.dim());
    for (std::size_t c = 0; c < count; ++c)
      out.row(static_cast<Eigen::Index>(c)) = score(j, OutcomeConfig(layout.q, static_cast<std::uint32_t>(c)), w).transpose();
    return out;
  }
};

struct SlFit {
  IsingParams theta;  // symmetrized estimate
  NodewiseFit nodes;  // unsymmetrized node estimates and hessians
};

namespace detail {

inline Mat node_design(std::span<const LabeledSample> data, const NodeLayout& lay, int j) {
  Mat v(static_cast<Eigen::Index>(data.size()), lay.dim());
  for (std::size_t i = 0; i < data.size(); ++i)
    v.row(static_cast<Eigen::Index>(i)) = lay.stacked(j, data[i].y, data[i].w).transpose();
  return v;
}

inline Vec node_response(std::span<const LabeledSample> data, int j) {
  Vec r(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) r[static_cast<Eigen::Index>(i)] = data[i].y[j];
  return r;
}

inline NodeLayout infer_layout(std::span<const LabeledSample> data) {
  if (data.empty()) throw EmptyLabeled("no labeled records");
  const NodeLayout lay{data.front().y.q(), static_cast<int>(data.front().w.size()) - 1};
  for (const auto& s : data) {
    if (s.y.q() != lay.q) throw DimensionMismatch("labeled records disagree on q");
    validate_adjustment(s.w, lay.d);
  }
  return lay;
}

// Re-raises the active exception with the node index prefixed, keeping its type.
template <class F>
auto with_node_context(int j, F&& f) -> decltype(f()) {
  const std::string prefix = "node " + std::to_string(j + 1) + ": ";
  try {
    return f();
  } catch (const NoConvergence& e) {
    throw NoConvergence(prefix + e.what());
  } catch (const SingularMatrix& e) {
    throw SingularMatrix(prefix + e.what());
  } catch (const DegenerateSurrogate& e) {
    throw DegenerateSurrogate(prefix + e.what());
  }
}

}  // namespace detail

/// Node-wise logistic regression of y_j on (y_{-j}, w), optionally weighted.
inline NodeFit fit_node_logistic(std::span<const LabeledSample> data, int j, double ridge = 0.0,
                                 const std::optional<Vec>& weights = std::nullopt, const SolverConfig& cfg = {}) {
  const NodeLayout lay = detail::infer_layout(data);
  if (j < 0 || j >= lay.q) throw InvalidArgument("fit_node_logistic: node index out of range");
  const GlmFit g = fit_logistic(detail::node_design(data, lay, j), detail::node_response(data, j), weights, ridge, cfg);
  return {g.coef, g.hessian, invert(g.hessian), g.iterations};
}

/// Averages theta_jk and theta_kj; node blocks are copied through.
inline IsingParams symmetrize(const NodeLayout& lay, const std::vector<Vec>& node_vectors) {
  IsingParams out(lay.q, lay.d);
  for (int j = 0; j < lay.q; ++j) {
    out.node_coefs[j] = node_vectors[j].segment(lay.node_offset(j), lay.d + 1);
    for (int k = j + 1; k < lay.q; ++k) {
      const double v = 0.5 * (node_vectors[j][lay.partner_pos(j, k)] + node_vectors[k][lay.partner_pos(k, j)]);
      out.pair_coefs(j, k) = v;
      out.pair_coefs(k, j) = v;
    }
  }
  return out;
}

inline NodewiseFit fit_nodewise(std::span<const LabeledSample> data, const std::optional<Vec>& weights = std::nullopt,
                                const SolverConfig& cfg = {}) {
  NodewiseFit fit;
  fit.layout = detail::infer_layout(data);
  if (static_cast<int>(data.size()) < fit.layout.q + fit.layout.d + 1)
    throw InvalidArgument("fit_sl: need at least q + d + 1 labeled records");
  for (int j = 0; j < fit.layout.q; ++j)
    fit.nodes.push_back(detail::with_node_context(j, [&] { return fit_node_logistic(data, j, 0.0, weights, cfg); }));
  return fit;
}

/// Supervised estimator: node-wise logistic fits, then pairwise averaging.
inline SlFit fit_sl(std::span<const LabeledSample> data, const SolverConfig& cfg = {}) {
  SlFit out;
  out.nodes = fit_nodewise(data, std::nullopt, cfg);
  std::vector<Vec> coefs;
  for (const auto& n : out.nodes.nodes) coefs.push_back(n.coef);
  out.theta = symmetrize(out.nodes.layout, coefs);
  return out;
}

/// Per-subject empirical scores of node j (n x dim). With weights, row i
/// carries w_i, matching the weighted estimating equation.
inline Mat score_rows(std::span<const LabeledSample> data, const NodewiseFit& fit, int j,
                      const std::optional<Vec>& weights = std::nullopt) {
  const NodeLayout& lay = fit.layout;
  const NodeFit& nf = fit.nodes.at(static_cast<std::size_t>(j));
  Mat rows(static_cast<Eigen::Index>(data.size()), lay.dim());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Vec v = lay.stacked(j, data[i].y, data[i].w);
    double resid = data[i].y[j] - logistic(nf.coef.dot(v));
    if (weights) resid *= (*weights)[static_cast<Eigen::Index>(i)];
    rows.row(static_cast<Eigen::Index>(i)) = (nf.hessian_inv * (v * resid)).transpose();
  }
  return rows;
}

/// Plug-in variances of the SL estimator, shaped like the parameters:
/// pair (j,k) holds (1/4)(1/n) sum_i (s_jk + s_kj)^2, node j coordinate c
/// holds (1/n) sum_i s_{j,c}^2. Standard errors are sqrt(value / n).
inline IsingParams var_sl(std::span<const LabeledSample> data, const NodewiseFit& fit,
                          const std::optional<Vec>& weights = std::nullopt) {
  const NodeLayout& lay = fit.layout;
  std::vector<Mat> scores;
  for (int j = 0; j < lay.q; ++j) scores.push_back(score_rows(data, fit, j, weights));
  IsingParams omega(lay.q, lay.d);
  for (int j = 0; j < lay.q; ++j) {
    for (int c = 0; c <= lay.d; ++c) omega.node_coefs[j][c] = scores[j].col(lay.node_offset(j) + c).squaredNorm() / static_cast<double>(data.size());
    for (int k = j + 1; k < lay.q; ++k) {
      const Vec sum = scores[j].col(lay.partner_pos(j, k)) + scores[k].col(lay.partner_pos(k, j));
      const double v = 0.25 * sum.squaredNorm() / static_cast<double>(data.size());
      omega.pair_coefs(j, k) = v;
      omega.pair_coefs(k, j) = v;
    }
  }
  return omega;
}

}  // namespace sciss
