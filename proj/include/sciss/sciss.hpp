#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "sciss/conditional.hpp"
#include "sciss/report.hpp"
#include "sciss/supervised.hpp"

namespace sciss {

// ---------------------------------------------------------------------------
// Influence table

/// Per-subject score and projection columns shared by SCISS, INTR and ES.
/// Labeled and unlabeled projections always come from one model object.
struct InfluenceTable {
  NodeLayout layout;
  std::vector<Vec> node_estimates;    // unsymmetrized SL node vectors
  std::vector<Mat> score;             // n x dim per node
  std::vector<Mat> proj_labeled;      // n x dim per node; empty for SL
  std::vector<Mat> proj_unlabeled;    // N x dim per node; empty for SL

  std::size_t n() const { return score.empty() ? 0 : static_cast<std::size_t>(score.front().rows()); }
  std::size_t big_n() const { return proj_unlabeled.empty() ? 0 : static_cast<std::size_t>(proj_unlabeled.front().rows()); }
  bool has_projection() const { return !proj_labeled.empty(); }

  // 1/2 (s_jk + s_kj - m_jk - m_kj) per labeled subject.
  Vec pair_contribution(int j, int k) const {
    const int a = layout.partner_pos(j, k);
    const int b = layout.partner_pos(k, j);
    Vec v = score[j].col(a) + score[k].col(b);
    if (has_projection()) v -= proj_labeled[j].col(a) + proj_labeled[k].col(b);
    return 0.5 * v;
  }

  // s_{j,c} - m_{j,c} for coordinate c of the node block.
  Vec node_contribution(int j, int c) const {
    const int a = layout.node_offset(j) + c;
    Vec v = score[j].col(a);
    if (has_projection()) v -= proj_labeled[j].col(a);
    return v;
  }

  // theta_check_j - mean_L m_j + mean_U m_j. Both means are taken relative
  // to the first labeled projection so a z-free projection cancels exactly.
  Vec corrected_node(int j) const {
    if (!has_projection()) return node_estimates[j];
    const Eigen::RowVectorXd ref = proj_labeled[j].row(0);
    const Eigen::RowVectorXd lab = (proj_labeled[j].rowwise() - ref).colwise().mean();
    const Eigen::RowVectorXd unl = (proj_unlabeled[j].rowwise() - ref).colwise().mean();
    return node_estimates[j] + (unl - lab).transpose();
  }
};

namespace detail {

// Per-node score tables cached on the last adjustment vector seen; with no
// adjustment covariates every subject shares one table.
class ScoreTableCache {
 public:
  explicit ScoreTableCache(const NodewiseFit& fit) : fit_(fit) {}
  const std::vector<Mat>& at(const Vec& w) {
    if (tables_.empty() || w != last_w_) {
      tables_.clear();
      for (int j = 0; j < fit_.layout.q; ++j) tables_.push_back(fit_.score_table(j, w));
      last_w_ = w;
    }
    return tables_;
  }

 private:
  const NodewiseFit& fit_;
  Vec last_w_;
  std::vector<Mat> tables_;
};

}  // namespace detail

inline InfluenceTable build_sl_table(std::span<const LabeledSample> labeled, const NodewiseFit& fit) {
  InfluenceTable t;
  t.layout = fit.layout;
  for (int j = 0; j < fit.layout.q; ++j) {
    t.node_estimates.push_back(fit.nodes[j].coef);
    t.score.push_back(score_rows(labeled, fit, j));
  }
  return t;
}

inline InfluenceTable build_influence_table(std::span<const LabeledSample> labeled,
                                            std::span<const UnlabeledSample> unlabeled, const NodewiseFit& fit,
                                            const ConditionalModel& model) {
  if (unlabeled.empty()) throw EmptyUnlabeled("SCISS needs at least one unlabeled record");
  InfluenceTable t = build_sl_table(labeled, fit);
  const int q = fit.layout.q;
  const int dim = fit.layout.dim();
  detail::ScoreTableCache cache(fit);
  auto project_into = [&](std::vector<Mat>& out, auto&& records) {
    out.assign(static_cast<std::size_t>(q), Mat(static_cast<Eigen::Index>(records.size()), dim));
    for (std::size_t i = 0; i < records.size(); ++i) {
      const CondDistribution dist = predict(model, records[i].x, records[i].w);
      const auto& tables = cache.at(records[i].w);
      for (int j = 0; j < q; ++j)
        out[static_cast<std::size_t>(j)].row(static_cast<Eigen::Index>(i)) = project_score(dist, tables[j]).transpose();
    }
  };
  project_into(t.proj_labeled, labeled);
  project_into(t.proj_unlabeled, unlabeled);
  return t;
}

/// (1/4) centered plug-in variance of s_jk + s_kj - m_jk - m_kj.
inline double var_sciss(const InfluenceTable& tab, int j, int k) {
  if (tab.n() < 2) throw InvalidArgument("var_sciss: need at least two labeled records");
  return plugin_variance(tab.pair_contribution(j, k));
}

/// Variance table of the estimator defined by `tab` (SL when it carries no
/// projections, SCISS otherwise).
inline IsingParams influence_variances(const InfluenceTable& tab) {
  const NodeLayout& lay = tab.layout;
  IsingParams omega(lay.q, lay.d);
  for (int j = 0; j < lay.q; ++j) {
    for (int c = 0; c <= lay.d; ++c) omega.node_coefs[j][c] = plugin_variance(tab.node_contribution(j, c));
    for (int k = j + 1; k < lay.q; ++k) {
      const double v = plugin_variance(tab.pair_contribution(j, k));
      omega.pair_coefs(j, k) = v;
      omega.pair_coefs(k, j) = v;
    }
  }
  return omega;
}

/// SCISS: theta_check_j,SL - mean_L m_j + mean_U m_j, then pairwise averaging.
inline EstimateReport fit_sciss(const InfluenceTable& tab, Method tag) {
  if (!tab.has_projection()) throw InvalidArgument("fit_sciss: influence table carries no projections");
  std::vector<Vec> corrected;
  for (int j = 0; j < tab.layout.q; ++j) corrected.push_back(tab.corrected_node(j));
  return make_report(tag, symmetrize(tab.layout, corrected), influence_variances(tab), tab.n(), tab.big_n());
}

inline EstimateReport fit_sciss(std::span<const LabeledSample> labeled, std::span<const UnlabeledSample> unlabeled,
                                const SlFit& sl, const ConditionalModel& model) {
  const Method tag = std::holds_alternative<AugParams>(model) ? Method::SCISS_Aug : Method::SCISS_PoS;
  EstimateReport r = fit_sciss(build_influence_table(labeled, unlabeled, sl.nodes, model), tag);
  if (const auto* aug = std::get_if<AugParams>(&model)) {
    for (const auto& wmsg : aug->warnings) r.diagnostics.notes.push_back("warning: " + wmsg);
    r.diagnostics.values["lambda"] = {aug->lambda};
  } else {
    for (const auto& c : std::get<PoSParams>(model).clamps) r.diagnostics.notes.push_back("clamp: " + c);
  }
  return r;
}

inline EstimateReport sl_report(std::span<const LabeledSample> labeled, const SlFit& sl) {
  return make_report(Method::SL, sl.theta, var_sl(labeled, sl.nodes), labeled.size());
}

// ---------------------------------------------------------------------------
// Intrinsic-efficient refinement

struct IntrinsicConfig {
  int max_iters = 4;
  // Relative Levenberg damping added to the Gauss-Newton normal matrix.
  double damping = 1e-8;
};

/// The variance objective for one pair (j, k) as a function of the
/// conditional model's flattened parameters.
class IntrinsicProblem {
 public:
  IntrinsicProblem(std::span<const LabeledSample> labeled, const NodewiseFit& fit, const InfluenceTable& tab,
                   ConditionalModel model, int j, int k)
      : labeled_(labeled), model_(std::move(model)), j_(j), k_(k) {
    if (j == k) throw InvalidArgument("IntrinsicProblem: target must be an off-diagonal pair");
    const NodeLayout& lay = fit.layout;
    const int a = lay.partner_pos(j, k);
    const int b = lay.partner_pos(k, j);
    target_ = tab.score[j].col(a) + tab.score[k].col(b);
    detail::ScoreTableCache cache(fit);
    for (const auto& s : labeled) weights_.push_back(combined_column(cache.at(s.w), a, b));
    fit_ = &fit;
  }

  int j() const { return j_; }
  int k() const { return k_; }
  const ConditionalModel& model() const { return model_; }

  // s_jk + s_kj - m_jk(eta) - m_kj(eta) per labeled subject.
  Vec residuals(const Vec& eta) const {
    const ConditionalModel m = with_parameters(model_, eta);
    Vec r(target_.size());
    for (std::size_t i = 0; i < labeled_.size(); ++i) {
      const CondDistribution dist = predict(m, labeled_[i].x, labeled_[i].w);
      r[static_cast<Eigen::Index>(i)] = target_[static_cast<Eigen::Index>(i)] - weights_[i].dot(dist.prob);
    }
    return r;
  }

  /// (1/4) centered plug-in variance of the residuals.
  double objective(const Vec& eta) const { return 0.25 * plugin_variance(residuals(eta)); }

  // Rows d(m_jk + m_kj)/d eta per labeled subject.
  Mat projection_jacobian(const Vec& eta) const {
    const ConditionalModel m = with_parameters(model_, eta);
    Mat jac(static_cast<Eigen::Index>(labeled_.size()), eta.size());
    for (std::size_t i = 0; i < labeled_.size(); ++i) {
      const CondDistribution dist = predict(m, labeled_[i].x, labeled_[i].w);
      const Mat g = log_weight_gradients(m, labeled_[i].x, labeled_[i].w);
      const Vec& a = weights_[i];
      const double abar = a.dot(dist.prob);
      const Vec coef = (dist.prob.array() * (a.array() - abar)).matrix();
      jac.row(static_cast<Eigen::Index>(i)) = coef.transpose() * g;
    }
    return jac;
  }

  Vec gradient(const Vec& eta) const {
    const Vec r = residuals(eta);
    const Mat jac = projection_jacobian(eta);
    const Vec rc = r.array() - r.mean();
    const Mat jc = jac.rowwise() - jac.colwise().mean();
    return -0.5 * jc.transpose() * rc / static_cast<double>(r.size());
  }

  /// 1/2 (mean_U - mean_L) of m_jk + m_kj at eta.
  double correction(const Vec& eta, std::span<const UnlabeledSample> unlabeled) const {
    const ConditionalModel m = with_parameters(model_, eta);
    detail::ScoreTableCache cache(*fit_);
    const NodeLayout& lay = fit_->layout;
    const int a = lay.partner_pos(j_, k_);
    const int b = lay.partner_pos(k_, j_);
    std::vector<double> lab, unl;
    for (std::size_t i = 0; i < labeled_.size(); ++i)
      lab.push_back(weights_[i].dot(predict(m, labeled_[i].x, labeled_[i].w).prob));
    for (const auto& u : unlabeled) unl.push_back(combined_column(cache.at(u.w), a, b).dot(predict(m, u.x, u.w).prob));
    const double ref = lab.front();
    double sl = 0.0, su = 0.0;
    for (double v : lab) sl += v - ref;
    for (double v : unl) su += v - ref;
    return 0.5 * (su / static_cast<double>(unl.size()) - sl / static_cast<double>(lab.size()));
  }

 private:
  static Vec combined_column(const std::vector<Mat>& tables, int a, int b, int j, int k) {
    return tables[j].col(a) + tables[k].col(b);
  }
  Vec combined_column(const std::vector<Mat>& tables, int a, int b) const {
    return combined_column(tables, a, b, j_, k_);
  }

  std::span<const LabeledSample> labeled_;
  ConditionalModel model_;
  int j_, k_;
  Vec target_;
  std::vector<Vec> weights_;  // per subject: S_j(.)[jk] + S_k(.)[kj] over configs
  const NodewiseFit* fit_ = nullptr;
};

struct IntrinsicResult {
  int j = 0, k = 0;
  Vec eta;                          // accepted parameters
  std::vector<double> objective;    // objective at each accepted iterate, starting at the MLE
  double estimate = 0.0;            // refined theta_jk
  double variance = 0.0;            // objective at the accepted eta (scaled variance)
};

/// Safe Gauss-Newton descent on the linearized variance objective, starting
/// at the model MLE; a step is kept only if the exact objective strictly
/// decreases, and at most `max_iters` steps are taken.
inline IntrinsicResult fit_intr(std::span<const LabeledSample> labeled, std::span<const UnlabeledSample> unlabeled,
                                const NodewiseFit& fit, const InfluenceTable& tab, const ConditionalModel& model, int j,
                                int k, const IntrinsicConfig& cfg = {}) {
  if (unlabeled.empty()) throw EmptyUnlabeled("INTR needs at least one unlabeled record");
  const IntrinsicProblem prob(labeled, fit, tab, model, j, k);
  IntrinsicResult out;
  out.j = j;
  out.k = k;
  out.eta = parameter_vector(model);
  double current = prob.objective(out.eta);
  out.objective.push_back(current);
  for (int it = 0; it < cfg.max_iters; ++it) {
    const Vec r = prob.residuals(out.eta);
    const Mat jac = prob.projection_jacobian(out.eta);
    const Vec rc = r.array() - r.mean();
    const Mat jc = jac.rowwise() - jac.colwise().mean();
    Mat normal = jc.transpose() * jc;
    const double scale = normal.trace() / static_cast<double>(normal.rows());
    if (!(scale > 0.0)) break;
    normal.diagonal().array() += cfg.damping * scale;
    Vec step;
    try {
      step = solve_linear(normal, jc.transpose() * rc);
    } catch (const SingularMatrix&) {
      break;
    }
    const Vec candidate = out.eta + step;
    double next;
    try {
      next = prob.objective(candidate);
    } catch (const NumericalUnderflow&) {
      break;
    }
    if (!(next < current)) break;
    out.eta = candidate;
    current = next;
    out.objective.push_back(current);
  }
  const NodeLayout& lay = fit.layout;
  const double sl_pair = 0.5 * (fit.nodes[j].coef[lay.partner_pos(j, k)] + fit.nodes[k].coef[lay.partner_pos(k, j)]);
  out.estimate = sl_pair + prob.correction(out.eta, unlabeled);
  out.variance = current;
  return out;
}

/// INTR over every pair; node coefficients are carried over from SCISS.
inline EstimateReport fit_intr_report(std::span<const LabeledSample> labeled, std::span<const UnlabeledSample> unlabeled,
                                      const NodewiseFit& fit, const InfluenceTable& tab, const ConditionalModel& model,
                                      const IntrinsicConfig& cfg = {}) {
  const EstimateReport base = fit_sciss(tab, Method::INTR);
  IsingParams theta = base.theta;
  IsingParams omega = influence_variances(tab);
  Diagnostics diag;
  diag.notes.push_back(std::string("base model: ") + (std::holds_alternative<AugParams>(model) ? "Aug" : "PoS"));
  diag.notes.push_back("node coefficients carried over from SCISS");
  for (int j = 0; j < fit.layout.q; ++j)
    for (int k = j + 1; k < fit.layout.q; ++k) {
      const IntrinsicResult r = fit_intr(labeled, unlabeled, fit, tab, model, j, k, cfg);
      theta.pair_coefs(j, k) = theta.pair_coefs(k, j) = r.estimate;
      omega.pair_coefs(j, k) = omega.pair_coefs(k, j) = r.variance;
      diag.values[pair_key("objective", j, k)] = r.objective;
      diag.values[pair_key("accepted_steps", j, k)] = {static_cast<double>(r.objective.size() - 1)};
    }
  EstimateReport out = make_report(Method::INTR, theta, omega, tab.n(), tab.big_n());
  out.diagnostics = std::move(diag);
  return out;
}

// ---------------------------------------------------------------------------
// Ensemble

/// Euclidean projection onto the probability simplex.
inline Vec project_to_simplex(const Vec& v) {
  const Eigen::Index m = v.size();
  std::vector<double> u(v.data(), v.data() + m);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, tau = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    cum += u[static_cast<std::size_t>(i)];
    const double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (u[static_cast<std::size_t>(i)] - t > 0.0) tau = t;
  }
  return (v.array() - tau).max(0.0).matrix();
}

/// Unconstrained minimum-variance weights Lambda^{-1} 1 / (1^T Lambda^{-1} 1).
inline Vec ensemble_weights(const Mat& lambda) {
  const Vec raw = solve_linear(lambda, Vec::Ones(lambda.rows()));
  return raw / raw.sum();
}

// Plug-in covariance of influence columns, each centered by its own mean.
inline Mat influence_covariance(const std::vector<Vec>& cols) {
  const auto m = static_cast<Eigen::Index>(cols.size());
  const Eigen::Index n = cols.front().size();
  Mat centered(n, m);
  for (Eigen::Index c = 0; c < m; ++c) centered.col(c) = cols[static_cast<std::size_t>(c)].array() - cols[static_cast<std::size_t>(c)].mean();
  return centered.transpose() * centered / static_cast<double>(n);
}

struct Allocation {
  Vec weights;                      // over all inputs; dropped inputs get 0
  double variance = 0.0;            // alpha^T Lambda alpha
  std::vector<int> dropped;
};

/// Simplex-constrained minimum-variance allocation. A singular covariance
/// drops the input most correlated with the rest and retries.
inline Allocation allocate(const std::vector<Vec>& cols) {
  const int m = static_cast<int>(cols.size());
  const Mat full = influence_covariance(cols);
  std::vector<int> active(static_cast<std::size_t>(m));
  std::iota(active.begin(), active.end(), 0);
  Allocation out;
  out.weights = Vec::Zero(m);
  while (true) {
    const auto a = static_cast<Eigen::Index>(active.size());
    Mat sub(a, a);
    for (Eigen::Index r = 0; r < a; ++r)
      for (Eigen::Index c = 0; c < a; ++c) sub(r, c) = full(active[static_cast<std::size_t>(r)], active[static_cast<std::size_t>(c)]);
    if (a == 1) {
      out.weights[active.front()] = 1.0;
      out.variance = sub(0, 0);
      return out;
    }
    try {
      const Vec alpha = project_to_simplex(ensemble_weights(sub));
      for (Eigen::Index r = 0; r < a; ++r) out.weights[active[static_cast<std::size_t>(r)]] = alpha[r];
      out.variance = alpha.dot(sub * alpha);
      return out;
    } catch (const SingularMatrix&) {
      // Drop the input with the largest absolute correlation to any other;
      // ties go to the later input.
      int worst = static_cast<int>(a) - 1;
      double worst_corr = -1.0;
      for (Eigen::Index r = 0; r < a; ++r) {
        double best = 0.0;
        for (Eigen::Index c = 0; c < a; ++c) {
          if (c == r) continue;
          const double denom = std::sqrt(sub(r, r) * sub(c, c));
          const double corr = denom > 0.0 ? std::abs(sub(r, c)) / denom : 1.0;
          best = std::max(best, corr);
        }
        if (best >= worst_corr) {
          worst_corr = best;
          worst = static_cast<int>(r);
        }
      }
      out.dropped.push_back(active[static_cast<std::size_t>(worst)]);
      active.erase(active.begin() + worst);
    }
  }
}

/// Ensemble of estimators sharing the same labeled sample. Each input is a
/// report plus its influence table (an SL table has no projections).
inline EstimateReport fit_ensemble(const std::vector<const EstimateReport*>& reports,
                                   const std::vector<const InfluenceTable*>& tables) {
  if (reports.size() < 2 || reports.size() != tables.size())
    throw InvalidArgument("fit_ensemble: need at least two estimators, each with an influence table");
  const NodeLayout lay = tables.front()->layout;
  const std::size_t n = tables.front()->n();
  IsingParams theta(lay.q, lay.d), omega(lay.q, lay.d);
  Diagnostics diag;
  std::string inputs = "inputs:";
  for (const auto* r : reports) inputs += " " + to_string(r->method);
  diag.notes.push_back(inputs);

  auto combine = [&](const std::vector<Vec>& cols, auto&& value_of, const std::string& key) {
    const Allocation a = allocate(cols);
    double est = 0.0;
    for (std::size_t m = 0; m < reports.size(); ++m) est += a.weights[static_cast<Eigen::Index>(m)] * value_of(*reports[m]);
    diag.values["alpha" + key] = std::vector<double>(a.weights.data(), a.weights.data() + a.weights.size());
    for (int dropped : a.dropped)
      diag.notes.push_back("singular covariance at " + key + ": dropped " + to_string(reports[static_cast<std::size_t>(dropped)]->method));
    return std::pair{est, a.variance};
  };

  for (int j = 0; j < lay.q; ++j) {
    for (int c = 0; c <= lay.d; ++c) {
      std::vector<Vec> cols;
      for (const auto* t : tables) cols.push_back(t->node_contribution(j, c));
      const auto [est, var] = combine(cols, [&](const EstimateReport& r) { return r.theta.node_coefs[j][c]; },
                                      "[" + std::to_string(j + 1) + "," + std::to_string(j + 1) + "," + std::to_string(c) + "]");
      theta.node_coefs[j][c] = est;
      omega.node_coefs[j][c] = var;
    }
    for (int k = j + 1; k < lay.q; ++k) {
      std::vector<Vec> cols;
      for (const auto* t : tables) cols.push_back(t->pair_contribution(j, k));
      const auto [est, var] = combine(cols, [&](const EstimateReport& r) { return r.theta.pair_coefs(j, k); },
                                      "[" + std::to_string(j + 1) + "," + std::to_string(k + 1) + "]");
      theta.pair_coefs(j, k) = theta.pair_coefs(k, j) = est;
      omega.pair_coefs(j, k) = omega.pair_coefs(k, j) = var;
    }
  }
  EstimateReport out = make_report(Method::ES, theta, omega, n, tables.front()->big_n());
  out.diagnostics = std::move(diag);
  return out;
}

// ---------------------------------------------------------------------------

/// Two-sided normal p-value for theta_A,jk - theta_B,jk using independent
/// standard errors. j == k compares the node intercepts.
inline double two_sample_contrast(const EstimateReport& a, const EstimateReport& b, int j, int k) {
  if (a.theta.q != b.theta.q) throw DimensionMismatch("two_sample_contrast: reports have different q");
  if (j < 0 || k < 0 || j >= a.theta.q || k >= a.theta.q) throw InvalidArgument("two_sample_contrast: index out of range");
  const double ta = j == k ? a.theta.node_coefs[j][0] : a.theta.pair_coefs(j, k);
  const double tb = j == k ? b.theta.node_coefs[j][0] : b.theta.pair_coefs(j, k);
  const double sa = j == k ? a.se.node_coefs[j][0] : a.se.pair_coefs(j, k);
  const double sb = j == k ? b.se.node_coefs[j][0] : b.se.pair_coefs(j, k);
  const double denom = std::sqrt(sa * sa + sb * sb);
  if (!(denom > 0.0)) return ta == tb ? 1.0 : 0.0;
  return std::erfc(std::abs(ta - tb) / denom / std::sqrt(2.0));
}

}  // namespace sciss
