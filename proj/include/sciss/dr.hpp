#pragma once

#include <span>
#include <vector>

#include "sciss/report.hpp"
#include "sciss/supervised.hpp"

namespace sciss {

struct DrOptions {
  bool log1p_x = false;  // count features: regress on log(x + 1)
  SolverConfig solver{};
};

struct DrWeights {
  Vec membership_coef;  // intercept, then slopes on x
  Vec weights;          // per labeled record, mean 1
  double raw_mean = 0.0;
};

/// Pooled logistic regression of membership (0 labeled, 1 unlabeled) on
/// (1, x); labeled records get exp(slope^T x) normalized to mean one.
inline DrWeights density_ratio_weights(std::span<const LabeledSample> labeled,
                                       std::span<const UnlabeledSample> unlabeled, const DrOptions& opts = {}) {
  if (labeled.empty()) throw EmptyLabeled("DR needs labeled records");
  if (unlabeled.empty()) throw EmptyUnlabeled("DR needs unlabeled records");
  const Eigen::Index p = labeled.front().x.size();
  const auto n = static_cast<Eigen::Index>(labeled.size());
  const auto big_n = static_cast<Eigen::Index>(unlabeled.size());
  auto feat = [&](const Vec& x) {
    if (x.size() != p) throw DimensionMismatch("DR: records disagree on p");
    return opts.log1p_x ? log1p_features(x) : x;
  };
  Mat design(n + big_n, p + 1);
  Vec member(n + big_n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    design.row(i).tail(p) = feat(labeled[static_cast<std::size_t>(i)].x).transpose();
    member[i] = 0.0;
  }
  for (Eigen::Index i = 0; i < big_n; ++i) {
    design(n + i, 0) = 1.0;
    design.row(n + i).tail(p) = feat(unlabeled[static_cast<std::size_t>(i)].x).transpose();
    member[n + i] = 1.0;
  }
  DrWeights out;
  out.membership_coef = fit_logistic(design, member, std::nullopt, 0.0, opts.solver).coef;
  const Vec slope = out.membership_coef.tail(p);
  Vec lin = design.topRows(n).rightCols(p) * slope;
  // Shift before exponentiating; normalization cancels the constant.
  const double shift = lin.maxCoeff();
  out.weights = (lin.array() - shift).exp().matrix();
  out.raw_mean = out.weights.mean() * std::exp(shift);
  out.weights /= out.weights.mean();
  return out;
}

/// Node-wise logistic fits weighted by `weights`, symmetrized, with a
/// weighted sandwich variance.
inline EstimateReport fit_weighted_sl(std::span<const LabeledSample> labeled, const Vec& weights, Method tag,
                                      std::size_t big_n = 0, const SolverConfig& cfg = {}) {
  const NodewiseFit fit = fit_nodewise(labeled, weights, cfg);
  std::vector<Vec> coefs;
  for (const auto& nf : fit.nodes) coefs.push_back(nf.coef);
  return make_report(tag, symmetrize(fit.layout, coefs), var_sl(labeled, fit, weights), labeled.size(), big_n);
}

inline EstimateReport fit_dr(std::span<const LabeledSample> labeled, std::span<const UnlabeledSample> unlabeled,
                             const DrOptions& opts = {}) {
  const DrWeights dw = density_ratio_weights(labeled, unlabeled, opts);
  EstimateReport r = fit_weighted_sl(labeled, dw.weights, Method::DR, unlabeled.size(), opts.solver);
  r.diagnostics.values["membership_coef"] = std::vector<double>(dw.membership_coef.data(),
                                                                dw.membership_coef.data() + dw.membership_coef.size());
  r.diagnostics.values["weight_range"] = {dw.weights.minCoeff(), dw.weights.maxCoeff()};
  r.diagnostics.values["raw_weight_mean"] = {dw.raw_mean};
  return r;
}

}  // namespace sciss
