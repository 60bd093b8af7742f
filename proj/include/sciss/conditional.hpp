#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sciss/dataset.hpp"
#include "sciss/glm.hpp"
#include "sciss/supervised.hpp"

namespace sciss {

/// Conditional distribution P(y | z) over all 2^q configurations.
struct CondDistribution {
  int q = 0;
  Vec prob;

  double operator[](std::uint32_t c) const { return prob[static_cast<Eigen::Index>(c)]; }
};

inline CondDistribution distribution_from_log_weights(int q, Vec logw) {
  for (Eigen::Index c = 0; c < logw.size(); ++c)
    if (std::isnan(logw[c]) || logw[c] == std::numeric_limits<double>::infinity())
      throw NumericalUnderflow("conditional model produced a non-finite log-weight");
  if (!softmax_inplace(logw)) throw NumericalUnderflow("all configurations have zero conditional weight");
  return {q, std::move(logw)};
}

inline int pair_count(int q) { return q * (q - 1) / 2; }

// Index of the unordered pair (j, k), j != k, in row-major upper-triangle order.
inline int pair_index(int q, int j, int k) {
  if (j > k) std::swap(j, k);
  return j * q - j * (j + 1) / 2 + (k - j - 1);
}

// ---------------------------------------------------------------------------
// Augmented Ising model
//   log P(y | z) = sum_j eta_jj(z) y_j + sum_{j<k} eta_jk(x) y_j y_k - log Z
// with eta_jj(z) = (x^T, w^T) eta_jj and eta_jk(x) = x^T eta_jk.

struct AugOptions {
  std::optional<double> lambda;  // ridge; defaults to n^{-3/4}
  bool log1p_x = false;          // fit and predict on log(x + 1)
  SolverConfig solver{};
};

struct AugParams {
  int q = 0;
  int p = 0;
  int d = 0;
  bool log1p_x = false;
  std::vector<Vec> node_coefs;  // q vectors of length p + d + 1
  std::vector<Vec> pair_coefs;  // one shared vector of length p per unordered pair
  double lambda = 0.0;
  std::vector<std::string> warnings;

  const Vec& pair(int j, int k) const { return pair_coefs[static_cast<std::size_t>(pair_index(q, j, k))]; }
  Vec& pair(int j, int k) { return pair_coefs[static_cast<std::size_t>(pair_index(q, j, k))]; }
  int parameter_count() const { return q * (p + d + 1) + pair_count(q) * p; }

  Vec features(const Vec& x) const { return log1p_x ? log1p_features(x) : x; }
};

namespace detail {

// Node j's regression vector psi = (x y_1, ..., (x, w), ..., x y_q) for the
// augmented model; partner blocks have width p, the node block p + d + 1.
struct AugLayout {
  int q, p, d;
  int dim() const { return (q - 1) * p + p + d + 1; }
  int node_offset(int j) const { return j * p; }
  int partner_offset(int j, int k) const { return k < j ? k * p : k * p + d + 1; }
};

inline Vec aug_regressor(const AugLayout& lay, int j, const OutcomeConfig& y, const Vec& x, const Vec& w) {
  Vec psi = Vec::Zero(lay.dim());
  for (int k = 0; k < lay.q; ++k)
    if (k != j && y[k]) psi.segment(lay.partner_offset(j, k), lay.p) = x;
  psi.segment(lay.node_offset(j), lay.p) = x;
  psi.segment(lay.node_offset(j) + lay.p, lay.d + 1) = w;
  return psi;
}

}  // namespace detail

/// Fits the augmented Ising model by node-wise ridge-penalized logistic
/// regressions, then averages the two estimates of each pair block.
inline AugParams fit_aug(std::span<const LabeledSample> data, const AugOptions& opts = {}) {
  if (data.empty()) throw EmptyLabeled("fit_aug: no labeled records");
  AugParams out;
  out.q = data.front().y.q();
  out.p = static_cast<int>(data.front().x.size());
  out.d = static_cast<int>(data.front().w.size()) - 1;
  out.log1p_x = opts.log1p_x;
  const auto n = static_cast<double>(data.size());
  out.lambda = opts.lambda.value_or(std::pow(n, -0.75));
  if (out.lambda < 0.0) throw InvalidArgument("fit_aug: lambda must be >= 0");
  if (out.p < 1) throw DimensionMismatch("fit_aug: need at least one auxiliary feature");
  const detail::AugLayout lay{out.q, out.p, out.d};
  if (out.parameter_count() > n / 5.0)
    out.warnings.push_back("augmented model has " + std::to_string(out.parameter_count()) +
                           " parameters for n = " + std::to_string(data.size()));

  std::vector<Vec> xs;
  xs.reserve(data.size());
  for (const auto& s : data) {
    if (s.y.q() != out.q || s.x.size() != out.p || s.w.size() != out.d + 1)
      throw DimensionMismatch("fit_aug: inconsistent record shapes");
    xs.push_back(out.features(s.x));
  }

  std::vector<Vec> node_vectors;
  for (int j = 0; j < out.q; ++j) {
    Mat design(static_cast<Eigen::Index>(data.size()), lay.dim());
    Vec resp(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
      design.row(static_cast<Eigen::Index>(i)) = detail::aug_regressor(lay, j, data[i].y, xs[i], data[i].w).transpose();
      resp[static_cast<Eigen::Index>(i)] = data[i].y[j];
    }
    node_vectors.push_back(detail::with_node_context(j, [&] {
      return fit_logistic(design, resp, std::nullopt, out.lambda, opts.solver).coef;
    }));
  }

  for (int j = 0; j < out.q; ++j) out.node_coefs.push_back(node_vectors[j].segment(lay.node_offset(j), out.p + out.d + 1));
  out.pair_coefs.assign(static_cast<std::size_t>(pair_count(out.q)), Vec::Zero(out.p));
  for (int j = 0; j < out.q; ++j)
    for (int k = j + 1; k < out.q; ++k)
      out.pair(j, k) = 0.5 * (node_vectors[j].segment(lay.partner_offset(j, k), out.p) +
                              node_vectors[k].segment(lay.partner_offset(k, j), out.p));
  return out;
}

inline Vec log_weights(const AugParams& m, const Vec& x, const Vec& w) {
  require_enumerable(m.q);
  if (x.size() != m.p || w.size() != m.d + 1) throw DimensionMismatch("augmented model: feature length mismatch");
  const Vec fx = m.features(x);
  Vec node(m.q);
  for (int j = 0; j < m.q; ++j)
    node[j] = m.node_coefs[j].head(m.p).dot(fx) + m.node_coefs[j].tail(m.d + 1).dot(w);
  Vec pairs(pair_count(m.q));
  for (int j = 0; j < m.q; ++j)
    for (int k = j + 1; k < m.q; ++k) pairs[pair_index(m.q, j, k)] = m.pair(j, k).dot(fx);

  const std::size_t count = config_count(m.q);
  Vec logw(static_cast<Eigen::Index>(count));
  for (std::size_t c = 0; c < count; ++c) {
    double s = 0.0;
    for (int j = 0; j < m.q; ++j) {
      if (!((c >> j) & 1u)) continue;
      s += node[j];
      for (int k = j + 1; k < m.q; ++k)
        if ((c >> k) & 1u) s += pairs[pair_index(m.q, j, k)];
    }
    logw[static_cast<Eigen::Index>(c)] = s;
  }
  return logw;
}

inline CondDistribution predict_aug(const AugParams& m, const Vec& x, const Vec& w) {
  return distribution_from_log_weights(m.q, log_weights(m, x, w));
}

// Flattened parameter order: node blocks eta_11..eta_qq, then pair blocks in
// pair_index order.
inline Vec parameter_vector(const AugParams& m) {
  Vec v(m.parameter_count());
  Eigen::Index at = 0;
  for (const auto& b : m.node_coefs) {
    v.segment(at, b.size()) = b;
    at += b.size();
  }
  for (const auto& b : m.pair_coefs) {
    v.segment(at, b.size()) = b;
    at += b.size();
  }
  return v;
}

inline AugParams with_parameters(AugParams m, const Vec& v) {
  if (v.size() != m.parameter_count()) throw DimensionMismatch("augmented model: parameter vector length mismatch");
  Eigen::Index at = 0;
  for (auto& b : m.node_coefs) {
    b = v.segment(at, b.size());
    at += b.size();
  }
  for (auto& b : m.pair_coefs) {
    b = v.segment(at, b.size());
    at += b.size();
  }
  return m;
}

/// d log-weight(config) / d eta, one row per configuration.
inline Mat log_weight_gradients(const AugParams& m, const Vec& x, const Vec& w) {
  const Vec fx = m.features(x);
  const std::size_t count = config_count(m.q);
  Mat g = Mat::Zero(static_cast<Eigen::Index>(count), m.parameter_count());
  const int node_width = m.p + m.d + 1;
  const int pair_base = m.q * node_width;
  for (std::size_t c = 0; c < count; ++c) {
    const auto r = static_cast<Eigen::Index>(c);
    for (int j = 0; j < m.q; ++j) {
      if (!((c >> j) & 1u)) continue;
      g.row(r).segment(j * node_width, m.p) = fx.transpose();
      g.row(r).segment(j * node_width + m.p, m.d + 1) = w.transpose();
      for (int k = j + 1; k < m.q; ++k)
        if ((c >> k) & 1u) g.row(r).segment(pair_base + pair_index(m.q, j, k) * m.p, m.p) = fx.transpose();
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Post-hoc surrogate model
//   P(y | z) ∝ P(y | w; theta) prod_j f(x_j | y_j, w; xi_j)
// with one surrogate per outcome (p = q).

enum class SurrogateFamily { gaussian, logistic, poisson };

inline std::string to_string(SurrogateFamily f) {
  switch (f) {
    case SurrogateFamily::gaussian: return "gaussian";
    case SurrogateFamily::logistic: return "logistic";
    case SurrogateFamily::poisson: return "poisson";
  }
  return "?";
}

inline SurrogateFamily parse_family(const std::string& s) {
  if (s == "gaussian") return SurrogateFamily::gaussian;
  if (s == "logistic" || s == "binary") return SurrogateFamily::logistic;
  if (s == "poisson") return SurrogateFamily::poisson;
  throw InvalidArgument("unknown surrogate family '" + s + "'");
}

// Log-link clamp for surrogate strata whose MLE runs off to +-infinity.
inline constexpr double kLinkClamp = 15.0;

struct PoSParams {
  IsingParams theta;
  std::vector<SurrogateFamily> families;
  // xi_j over (w^T, y_j): d + 1 adjustment coefficients then the y_j effect.
  std::vector<Vec> xi;
  // Residual variance for gaussian surrogates (NaN for other families).
  std::vector<double> sigma2;
  std::vector<std::string> clamps;

  int q() const { return theta.q; }
  int d() const { return theta.d; }
  int parameter_count() const {
    int n = theta.q * (theta.d + 1) + pair_count(theta.q);
    for (auto f : families) n += theta.d + 2 + (f == SurrogateFamily::gaussian ? 1 : 0);
    return n;
  }
};

namespace detail {

inline double surrogate_linear(const Vec& xi, const Vec& w, int y) {
  const auto d1 = w.size();
  return xi.head(d1).dot(w) + xi[d1] * y;
}

// log f(x | y, w) and d log f / d (linear predictor); for gaussian also
// d log f / d log(sigma^2).
struct SurrogateTerm {
  double logf;
  double dlinear;
  double dlogvar;
};

inline SurrogateTerm surrogate_term(SurrogateFamily fam, double x, double a, double sigma2) {
  switch (fam) {
    case SurrogateFamily::gaussian: {
      const double r = x - a;
      constexpr double kLog2Pi = 1.8378770664093454836;
      return {-0.5 * (kLog2Pi + std::log(sigma2)) - r * r / (2.0 * sigma2), r / sigma2, -0.5 + r * r / (2.0 * sigma2)};
    }
    case SurrogateFamily::logistic:
      return {x * a - log1p_exp(a), x - logistic(a), 0.0};
    case SurrogateFamily::poisson: {
      const double mu = std::exp(a);
      return {x * a - mu - std::lgamma(x + 1.0), x - mu, 0.0};
    }
  }
  return {0.0, 0.0, 0.0};
}

inline bool is_count(double v) { return v >= 0.0 && std::floor(v) == v && std::isfinite(v); }

// Fits one stratum-aware GLM surrogate. When every x in a y-stratum sits at
// the boundary of the family's support (all 0 for poisson, all 0 or all 1
// for logistic) that stratum's log-link intercept is pinned at +-15 and the
// adjustment coefficients come from the other stratum.
inline Vec fit_glm_surrogate(SurrogateFamily fam, const Mat& wmat, const Vec& x, const Vec& y, int node,
                             std::vector<std::string>& clamps, const SolverConfig& cfg) {
  const Eigen::Index n = wmat.rows();
  const Eigen::Index d1 = wmat.cols();
  struct Stratum {
    std::vector<Eigen::Index> rows;
    bool degenerate = false;
    double pinned = 0.0;
  } strata[2];
  for (Eigen::Index i = 0; i < n; ++i) strata[y[i] > 0.5 ? 1 : 0].rows.push_back(i);
  for (int s = 0; s < 2; ++s) {
    if (strata[s].rows.empty())
      throw DegenerateSurrogate("surrogate x" + std::to_string(node + 1) + ": no labeled records with y" +
                                std::to_string(node + 1) + " = " + std::to_string(s));
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (auto i : strata[s].rows) {
      lo = std::min(lo, x[i]);
      hi = std::max(hi, x[i]);
    }
    if (fam == SurrogateFamily::poisson && hi == 0.0) {
      strata[s].degenerate = true;
      strata[s].pinned = -kLinkClamp;
    } else if (fam == SurrogateFamily::logistic && (hi == 0.0 || lo == 1.0)) {
      strata[s].degenerate = true;
      strata[s].pinned = hi == 0.0 ? -kLinkClamp : kLinkClamp;
    }
  }

  auto fit_rows = [&](const std::vector<Eigen::Index>* subset, bool with_y) -> Vec {
    const Eigen::Index m = subset ? static_cast<Eigen::Index>(subset->size()) : n;
    Mat design(m, d1 + (with_y ? 1 : 0));
    Vec resp(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      const Eigen::Index i = subset ? (*subset)[static_cast<std::size_t>(r)] : r;
      design.row(r).head(d1) = wmat.row(i);
      if (with_y) design(r, d1) = y[i];
      resp[r] = x[i];
    }
    return fam == SurrogateFamily::poisson ? fit_poisson(design, resp, cfg).coef
                                           : fit_logistic(design, resp, std::nullopt, 0.0, cfg).coef;
  };

  Vec xi = Vec::Zero(d1 + 1);
  if (!strata[0].degenerate && !strata[1].degenerate) return fit_rows(nullptr, true);

  const std::string tag = "x" + std::to_string(node + 1) + " (" + to_string(fam) + ")";
  if (strata[0].degenerate && strata[1].degenerate) {
    xi[0] = strata[0].pinned;
    xi[d1] = strata[1].pinned - strata[0].pinned;
    clamps.push_back(tag + ": both y strata at the support boundary; log-link pinned at +-15");
  } else if (strata[0].degenerate) {
    const Vec beta = fit_rows(&strata[1].rows, false);
    xi.head(d1) = beta;
    xi[0] = strata[0].pinned;
    xi[d1] = beta[0] - strata[0].pinned;
    clamps.push_back(tag + ": y = 0 stratum at the support boundary; log-link intercept pinned at " +
                     std::to_string(strata[0].pinned));
  } else {
    const Vec beta = fit_rows(&strata[0].rows, false);
    xi.head(d1) = beta;
    xi[d1] = strata[1].pinned - beta[0];
    clamps.push_back(tag + ": y = 1 stratum at the support boundary; log-link intercept pinned at " +
                     std::to_string(strata[1].pinned));
  }
  return xi;
}

}  // namespace detail

/// Fits the per-surrogate models x_j | (y_j, w) on labeled data; theta is
/// taken as given (the SL estimate).
inline PoSParams fit_pos(std::span<const LabeledSample> data, const IsingParams& theta_sl,
                         const std::vector<SurrogateFamily>& families, const SolverConfig& cfg = {}) {
  if (data.empty()) throw EmptyLabeled("fit_pos: no labeled records");
  const int q = theta_sl.q;
  const int d = theta_sl.d;
  if (static_cast<int>(families.size()) != q) throw DimensionMismatch("fit_pos: need one family per outcome");
  PoSParams out;
  out.theta = theta_sl;
  out.families = families;
  const auto n = static_cast<Eigen::Index>(data.size());
  Mat wmat(n, d + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = data[static_cast<std::size_t>(i)];
    if (s.x.size() != q) throw DimensionMismatch("fit_pos: the surrogate model needs p = q");
    if (s.y.q() != q || s.w.size() != d + 1) throw DimensionMismatch("fit_pos: record shape mismatch");
    wmat.row(i) = s.w.transpose();
  }
  for (int j = 0; j < q; ++j) {
    Vec x(n), y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      x[i] = data[static_cast<std::size_t>(i)].x[j];
      y[i] = data[static_cast<std::size_t>(i)].y[j];
    }
    const SurrogateFamily fam = families[static_cast<std::size_t>(j)];
    if (fam == SurrogateFamily::logistic && !(x.array() == 0.0 || x.array() == 1.0).all())
      throw InvalidArgument("fit_pos: logistic surrogate x" + std::to_string(j + 1) + " must be binary");
    if (fam == SurrogateFamily::poisson)
      for (Eigen::Index i = 0; i < n; ++i)
        if (!detail::is_count(x[i]))
          throw InvalidArgument("fit_pos: poisson surrogate x" + std::to_string(j + 1) + " must be a nonnegative integer");

    if (fam == SurrogateFamily::gaussian) {
      Mat design(n, d + 2);
      design.leftCols(d + 1) = wmat;
      design.col(d + 1) = y;
      if (y.minCoeff() == y.maxCoeff())
        throw DegenerateSurrogate("surrogate x" + std::to_string(j + 1) + ": y" + std::to_string(j + 1) +
                                  " is constant in the labeled data");
      const Vec coef = solve_linear(design.transpose() * design, design.transpose() * x);
      const double s2 = (x - design * coef).squaredNorm() / static_cast<double>(n);
      if (!(s2 > 0.0)) throw DegenerateSurrogate("surrogate x" + std::to_string(j + 1) + ": zero residual variance");
      out.xi.push_back(coef);
      out.sigma2.push_back(s2);
    } else {
      out.xi.push_back(detail::with_node_context(j, [&] { return detail::fit_glm_surrogate(fam, wmat, x, y, j, out.clamps, cfg); }));
      out.sigma2.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  return out;
}

inline Vec log_weights(const PoSParams& m, const Vec& x, const Vec& w) {
  const int q = m.q();
  require_enumerable(q);
  if (x.size() != q || w.size() != m.d() + 1) throw DimensionMismatch("surrogate model: feature length mismatch");
  // log f(x_j | y_j = 0 / 1)
  Eigen::Matrix<double, Eigen::Dynamic, 2> lf(q, 2);
  for (int j = 0; j < q; ++j)
    for (int y = 0; y < 2; ++y)
      lf(j, y) = detail::surrogate_term(m.families[j], x[j], detail::surrogate_linear(m.xi[j], w, y), m.sigma2[j]).logf;
  Vec logw = log_weights(m.theta, w);
  for (Eigen::Index c = 0; c < logw.size(); ++c)
    for (int j = 0; j < q; ++j) logw[c] += lf(j, (c >> j) & 1);
  return logw;
}

inline CondDistribution predict_pos(const PoSParams& m, const Vec& x, const Vec& w) {
  return distribution_from_log_weights(m.q(), log_weights(m, x, w));
}

// Flattened parameter order: theta node blocks, theta pairs (pair_index
// order), then per surrogate xi_j followed by log(sigma_j^2) if gaussian.
inline Vec parameter_vector(const PoSParams& m) {
  Vec v(m.parameter_count());
  Eigen::Index at = 0;
  for (const auto& b : m.theta.node_coefs) {
    v.segment(at, b.size()) = b;
    at += b.size();
  }
  for (int j = 0; j < m.q(); ++j)
    for (int k = j + 1; k < m.q(); ++k) v[at++] = m.theta.pair_coefs(j, k);
  for (int j = 0; j < m.q(); ++j) {
    v.segment(at, m.xi[j].size()) = m.xi[j];
    at += m.xi[j].size();
    if (m.families[j] == SurrogateFamily::gaussian) v[at++] = std::log(m.sigma2[j]);
  }
  return v;
}

inline PoSParams with_parameters(PoSParams m, const Vec& v) {
  if (v.size() != m.parameter_count()) throw DimensionMismatch("surrogate model: parameter vector length mismatch");
  Eigen::Index at = 0;
  for (auto& b : m.theta.node_coefs) {
    b = v.segment(at, b.size());
    at += b.size();
  }
  for (int j = 0; j < m.q(); ++j)
    for (int k = j + 1; k < m.q(); ++k) {
      m.theta.pair_coefs(j, k) = v[at];
      m.theta.pair_coefs(k, j) = v[at];
      ++at;
    }
  for (int j = 0; j < m.q(); ++j) {
    m.xi[j] = v.segment(at, m.xi[j].size());
    at += m.xi[j].size();
    if (m.families[j] == SurrogateFamily::gaussian) m.sigma2[j] = std::exp(v[at++]);
  }
  return m;
}

inline Mat log_weight_gradients(const PoSParams& m, const Vec& x, const Vec& w) {
  const int q = m.q();
  const int d1 = m.d() + 1;
  const std::size_t count = config_count(q);
  Mat g = Mat::Zero(static_cast<Eigen::Index>(count), m.parameter_count());
  // Offsets of each surrogate block in the flattened vector.
  std::vector<Eigen::Index> xi_at(static_cast<std::size_t>(q));
  Eigen::Index at = q * d1 + pair_count(q);
  for (int j = 0; j < q; ++j) {
    xi_at[static_cast<std::size_t>(j)] = at;
    at += d1 + 1 + (m.families[j] == SurrogateFamily::gaussian ? 1 : 0);
  }
  detail::SurrogateTerm terms[kMaxNodes][2];
  for (int j = 0; j < q; ++j)
    for (int y = 0; y < 2; ++y)
      terms[j][y] = detail::surrogate_term(m.families[j], x[j], detail::surrogate_linear(m.xi[j], w, y), m.sigma2[j]);

  for (std::size_t c = 0; c < count; ++c) {
    const auto r = static_cast<Eigen::Index>(c);
    for (int j = 0; j < q; ++j) {
      const int yj = static_cast<int>((c >> j) & 1u);
      if (yj) {
        g.row(r).segment(j * d1, d1) = w.transpose();
        for (int k = j + 1; k < q; ++k)
          if ((c >> k) & 1u) g(r, q * d1 + pair_index(q, j, k)) = 1.0;
      }
      const auto& t = terms[j][yj];
      const Eigen::Index base = xi_at[static_cast<std::size_t>(j)];
      g.row(r).segment(base, d1) = t.dlinear * w.transpose();
      g(r, base + d1) = t.dlinear * yj;
      if (m.families[j] == SurrogateFamily::gaussian) g(r, base + d1 + 1) = t.dlogvar;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Model-agnostic surface used by the estimators.

using ConditionalModel = std::variant<AugParams, PoSParams>;

inline int model_q(const ConditionalModel& m) {
  return std::visit([](const auto& v) -> int {
    if constexpr (std::is_same_v<std::decay_t<decltype(v)>, AugParams>) return v.q;
    else return v.q();
  }, m);
}

inline Vec model_log_weights(const ConditionalModel& m, const Vec& x, const Vec& w) {
  return std::visit([&](const auto& v) { return log_weights(v, x, w); }, m);
}

inline CondDistribution predict(const ConditionalModel& m, const Vec& x, const Vec& w) {
  return distribution_from_log_weights(model_q(m), model_log_weights(m, x, w));
}

inline Vec parameter_vector(const ConditionalModel& m) {
  return std::visit([](const auto& v) { return parameter_vector(v); }, m);
}

inline ConditionalModel with_parameters(const ConditionalModel& m, const Vec& eta) {
  return std::visit([&](const auto& v) -> ConditionalModel { return with_parameters(v, eta); }, m);
}

inline Mat log_weight_gradients(const ConditionalModel& m, const Vec& x, const Vec& w) {
  return std::visit([&](const auto& v) { return log_weight_gradients(v, x, w); }, m);
}

/// m_j(z) = sum_y P(y | z) S_j(y_w). `scores` is the 2^q x dim table from
/// NodewiseFit::score_table at the subject's w.
inline Vec project_score(const CondDistribution& dist, const Mat& scores) {
  if (dist.prob.size() != scores.rows()) throw DimensionMismatch("project_score: distribution and score table differ");
  return scores.transpose() * dist.prob;
}

inline Vec project_score(const CondDistribution& dist, const NodewiseFit& fit, int j, const Vec& w) {
  if (dist.q != fit.layout.q) throw DimensionMismatch("project_score: q mismatch");
  return project_score(dist, fit.score_table(j, w));
}

/// Jacobian of m_j(z; eta) with respect to the flattened eta (dim x P):
/// dP(y)/d eta = P(y) (G(y) - sum_y' P(y') G(y')).
inline Mat d_project_d_eta(const ConditionalModel& model, const Vec& x, const Vec& w, const Mat& scores) {
  const CondDistribution dist = predict(model, x, w);
  const Mat grads = log_weight_gradients(model, x, w);
  const Eigen::RowVectorXd mean_grad = dist.prob.transpose() * grads;
  const Mat dp = dist.prob.asDiagonal() * (grads.rowwise() - mean_grad);
  return scores.transpose() * dp;
}

inline Mat d_project_d_eta(const ConditionalModel& model, const Vec& x, const Vec& w, const NodewiseFit& fit, int j) {
  return d_project_d_eta(model, x, w, fit.score_table(j, w));
}

}  // namespace sciss
