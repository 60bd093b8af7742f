#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "sciss/errors.hpp"
#include "sciss/numerics.hpp"

namespace sciss {

// Outcome configurations are enumerated in binary counting order with
// y_1 as the least significant bit; index c encodes y_j = (c >> j) & 1.
inline constexpr int kMaxNodes = 15;

class OutcomeConfig {
 public:
  OutcomeConfig() = default;
  OutcomeConfig(int q, std::uint32_t index) : q_(q), index_(index) {
    if (q < 0 || q > 31) throw InvalidArgument("OutcomeConfig: unsupported q");
    if (q < 32 && (index >> q) != 0) throw InvalidArgument("OutcomeConfig: index out of range");
  }

  static OutcomeConfig from_bits(const std::vector<int>& bits) {
    if (bits.size() > 31) throw InvalidArgument("OutcomeConfig: too many nodes");
    std::uint32_t idx = 0;
    for (std::size_t j = 0; j < bits.size(); ++j) {
      if (bits[j] != 0 && bits[j] != 1) throw InvalidArgument("OutcomeConfig: entries must be binary");
      idx |= static_cast<std::uint32_t>(bits[j]) << j;
    }
    return {static_cast<int>(bits.size()), idx};
  }

  int q() const { return q_; }
  std::uint32_t index() const { return index_; }
  int operator[](int j) const { return static_cast<int>((index_ >> j) & 1u); }
  std::vector<int> bits() const {
    std::vector<int> out(q_);
    for (int j = 0; j < q_; ++j) out[j] = (*this)[j];
    return out;
  }
  OutcomeConfig flipped(int j) const { return {q_, index_ ^ (1u << j)}; }

  friend bool operator==(const OutcomeConfig&, const OutcomeConfig&) = default;

 private:
  int q_ = 0;
  std::uint32_t index_ = 0;
};

inline std::size_t config_count(int q) { return std::size_t{1} << q; }

inline void require_enumerable(int q) {
  if (q > kMaxNodes) throw QTooLarge("q = " + std::to_string(q) + " exceeds enumeration cap of 15");
}

// Adjustment features always start with the intercept entry 1.
inline void validate_adjustment(const Vec& w, int d) {
  if (w.size() != d + 1) throw DimensionMismatch("w must have length d + 1");
  if (w[0] != 1.0) throw InvalidArgument("w[0] must be the intercept 1");
}

/// Layout of the stacked node vector for node j:
///   (y_1, ..., y_{j-1}, w^T, y_{j+1}, ..., y_q)
/// All (j, k) -> position lookups go through this type.
struct NodeLayout {
  int q = 0;
  int d = 0;

  int dim() const { return q + d; }
  // First position of the w block (the node coefficients theta_jj).
  int node_offset(int j) const { return j; }
  int partner_pos(int j, int k) const { return k < j ? k : k + d; }
  // Position of coefficient theta_jk in node j's vector; k == j maps to the
  // intercept of the w block.
  int pos(int j, int k) const { return k == j ? node_offset(j) : partner_pos(j, k); }

  Vec stacked(int j, const OutcomeConfig& y, const Vec& w) const {
    Vec v(dim());
    for (int k = 0; k < q; ++k)
      if (k != j) v[partner_pos(j, k)] = y[k];
    v.segment(node_offset(j), d + 1) = w;
    return v;
  }
};

/// Ising parameters: q node coefficient vectors theta_jj (length d + 1,
/// acting on w) and a symmetric zero-diagonal matrix of pairwise theta_jk.
/// The same shape is reused for standard errors and interval bounds.
struct IsingParams {
  int q = 0;
  int d = 0;
  std::vector<Vec> node_coefs;
  Mat pair_coefs;

  IsingParams() = default;
  IsingParams(int q_, int d_) : q(q_), d(d_), node_coefs(q_, Vec::Zero(d_ + 1)), pair_coefs(Mat::Zero(q_, q_)) {
    if (q_ < 1 || d_ < 0) throw InvalidArgument("IsingParams: q >= 1 and d >= 0 required");
  }

  // Builds d = 0 parameters from a q x q matrix whose diagonal holds the
  // node intercepts and whose off-diagonal holds the pairwise terms.
  static IsingParams from_matrix(const Mat& m) {
    if (m.rows() != m.cols()) throw DimensionMismatch("IsingParams::from_matrix: matrix must be square");
    if (!is_symmetric(m, 0.0)) throw InvalidArgument("IsingParams::from_matrix: matrix must be symmetric");
    IsingParams p(static_cast<int>(m.rows()), 0);
    for (int j = 0; j < p.q; ++j) {
      p.node_coefs[j][0] = m(j, j);
      for (int k = 0; k < p.q; ++k)
        if (k != j) p.pair_coefs(j, k) = m(j, k);
    }
    return p;
  }

  NodeLayout layout() const { return {q, d}; }

  void validate() const {
    if (static_cast<int>(node_coefs.size()) != q) throw DimensionMismatch("IsingParams: node_coefs count != q");
    for (const auto& c : node_coefs)
      if (c.size() != d + 1) throw DimensionMismatch("IsingParams: node coefficient length != d + 1");
    if (pair_coefs.rows() != q || pair_coefs.cols() != q) throw DimensionMismatch("IsingParams: pair_coefs not q x q");
    for (int j = 0; j < q; ++j) {
      if (pair_coefs(j, j) != 0.0) throw InvalidArgument("IsingParams: pair_coefs diagonal must be zero");
      for (int k = j + 1; k < q; ++k)
        if (pair_coefs(j, k) != pair_coefs(k, j)) throw InvalidArgument("IsingParams: pair_coefs must be symmetric");
    }
  }

  // Node j's coefficients in stacked-node order (theta_j).
  Vec node_vector(int j) const {
    const NodeLayout lay = layout();
    Vec v(lay.dim());
    for (int k = 0; k < q; ++k)
      if (k != j) v[lay.partner_pos(j, k)] = pair_coefs(j, k);
    v.segment(lay.node_offset(j), d + 1) = node_coefs[j];
    return v;
  }

  friend bool operator==(const IsingParams& a, const IsingParams& b) {
    if (a.q != b.q || a.d != b.d || a.pair_coefs != b.pair_coefs) return false;
    for (int j = 0; j < a.q; ++j)
      if (a.node_coefs[j] != b.node_coefs[j]) return false;
    return true;
  }
};

/// sum_j (theta_jj^T w) y_j + sum_{k>j} theta_jk y_j y_k
inline double log_unnormalized(const IsingParams& theta, const OutcomeConfig& y, const Vec& w) {
  if (y.q() != theta.q || w.size() != theta.d + 1) throw DimensionMismatch("log_unnormalized: dimension mismatch");
  double s = 0.0;
  for (int j = 0; j < theta.q; ++j) {
    if (!y[j]) continue;
    s += theta.node_coefs[j].dot(w);
    for (int k = j + 1; k < theta.q; ++k)
      if (y[k]) s += theta.pair_coefs(j, k);
  }
  return s;
}

/// Unnormalized log-probabilities over all 2^q configurations.
inline Vec log_weights(const IsingParams& theta, const Vec& w) {
  require_enumerable(theta.q);
  if (w.size() != theta.d + 1) throw DimensionMismatch("log_weights: w has wrong length");
  const std::size_t count = config_count(theta.q);
  Vec out(static_cast<Eigen::Index>(count));
  for (std::size_t c = 0; c < count; ++c)
    out[static_cast<Eigen::Index>(c)] = log_unnormalized(theta, OutcomeConfig(theta.q, static_cast<std::uint32_t>(c)), w);
  return out;
}

/// Exact joint pmf by full enumeration, indexed by configuration index.
inline Vec joint_pmf(const IsingParams& theta, const Vec& w) {
  Vec p = log_weights(theta, w);
  softmax_inplace(p);
  return p;
}

/// theta_jj^T w + sum_{k != j} theta_jk y_k. Bit j of `y` is ignored.
inline double conditional_logodds(const IsingParams& theta, int j, const OutcomeConfig& y, const Vec& w) {
  if (j < 0 || j >= theta.q) throw InvalidArgument("conditional_logodds: node index out of range");
  if (y.q() != theta.q || w.size() != theta.d + 1) throw DimensionMismatch("conditional_logodds: dimension mismatch");
  double s = theta.node_coefs[j].dot(w);
  for (int k = 0; k < theta.q; ++k)
    if (k != j && y[k]) s += theta.pair_coefs(j, k);
  return s;
}

/// Inverse-CDF sampler over an enumerated pmf table.
class ConfigSampler {
 public:
  ConfigSampler(int q, const Vec& pmf) : q_(q), cdf_(static_cast<std::size_t>(pmf.size())) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < pmf.size(); ++c) {
      acc += pmf[c];
      cdf_[static_cast<std::size_t>(c)] = acc;
    }
    cdf_.back() = std::numeric_limits<double>::infinity();
  }

  template <class Rng>
  OutcomeConfig operator()(Rng& rng) const {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return {q_, static_cast<std::uint32_t>(it - cdf_.begin())};
  }

 private:
  int q_;
  std::vector<double> cdf_;
};

/// i.i.d. exact draws from the Ising model at adjustment features w.
template <class Rng>
std::vector<OutcomeConfig> sample(const IsingParams& theta, const Vec& w, Rng& rng, std::size_t count) {
  const ConfigSampler sampler(theta.q, joint_pmf(theta, w));
  std::vector<OutcomeConfig> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sampler(rng));
  return out;
}

}  // namespace sciss
