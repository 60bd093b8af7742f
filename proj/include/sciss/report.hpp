#pragma once

#include <cctype>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "sciss/ising.hpp"

namespace sciss {

enum class Method { SL, SCISS_Aug, SCISS_PoS, INTR, ES, DR };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::SL: return "SL";
    case Method::SCISS_Aug: return "SCISS-Aug";
    case Method::SCISS_PoS: return "SCISS-PoS";
    case Method::INTR: return "INTR";
    case Method::ES: return "ES";
    case Method::DR: return "DR";
  }
  return "?";
}

// Accepts the display tags and their lower-case CLI spellings.
inline Method parse_method(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (s == "sl") return Method::SL;
  if (s == "sciss-aug" || s == "aug") return Method::SCISS_Aug;
  if (s == "sciss-pos" || s == "pos") return Method::SCISS_PoS;
  if (s == "intr") return Method::INTR;
  if (s == "es" || s == "ensemble") return Method::ES;
  if (s == "dr") return Method::DR;
  throw InvalidArgument("unknown method '" + s + "'");
}

struct Diagnostics {
  std::vector<std::string> notes;
  std::map<std::string, std::vector<double>> values;

  friend bool operator==(const Diagnostics&, const Diagnostics&) = default;
};

// Key for per-parameter diagnostics, 1-based like the parameter names.
inline std::string pair_key(const std::string& what, int j, int k) {
  return what + "[" + std::to_string(j + 1) + "," + std::to_string(k + 1) + "]";
}

inline constexpr double kZ975 = 1.959963984540054;

/// Point estimates with standard errors and 95% Wald intervals, all shaped
/// like IsingParams (pairwise matrix plus node coefficient vectors).
struct EstimateReport {
  Method method = Method::SL;
  IsingParams theta;
  IsingParams se;
  IsingParams ci_low;
  IsingParams ci_high;
  std::size_t n_labeled = 0;
  std::size_t n_unlabeled = 0;
  Diagnostics diagnostics;

  friend bool operator==(const EstimateReport&, const EstimateReport&) = default;
};

/// Builds a report from point estimates and plug-in variances of the
/// scaled estimator (se = sqrt(omega / n)).
inline EstimateReport make_report(Method method, const IsingParams& theta, const IsingParams& omega, std::size_t n,
                                  std::size_t big_n = 0) {
  EstimateReport r;
  r.method = method;
  r.theta = theta;
  r.n_labeled = n;
  r.n_unlabeled = big_n;
  r.se = IsingParams(theta.q, theta.d);
  const double nn = static_cast<double>(n);
  for (int j = 0; j < theta.q; ++j) {
    r.se.node_coefs[j] = (omega.node_coefs[j].array().max(0.0) / nn).sqrt().matrix();
    for (int k = 0; k < theta.q; ++k)
      if (k != j) r.se.pair_coefs(j, k) = std::sqrt(std::max(omega.pair_coefs(j, k), 0.0) / nn);
  }
  r.ci_low = theta;
  r.ci_high = theta;
  for (int j = 0; j < theta.q; ++j) {
    r.ci_low.node_coefs[j] -= kZ975 * r.se.node_coefs[j];
    r.ci_high.node_coefs[j] += kZ975 * r.se.node_coefs[j];
  }
  r.ci_low.pair_coefs -= kZ975 * r.se.pair_coefs;
  r.ci_high.pair_coefs += kZ975 * r.se.pair_coefs;
  return r;
}

}  // namespace sciss
