#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sciss/pipeline.hpp"

namespace sciss {

enum class Mechanism { gaussian, poisson, anchor_binary };

inline std::string to_string(Mechanism m) {
  switch (m) {
    case Mechanism::gaussian: return "gaussian";
    case Mechanism::poisson: return "poisson";
    case Mechanism::anchor_binary: return "anchor_binary";
  }
  return "?";
}

inline Mechanism parse_mechanism(const std::string& s) {
  if (s == "gaussian") return Mechanism::gaussian;
  if (s == "poisson") return Mechanism::poisson;
  if (s == "anchor_binary" || s == "anchor") return Mechanism::anchor_binary;
  throw InvalidMechanism("unknown mechanism '" + s + "'");
}

struct SimConfig {
  IsingParams theta;
  Mechanism mechanism = Mechanism::gaussian;
  Mat c;                    // q x q surrogate coefficients (gaussian, poisson)
  double anchor_prob = 0.6; // P(x_k = 1 | y_k = 1) for anchor_binary
  int n = 200;
  int big_n = 10000;
  int reps = 500;
  std::uint64_t seed = 1;
  FitOptions fit;           // methods and model choices
  unsigned threads = 0;     // 0: SCISS_THREADS or hardware concurrency
  double max_failure_rate = 0.02;

  void validate() const {
    theta.validate();
    if (theta.d != 0) throw InvalidArgument("SimConfig: simulated data uses w = 1 (d = 0)");
    if (n < 10) throw InvalidArgument("SimConfig: n must be at least 10");
    if (big_n < n) throw InvalidArgument("SimConfig: N must be at least n");
    if (reps < 1) throw InvalidArgument("SimConfig: reps must be positive");
    if (mechanism != Mechanism::anchor_binary && (c.rows() != theta.q || c.cols() != theta.q))
      throw DimensionMismatch("SimConfig: c must be q x q");
    if (mechanism == Mechanism::anchor_binary && !(anchor_prob > 0.0 && anchor_prob < 1.0))
      throw InvalidArgument("SimConfig: anchor probability must lie in (0, 1)");
    fit.validate();
  }
};

// Per-replication stream from (seed, rep).
inline std::mt19937_64 replication_rng(std::uint64_t seed, std::uint64_t rep) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(rep), static_cast<std::uint32_t>(rep >> 32)};
  return std::mt19937_64(seq);
}

// c_kk y_k + sum_{j != k} c_jk y_j y_k
inline double surrogate_mean(const Mat& c, const OutcomeConfig& y, int k) {
  if (!y[k]) return 0.0;
  double s = c(k, k);
  for (int j = 0; j < c.rows(); ++j)
    if (j != k && y[j]) s += c(j, k);
  return s;
}

template <class Rng>
Vec draw_surrogates(const SimConfig& cfg, const OutcomeConfig& y, Rng& rng) {
  const int q = cfg.theta.q;
  Vec x(q);
  for (int k = 0; k < q; ++k) {
    switch (cfg.mechanism) {
      case Mechanism::gaussian:
        x[k] = surrogate_mean(cfg.c, y, k) + std::normal_distribution<double>(0.0, 1.0)(rng);
        break;
      case Mechanism::poisson: {
        const double rate = surrogate_mean(cfg.c, y, k);
        if (rate < 0.0) throw InvalidMechanism("poisson mechanism produced a negative rate");
        x[k] = rate == 0.0 ? 0.0 : static_cast<double>(std::poisson_distribution<long>(rate)(rng));
        break;
      }
      case Mechanism::anchor_binary:
        x[k] = y[k] && std::bernoulli_distribution(cfg.anchor_prob)(rng) ? 1.0 : 0.0;
        break;
    }
  }
  return x;
}

/// Draws n + N records; the last N lose their outcomes.
inline Dataset generate(const SimConfig& cfg, std::uint64_t rep) {
  auto rng = replication_rng(cfg.seed, rep);
  const Vec w = Vec::Ones(1);
  const ConfigSampler sampler(cfg.theta.q, joint_pmf(cfg.theta, w));
  Dataset data;
  data.q = cfg.theta.q;
  data.p = cfg.theta.q;
  data.d = 0;
  data.labeled.reserve(static_cast<std::size_t>(cfg.n));
  data.unlabeled.reserve(static_cast<std::size_t>(cfg.big_n));
  for (int i = 0; i < cfg.n + cfg.big_n; ++i) {
    const OutcomeConfig y = sampler(rng);
    Vec x = draw_surrogates(cfg, y, rng);
    if (i < cfg.n)
      data.labeled.push_back({y, std::move(x), w});
    else
      data.unlabeled.push_back({std::move(x), w});
  }
  return data;
}

// ---------------------------------------------------------------------------
// Presets

struct SimPreset {
  std::string name;
  SimConfig config;
};

inline Mat coefficient_matrix(int which) {
  Mat c(3, 3);
  switch (which) {
    case 0: c.setZero(); break;
    case 1: c = 3.0 * Mat::Identity(3, 3); break;
    case 2: c << 2.5, 0.2, 0.5, 0.2, 2.5, 0.5, 0.5, 0.5, 2.5; break;
    case 3: c << 1.5, 1.0, 1.5, 1.0, 2.0, 1.0, 1.5, 1.0, 1.5; break;
    default: throw InvalidArgument("coefficient matrix index must be 0..3");
  }
  return c;
}

inline IsingParams main_study_theta() {
  Mat t(3, 3);
  t << 0.1, 0.3, -0.6, 0.3, -0.3, 0.4, -0.6, 0.4, 0.2;
  return IsingParams::from_matrix(t);
}

inline IsingParams anchor_study_theta() {
  Mat t(3, 3);
  t << -2.0, 0.0, 1.0, 0.0, -1.5, 1.0, 1.0, 1.0, -1.0;
  return IsingParams::from_matrix(t);
}

/// Named configurations: gauss-c0..c3, pois-c1..c3, anchor.
inline SimConfig preset(const std::string& name) {
  SimConfig cfg;
  if (name == "anchor") {
    cfg.theta = anchor_study_theta();
    cfg.mechanism = Mechanism::anchor_binary;
    cfg.n = 500;
    cfg.big_n = 7500;
    cfg.fit.methods = {Method::SL, Method::SCISS_Aug, Method::INTR};
    cfg.fit.families.assign(3, SurrogateFamily::logistic);
    return cfg;
  }
  const bool gauss = name.rfind("gauss-c", 0) == 0;
  const bool pois = name.rfind("pois-c", 0) == 0;
  const std::string idx = gauss ? name.substr(7) : pois ? name.substr(6) : "";
  // Poisson with c = 0 gives x identically 0, which no fit can use.
  const char lowest = gauss ? '0' : '1';
  if (idx.size() != 1 || idx[0] < lowest || idx[0] > '3') throw InvalidArgument("unknown preset '" + name + "'");
  cfg.theta = main_study_theta();
  cfg.c = coefficient_matrix(idx[0] - '0');
  cfg.mechanism = gauss ? Mechanism::gaussian : Mechanism::poisson;
  cfg.fit.methods = {Method::SL, Method::SCISS_Aug, Method::SCISS_PoS, Method::ES, Method::DR};
  cfg.fit.families.assign(3, gauss ? SurrogateFamily::gaussian : SurrogateFamily::poisson);
  cfg.fit.log1p_x = pois;
  return cfg;
}

// ---------------------------------------------------------------------------
// Replicated runs

struct SimCell {
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double se = std::numeric_limits<double>::quiet_NaN();  // Monte-Carlo SD; NaN with < 2 replications
  double re = std::numeric_limits<double>::quiet_NaN();  // (SE_SL / SE)^2
  double cp = 0.0;
  double mean_se = 0.0;  // average analytic SE

  friend bool operator==(const SimCell&, const SimCell&) = default;
};

struct SimSummary {
  std::string label;
  std::vector<std::string> params;  // theta11, theta12, ...
  std::vector<Method> methods;
  std::vector<std::vector<SimCell>> cells;  // [param][method]
  int reps_requested = 0;
  int reps_used = 0;
  std::vector<std::string> failures;
  std::vector<std::string> warnings;

  const SimCell& cell(const std::string& param, Method m) const {
    for (std::size_t p = 0; p < params.size(); ++p)
      if (params[p] == param)
        for (std::size_t k = 0; k < methods.size(); ++k)
          if (methods[k] == m) return cells[p][k];
    throw InvalidArgument("SimSummary: no cell for " + param + " / " + to_string(m));
  }
};

// Parameters of a d = 0 model: (j, k) with j <= k; j == k is the intercept.
inline std::vector<std::pair<int, int>> summary_params(int q) {
  std::vector<std::pair<int, int>> out;
  for (int j = 0; j < q; ++j)
    for (int k = j; k < q; ++k) out.emplace_back(j, k);
  return out;
}

inline double param_value(const IsingParams& t, int j, int k) { return j == k ? t.node_coefs[j][0] : t.pair_coefs(j, k); }

// SCISS_THREADS caps the worker count; `requested` = 0 means use the cap or
// the hardware concurrency.
inline unsigned worker_count(unsigned requested) {
  unsigned cap = 0;
  if (const char* env = std::getenv("SCISS_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) cap = static_cast<unsigned>(v);
  }
  unsigned n = requested > 0 ? requested : cap > 0 ? cap : std::max(1u, std::thread::hardware_concurrency());
  if (cap > 0) n = std::min(n, cap);
  return n;
}

struct ReplicationResult {
  bool ok = false;
  std::string error;
  std::vector<EstimateReport> reports;
};

inline ReplicationResult run_replication(const SimConfig& cfg, std::uint64_t rep) {
  ReplicationResult r;
  try {
    r.reports = fit_methods(generate(cfg, rep), cfg.fit);
    r.ok = true;
  } catch (const Error& e) {
    r.error = e.what();
  }
  return r;
}

/// Runs all replications, then aggregates in replication order so the
/// summary does not depend on the worker count.
inline SimSummary run(const SimConfig& cfg) {
  cfg.validate();
  std::vector<ReplicationResult> results(static_cast<std::size_t>(cfg.reps));
  const unsigned workers = std::min<unsigned>(worker_count(cfg.threads), static_cast<unsigned>(cfg.reps));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int r = next++; r < cfg.reps; r = next++) results[static_cast<std::size_t>(r)] = run_replication(cfg, static_cast<std::uint64_t>(r));
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
  }

  SimSummary s;
  s.methods = cfg.fit.methods;
  s.reps_requested = cfg.reps;
  const auto params = summary_params(cfg.theta.q);
  for (auto [j, k] : params) s.params.push_back("theta" + std::to_string(j + 1) + std::to_string(k + 1));

  std::vector<const ReplicationResult*> ok;
  for (int r = 0; r < cfg.reps; ++r) {
    const auto& res = results[static_cast<std::size_t>(r)];
    if (res.ok)
      ok.push_back(&res);
    else
      s.failures.push_back("replication " + std::to_string(r) + ": " + res.error);
  }
  s.reps_used = static_cast<int>(ok.size());
  if (static_cast<double>(s.failures.size()) > cfg.max_failure_rate * cfg.reps) {
    std::string msg = "simulation aborted: " + std::to_string(s.failures.size()) + " of " + std::to_string(cfg.reps) +
                      " replications failed";
    for (std::size_t i = 0; i < std::min<std::size_t>(5, s.failures.size()); ++i) msg += "\n  " + s.failures[i];
    throw NoConvergence(msg);
  }
  if (s.reps_used < 2) s.warnings.push_back("fewer than two replications: SE and RE are not available");

  const auto sl_it = std::find(s.methods.begin(), s.methods.end(), Method::SL);
  const std::size_t nm = s.methods.size();
  s.cells.assign(params.size(), std::vector<SimCell>(nm));
  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto [j, k] = params[p];
    for (std::size_t m = 0; m < nm; ++m) {
      SimCell& c = s.cells[p][m];
      c.truth = param_value(cfg.theta, j, k);
      std::vector<double> est;
      double covered = 0.0, se_sum = 0.0;
      for (const auto* res : ok) {
        const EstimateReport& rep = res->reports[m];
        est.push_back(param_value(rep.theta, j, k));
        se_sum += param_value(rep.se, j, k);
        if (param_value(rep.ci_low, j, k) <= c.truth && c.truth <= param_value(rep.ci_high, j, k)) covered += 1.0;
      }
      const double used = static_cast<double>(est.size());
      c.mean = mean(std::span<const double>(est));
      c.bias = c.mean - c.truth;
      c.se = sample_sd(est);
      c.cp = used > 0 ? covered / used : 0.0;
      c.mean_se = used > 0 ? se_sum / used : 0.0;
    }
    if (sl_it != s.methods.end()) {
      const double sl_se = s.cells[p][static_cast<std::size_t>(sl_it - s.methods.begin())].se;
      for (auto& c : s.cells[p]) c.re = (sl_se / c.se) * (sl_se / c.se);
    }
  }
  return s;
}

/// Aligned text table: one row per parameter, Bias/SE/RE/CP per method.
inline std::string format_table(const SimSummary& s) {
  auto num = [](double v, int prec) {
    if (!std::isfinite(v)) return std::string("-");
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
  };
  constexpr int kW = 8;
  std::ostringstream out;
  if (!s.label.empty()) out << s.label << "\n";
  out << std::left << std::setw(10) << "";
  for (Method m : s.methods) out << std::left << std::setw(4 * kW) << to_string(m);
  out << "\n" << std::left << std::setw(10) << "param";
  for (std::size_t m = 0; m < s.methods.size(); ++m)
    for (const char* h : {"Bias", "SE", "RE", "CP"}) out << std::right << std::setw(kW) << h;
  out << "\n";
  for (std::size_t p = 0; p < s.params.size(); ++p) {
    out << std::left << std::setw(10) << s.params[p];
    for (const SimCell& c : s.cells[p])
      out << std::right << std::setw(kW) << num(c.bias, 3) << std::setw(kW) << num(c.se, 3) << std::setw(kW)
          << num(c.re, 2) << std::setw(kW) << num(c.cp, 3);
    out << "\n";
  }
  out << "replications used: " << s.reps_used << " of " << s.reps_requested << "\n";
  for (const auto& w : s.warnings) out << "warning: " << w << "\n";
  return out.str();
}

}  // namespace sciss
