#pragma once

#include <random>
#include <vector>

#include "sciss/dataset.hpp"
#include "sciss/simulation.hpp"

namespace sciss::testing {

inline Vec random_vec(std::mt19937_64& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline Mat random_spd(std::mt19937_64& rng, Eigen::Index n) {
  Mat a(n, n);
  std::normal_distribution<double> z;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = z(rng);
  return a * a.transpose() + static_cast<double>(n) * Mat::Identity(n, n);
}

inline IsingParams random_ising(std::mt19937_64& rng, int q, int d, double scale = 1.0) {
  IsingParams t(q, d);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (int j = 0; j < q; ++j) {
    for (auto& c : t.node_coefs[j]) c = u(rng);
    for (int k = j + 1; k < q; ++k) t.pair_coefs(j, k) = t.pair_coefs(k, j) = u(rng);
  }
  return t;
}

inline Vec random_w(std::mt19937_64& rng, int d) {
  Vec w(d + 1);
  w[0] = 1.0;
  std::normal_distribution<double> z;
  for (int k = 1; k <= d; ++k) w[k] = z(rng);
  return w;
}

// Labeled/unlabeled data from a preset-style configuration, for tests that
// need realistic inputs without running the harness.
inline Dataset preset_data(const std::string& name, std::uint64_t seed, int n, int big_n) {
  SimConfig cfg = preset(name);
  cfg.seed = seed;
  cfg.n = n;
  cfg.big_n = big_n;
  return generate(cfg, 0);
}

}  // namespace sciss::testing
