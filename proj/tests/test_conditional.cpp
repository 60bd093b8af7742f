#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "sciss/conditional.hpp"
#include "sciss/simulation.hpp"
#include "test_support.hpp"

using namespace sciss;
using sciss::testing::preset_data;

namespace {

Dataset small_gauss(std::uint64_t seed, int n = 300) { return preset_data("gauss-c1", seed, n, 50); }

AugParams zero_x_aug(const IsingParams& theta, int p) {
  AugParams m;
  m.q = theta.q;
  m.p = p;
  m.d = theta.d;
  for (int j = 0; j < theta.q; ++j) {
    Vec b = Vec::Zero(p + theta.d + 1);
    b.tail(theta.d + 1) = theta.node_coefs[j];
    m.node_coefs.push_back(b);
  }
  m.pair_coefs.assign(static_cast<std::size_t>(pair_count(theta.q)), Vec::Zero(p));
  return m;
}

}  // namespace

TEST(PairIndex, CoversUpperTriangle) {
  std::set<int> seen;
  for (int j = 0; j < 5; ++j)
    for (int k = j + 1; k < 5; ++k) {
      EXPECT_EQ(pair_index(5, j, k), pair_index(5, k, j));
      seen.insert(pair_index(5, j, k));
    }
  EXPECT_EQ(seen.size(), 10u);
  EXPECT_EQ(*seen.begin(), 0);
  EXPECT_EQ(*seen.rbegin(), 9);
}

TEST(ProjectScore, MatchesExplicitSum) {
  const Dataset data = small_gauss(1);
  const SlFit sl = fit_sl(data.labeled);
  const AugParams aug = fit_aug(data.labeled);
  for (int i = 0; i < 5; ++i) {
    const auto& s = data.unlabeled[static_cast<std::size_t>(i)];
    const CondDistribution dist = predict_aug(aug, s.x, s.w);
    for (int j = 0; j < 3; ++j) {
      Vec expect = Vec::Zero(sl.nodes.layout.dim());
      for (std::uint32_t c = 0; c < 8; ++c) expect += dist[c] * sl.nodes.score(j, OutcomeConfig(3, c), s.w);
      EXPECT_LE(inf_norm(project_score(dist, sl.nodes, j, s.w) - expect), 1e-12);
    }
  }
}

TEST(ProjectScore, PointMassGivesScore) {
  const Dataset data = small_gauss(2);
  const SlFit sl = fit_sl(data.labeled);
  const Vec w = Vec::Ones(1);
  for (std::uint32_t c = 0; c < 8; ++c) {
    CondDistribution dist{3, Vec::Zero(8)};
    dist.prob[c] = 1.0;
    for (int j = 0; j < 3; ++j)
      EXPECT_EQ(project_score(dist, sl.nodes, j, w), sl.nodes.score(j, OutcomeConfig(3, c), w));
  }
}

TEST(ProjectScore, ShapeMismatch) {
  CondDistribution dist{2, Vec::Constant(4, 0.25)};
  EXPECT_THROW(project_score(dist, Mat::Zero(8, 3)), DimensionMismatch);
}

TEST(Distribution, NormalizedForBothModels) {
  const Dataset data = small_gauss(3);
  const SlFit sl = fit_sl(data.labeled);
  const ConditionalModel models[] = {fit_aug(data.labeled), fit_pos(data.labeled, sl.theta, std::vector(3, SurrogateFamily::gaussian))};
  for (const auto& m : models)
    for (const auto& s : data.unlabeled) {
      const CondDistribution dist = predict(m, s.x, s.w);
      EXPECT_NEAR(dist.prob.sum(), 1.0, 1e-10);
      EXPECT_GE(dist.prob.minCoeff(), 0.0);
    }
}

TEST(Distribution, ZeroParametersUniform) {
  AugParams m = zero_x_aug(IsingParams(3, 0), 3);
  const CondDistribution dist = predict_aug(m, Vec::Constant(3, 2.5), Vec::Ones(1));
  for (std::uint32_t c = 0; c < 8; ++c) EXPECT_NEAR(dist[c], 0.125, 1e-15);
}

// Pair terms of the augmented model act through x only, so with no x effects
// it is an Ising model without interactions.
TEST(Distribution, AugWithoutXIsIndependentIsing) {
  std::mt19937_64 rng(4);
  IsingParams t = sciss::testing::random_ising(rng, 4, 1);
  t.pair_coefs.setZero();
  const AugParams m = zero_x_aug(t, 2);
  const Vec w = sciss::testing::random_w(rng, 1);
  const Vec expect = joint_pmf(t, w);
  EXPECT_LE(inf_norm(predict_aug(m, Vec::Constant(2, -1.3), w).prob - expect), 1e-14);
}

// q = 2 surrogate model against a hand-written Bayes rule over 4 configurations.
TEST(Distribution, PoSMatchesBayesRule) {
  PoSParams m;
  m.theta = IsingParams::from_matrix((Mat(2, 2) << -0.4, 0.7, 0.7, 0.2).finished());
  m.families = {SurrogateFamily::gaussian, SurrogateFamily::poisson};
  m.xi = {(Vec(2) << 0.5, 2.0).finished(), (Vec(2) << 0.1, 1.2).finished()};
  m.sigma2 = {1.5, std::numeric_limits<double>::quiet_NaN()};
  const Vec x = (Vec(2) << 1.7, 3.0).finished();
  const Vec w = Vec::Ones(1);
  auto normal_pdf = [](double v, double mu, double s2) { return std::exp(-(v - mu) * (v - mu) / (2 * s2)) / std::sqrt(2 * M_PI * s2); };
  auto pois_pmf = [](double v, double mu) { return std::exp(v * std::log(mu) - mu - std::lgamma(v + 1)); };
  Vec un(4);
  for (int c = 0; c < 4; ++c) {
    const int y1 = c & 1, y2 = (c >> 1) & 1;
    const double prior = std::exp(-0.4 * y1 + 0.2 * y2 + 0.7 * y1 * y2);
    un[c] = prior * normal_pdf(1.7, 0.5 + 2.0 * y1, 1.5) * pois_pmf(3.0, std::exp(0.1 + 1.2 * y2));
  }
  un /= un.sum();
  EXPECT_LE(inf_norm(predict_pos(m, x, w).prob - un), 1e-12);
}

TEST(Jacobian, MatchesFiniteDifferences) {
  const Dataset data = small_gauss(5);
  const SlFit sl = fit_sl(data.labeled);
  const ConditionalModel models[] = {fit_aug(data.labeled), fit_pos(data.labeled, sl.theta, std::vector(3, SurrogateFamily::gaussian))};
  for (const auto& m : models) {
    const Vec eta = parameter_vector(m);
    for (int i = 0; i < 3; ++i) {
      const auto& s = data.unlabeled[static_cast<std::size_t>(i)];
      for (int j = 0; j < 3; ++j) {
        const Mat scores = sl.nodes.score_table(j, s.w);
        const Mat jac = d_project_d_eta(m, s.x, s.w, scores);
        ASSERT_EQ(jac.cols(), eta.size());
        const double h = 1e-6;
        for (Eigen::Index e = 0; e < eta.size(); ++e) {
          Vec up = eta, dn = eta;
          up[e] += h;
          dn[e] -= h;
          const Vec fd = (project_score(predict(with_parameters(m, up), s.x, s.w), scores) -
                          project_score(predict(with_parameters(m, dn), s.x, s.w), scores)) / (2 * h);
          EXPECT_LE(inf_norm(jac.col(e) - fd), 1e-4) << "param " << e;
        }
      }
    }
  }
}

TEST(Parameters, RoundTrip) {
  const Dataset data = small_gauss(6);
  const SlFit sl = fit_sl(data.labeled);
  const ConditionalModel models[] = {fit_aug(data.labeled), fit_pos(data.labeled, sl.theta, std::vector(3, SurrogateFamily::gaussian))};
  for (const auto& m : models) {
    const Vec eta = parameter_vector(m);
    EXPECT_EQ(parameter_vector(with_parameters(m, eta)), eta);
    // log(sigma^2) passes through exp and log
    const Vec shifted = eta.array() + 0.25;
    EXPECT_LE(inf_norm(parameter_vector(with_parameters(m, shifted)) - shifted), 1e-14);
  }
  EXPECT_EQ(parameter_vector(models[0]).size(), std::get<AugParams>(models[0]).parameter_count());
  EXPECT_EQ(parameter_vector(models[1]).size(), std::get<PoSParams>(models[1]).parameter_count());
}

TEST(Aug, PairBlocksShared) {
  const Dataset data = small_gauss(7);
  const AugParams m = fit_aug(data.labeled);
  EXPECT_EQ(m.pair_coefs.size(), 3u);
  for (const auto& b : m.pair_coefs) EXPECT_EQ(b.size(), 3);
  for (const auto& b : m.node_coefs) EXPECT_EQ(b.size(), 4);
  EXPECT_EQ(&m.pair(0, 2), &m.pair(2, 0));
  EXPECT_NEAR(m.lambda, std::pow(300.0, -0.75), 1e-15);
}

TEST(Aug, HeavyRidgeShrinksToZero) {
  const Dataset data = small_gauss(8);
  AugOptions opts;
  opts.lambda = 1e6;
  EXPECT_LE(inf_norm(parameter_vector(fit_aug(data.labeled, opts))), 1e-5);
}

TEST(Aug, WarnsWhenOverparameterized) {
  const Dataset data = small_gauss(9, 60);
  EXPECT_FALSE(fit_aug(data.labeled).warnings.empty());
  EXPECT_TRUE(fit_aug(small_gauss(9, 300).labeled).warnings.empty());
}

TEST(Aug, NegativeLambdaRejected) {
  AugOptions opts;
  opts.lambda = -1.0;
  EXPECT_THROW(fit_aug(small_gauss(10).labeled, opts), InvalidArgument);
}

TEST(PoS, GaussianRecoversMechanism) {
  const Dataset data = preset_data("gauss-c1", 11, 20000, 1);
  const SlFit sl = fit_sl(data.labeled);
  const PoSParams m = fit_pos(data.labeled, sl.theta, std::vector(3, SurrogateFamily::gaussian));
  // c1 mechanism: x_k = 3 y_k + N(0, 1)
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(m.xi[j][0], 0.0, 0.05);
    EXPECT_NEAR(m.xi[j][1], 3.0, 0.05);
    EXPECT_NEAR(m.sigma2[j], 1.0, 0.05);
  }
  EXPECT_EQ(m.theta, sl.theta);
}

TEST(PoS, PoissonZeroStratumPinned) {
  std::vector<LabeledSample> data;
  std::mt19937_64 rng(12);
  std::poisson_distribution<int> pois(2.0);
  for (int i = 0; i < 200; ++i) {
    const int y = i % 2;
    data.push_back({OutcomeConfig::from_bits({y}), (Vec(1) << (y ? pois(rng) : 0)).finished(), Vec::Ones(1)});
  }
  const SlFit sl = fit_sl(data);
  const PoSParams m = fit_pos(data, sl.theta, {SurrogateFamily::poisson});
  EXPECT_DOUBLE_EQ(m.xi[0][0], -kLinkClamp);
  EXPECT_FALSE(m.clamps.empty());
  // A positive count is impossible under y = 0, so the posterior is near 1.
  const CondDistribution dist = predict_pos(m, (Vec(1) << 3.0).finished(), Vec::Ones(1));
  EXPECT_GT(dist[1], 1.0 - 1e-12);
  EXPECT_TRUE(std::isfinite(dist[0]));
}

TEST(PoS, InputValidation) {
  const Dataset data = small_gauss(13);
  const SlFit sl = fit_sl(data.labeled);
  EXPECT_THROW(fit_pos(data.labeled, sl.theta, {SurrogateFamily::gaussian}), DimensionMismatch);
  EXPECT_THROW(fit_pos(data.labeled, sl.theta, std::vector(3, SurrogateFamily::poisson)), InvalidArgument);
  EXPECT_THROW(fit_pos(data.labeled, sl.theta, std::vector(3, SurrogateFamily::logistic)), InvalidArgument);
}

TEST(Family, ParseAndPrint) {
  for (auto f : {SurrogateFamily::gaussian, SurrogateFamily::logistic, SurrogateFamily::poisson})
    EXPECT_EQ(parse_family(to_string(f)), f);
  EXPECT_THROW(parse_family("binomial"), InvalidArgument);
}
