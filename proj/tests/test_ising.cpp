#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "sciss/ising.hpp"
#include "sciss/simulation.hpp"
#include "test_support.hpp"

using namespace sciss;
using sciss::testing::random_ising;
using sciss::testing::random_w;

namespace {

const Vec kOne = Vec::Ones(1);

// log P(y_j = 1 | rest) / P(y_j = 0 | rest) straight from the joint pmf.
double pmf_logodds(const Vec& pmf, int j, std::uint32_t rest_index) {
  const std::uint32_t on = rest_index | (1u << j);
  const std::uint32_t off = rest_index & ~(1u << j);
  return std::log(pmf[on] / pmf[off]);
}

}  // namespace

TEST(OutcomeConfig, IndexOrderY1LeastSignificant) {
  const OutcomeConfig y(3, 0b101);
  EXPECT_EQ(y[0], 1);
  EXPECT_EQ(y[1], 0);
  EXPECT_EQ(y[2], 1);
  EXPECT_EQ(OutcomeConfig::from_bits({1, 0, 1}).index(), 5u);
  EXPECT_EQ(y.flipped(1).index(), 7u);
  EXPECT_EQ(y.bits(), (std::vector<int>{1, 0, 1}));
}

TEST(OutcomeConfig, RejectsBadBits) {
  EXPECT_THROW(OutcomeConfig::from_bits({1, 2}), InvalidArgument);
  EXPECT_THROW(OutcomeConfig(2, 4u), InvalidArgument);
}

TEST(IsingParams, ValidationAndFromMatrix) {
  const IsingParams t = main_study_theta();
  EXPECT_NO_THROW(t.validate());
  EXPECT_DOUBLE_EQ(t.node_coefs[1][0], -0.3);
  EXPECT_DOUBLE_EQ(t.pair_coefs(0, 2), -0.6);
  IsingParams bad = t;
  bad.pair_coefs(0, 1) = 0.31;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  Mat asym = Mat::Zero(2, 2);
  asym(0, 1) = 1;
  EXPECT_THROW(IsingParams::from_matrix(asym), InvalidArgument);
}

TEST(Adjustment, InterceptRequired) {
  Vec w(2);
  w << 0.5, 1.0;
  EXPECT_THROW(validate_adjustment(w, 1), InvalidArgument);
  EXPECT_THROW(validate_adjustment(Vec::Ones(3), 1), DimensionMismatch);
}

TEST(LogUnnormalized, ZeroTheta) {
  const IsingParams t(3, 0);
  for (std::uint32_t c = 0; c < 8; ++c) EXPECT_EQ(log_unnormalized(t, OutcomeConfig(3, c), kOne), 0.0);
}

TEST(LogUnnormalized, TwoNodeFormula) {
  IsingParams t(2, 0);
  t.node_coefs[0][0] = 0.7;
  t.node_coefs[1][0] = -0.2;
  t.pair_coefs(0, 1) = t.pair_coefs(1, 0) = 1.3;
  EXPECT_DOUBLE_EQ(log_unnormalized(t, OutcomeConfig(2, 3), kOne), 0.7 - 0.2 + 1.3);
}

TEST(LogUnnormalized, MainStudyTheta) {
  EXPECT_NEAR(log_unnormalized(main_study_theta(), OutcomeConfig::from_bits({1, 0, 1}), kOne), -0.3, 1e-15);
}

TEST(LogUnnormalized, DimensionMismatch) {
  EXPECT_THROW(log_unnormalized(main_study_theta(), OutcomeConfig(2, 0), kOne), DimensionMismatch);
  EXPECT_THROW(log_unnormalized(main_study_theta(), OutcomeConfig(3, 0), Vec::Ones(2)), DimensionMismatch);
}

TEST(JointPmf, ZeroThetaIsUniform) {
  const Vec p = joint_pmf(IsingParams(3, 0), kOne);
  for (double v : p) EXPECT_NEAR(v, 0.125, 1e-15);
  EXPECT_NEAR(joint_pmf(IsingParams(1, 0), kOne)[1], 0.5, 1e-15);
}

// Enumeration oracle: P(y) proportional to exp(log_unnormalized).
TEST(JointPmf, MatchesExplicitNormalization) {
  const IsingParams t = main_study_theta();
  const Vec p = joint_pmf(t, kOne);
  double z = 0.0;
  for (std::uint32_t c = 0; c < 8; ++c) z += std::exp(log_unnormalized(t, OutcomeConfig(3, c), kOne));
  for (std::uint32_t c = 0; c < 8; ++c)
    EXPECT_NEAR(p[c], std::exp(log_unnormalized(t, OutcomeConfig(3, c), kOne)) / z, 1e-15);
  EXPECT_NEAR(p.sum(), 1.0, 1e-12);
}

TEST(JointPmf, NormalizesForRandomTheta) {
  std::mt19937_64 rng(17);
  for (int q = 1; q <= 8; ++q)
    for (int rep = 0; rep < 10; ++rep) {
      const IsingParams t = random_ising(rng, q, 1, 3.0);
      const Vec p = joint_pmf(t, random_w(rng, 1));
      EXPECT_NEAR(p.sum(), 1.0, 1e-12);
      EXPECT_GE(p.minCoeff(), 0.0);
    }
}

TEST(JointPmf, QTooLarge) {
  EXPECT_THROW(joint_pmf(IsingParams(16, 0), kOne), QTooLarge);
  std::mt19937_64 rng(1);
  EXPECT_THROW(sample(IsingParams(16, 0), kOne, rng, 1), QTooLarge);
}

// Relabeling nodes permutes the pmf the same way.
TEST(JointPmf, PermutationProperty) {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    const int q = 4;
    const IsingParams t = random_ising(rng, q, 0, 2.0);
    std::vector<int> perm(q);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    IsingParams u(q, 0);
    for (int j = 0; j < q; ++j) {
      u.node_coefs[perm[j]] = t.node_coefs[j];
      for (int k = 0; k < q; ++k) u.pair_coefs(perm[j], perm[k]) = t.pair_coefs(j, k);
    }
    const Vec pt = joint_pmf(t, kOne);
    const Vec pu = joint_pmf(u, kOne);
    for (std::uint32_t c = 0; c < 16; ++c) {
      std::uint32_t d = 0;
      for (int j = 0; j < q; ++j)
        if ((c >> j) & 1u) d |= 1u << perm[j];
      EXPECT_NEAR(pt[c], pu[d], 1e-14);
    }
  }
}

TEST(ConditionalLogodds, ZeroTheta) {
  EXPECT_EQ(conditional_logodds(IsingParams(3, 0), 1, OutcomeConfig(3, 5), kOne), 0.0);
}

TEST(ConditionalLogodds, FlipChangesByPairCoef) {
  const IsingParams t = main_study_theta();
  const OutcomeConfig y(3, 0);
  EXPECT_NEAR(conditional_logodds(t, 0, y.flipped(2), kOne) - conditional_logodds(t, 0, y, kOne), t.pair_coefs(0, 2),
              1e-15);
}

TEST(ConditionalLogodds, MainStudyExample) {
  const IsingParams t = main_study_theta();
  const OutcomeConfig rest = OutcomeConfig::from_bits({0, 1, 0});
  EXPECT_NEAR(conditional_logodds(t, 0, rest, kOne), 0.4, 1e-15);
  EXPECT_NEAR(pmf_logodds(joint_pmf(t, kOne), 0, rest.index()), 0.4, 1e-10);
}

// Exhaustive joint-pmf oracle for every node and rest configuration, q <= 6.
TEST(ConditionalLogodds, MatchesJointPmfExhaustively) {
  std::mt19937_64 rng(29);
  for (int q = 1; q <= 6; ++q)
    for (int rep = 0; rep < 5; ++rep) {
      const IsingParams t = random_ising(rng, q, 2, 1.5);
      const Vec w = random_w(rng, 2);
      const Vec pmf = joint_pmf(t, w);
      for (int j = 0; j < q; ++j)
        for (std::uint32_t c = 0; c < config_count(q); ++c) {
          if ((c >> j) & 1u) continue;
          EXPECT_NEAR(conditional_logodds(t, j, OutcomeConfig(q, c), w), pmf_logodds(pmf, j, c), 1e-10);
        }
    }
}

TEST(Sampler, UniformFrequencies) {
  std::mt19937_64 rng(31);
  const auto draws = sample(IsingParams(3, 0), kOne, rng, 100000);
  std::vector<int> counts(8, 0);
  for (const auto& y : draws) ++counts[y.index()];
  for (int c : counts) EXPECT_NEAR(c / 1e5, 0.125, 0.01);
}

TEST(Sampler, Saturation) {
  IsingParams t(2, 0);
  t.node_coefs[0][0] = 20.0;
  std::mt19937_64 rng(37);
  for (const auto& y : sample(t, kOne, rng, 10000)) EXPECT_EQ(y[0], 1);
}

TEST(Sampler, MatchesExactPmf) {
  const IsingParams t = main_study_theta();
  const Vec pmf = joint_pmf(t, kOne);
  std::mt19937_64 rng(41);
  const std::size_t n = 1000000;
  const auto draws = sample(t, kOne, rng, n);
  std::vector<double> counts(8, 0.0);
  for (const auto& y : draws) counts[y.index()] += 1.0;
  for (std::uint32_t c = 0; c < 8; ++c) {
    const double p = pmf[c];
    EXPECT_NEAR(counts[c] / static_cast<double>(n), p, 3.0 * std::sqrt(p * (1 - p) / static_cast<double>(n)));
  }
}

TEST(NodeLayout, StackedVectorOrder) {
  const NodeLayout lay{3, 1};
  Vec w(2);
  w << 1.0, 0.5;
  const Vec v = lay.stacked(1, OutcomeConfig::from_bits({1, 0, 1}), w);
  ASSERT_EQ(v.size(), 4);
  EXPECT_EQ(v[0], 1.0);  // y1
  EXPECT_EQ(v[1], 1.0);  // w0
  EXPECT_EQ(v[2], 0.5);  // w1
  EXPECT_EQ(v[3], 1.0);  // y3
  EXPECT_EQ(lay.partner_pos(1, 0), 0);
  EXPECT_EQ(lay.partner_pos(1, 2), 3);
  EXPECT_EQ(lay.node_offset(1), 1);
}

TEST(IsingParams, NodeVectorMatchesLayout) {
  const IsingParams t = main_study_theta();
  const Vec v = t.node_vector(2);
  EXPECT_DOUBLE_EQ(v[0], -0.6);
  EXPECT_DOUBLE_EQ(v[1], 0.4);
  EXPECT_DOUBLE_EQ(v[2], 0.2);
}
