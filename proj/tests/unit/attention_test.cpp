#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "spnet/attention.hpp"
#include "spnet/errors.hpp"
#include "spnet/gradcheck.hpp"
#include "test_support.hpp"

namespace spnet {
namespace {

TEST(GaussianAttention, IdenticalVectorsGiveOne) {
  const std::vector<double> a{0.1, 0.2, 0.3, 0.0, 0.0, 1.0};
  EXPECT_EQ(attention_gaussian(a, a, 0.04), 1.0);
}

TEST(GaussianAttention, NormOfTwoSigmaSquaredGivesInverseE) {
  const double sigma = 0.3;
  const std::vector<double> a{0, 0, 0};
  const std::vector<double> b{2.0 * sigma * sigma, 0, 0};
  EXPECT_NEAR(attention_gaussian(a, b, sigma), std::exp(-1.0), 1e-15);
}

TEST(GaussianAttention, DecreasesWithDistanceAndStaysInUnitInterval) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::vector<double> q{0, 0, 0, 0, 0, 0};
  for (int i = 0; i < 100; ++i) {
    std::vector<double> a(6), b(6);
    for (int c = 0; c < 6; ++c) {
      a[c] = u(rng);
      b[c] = u(rng);
    }
    double na = 0, nb = 0;
    for (int c = 0; c < 6; ++c) {
      na += a[c] * a[c];
      nb += b[c] * b[c];
    }
    const double wa = attention_gaussian(q, a, 0.8), wb = attention_gaussian(q, b, 0.8);
    EXPECT_GT(wa, 0.0);
    EXPECT_LE(wa, 1.0);
    if (na < nb) EXPECT_GT(wa, wb);
    if (nb < na) EXPECT_GT(wb, wa);
  }
}

TEST(GaussianAttention, RejectsBadSigma) {
  const std::vector<double> a{0.0};
  EXPECT_THROW(attention_gaussian(a, a, 0.0), ParameterError);
}

TEST(MlpAttention, ZeroNetworkGivesOneHalf) {
  std::mt19937_64 rng(1);
  AttentionMlp<double> mlp("a", 6, 8, 2, rng);
  for (auto& w : mlp.weights) w.value.setZero();
  const std::vector<double> q{0.3, 0.1, 0.9, 0, 1, 0}, n{0.5, 0.5, 0.5, 1, 0, 0};
  EXPECT_EQ(mlp.omega(q, n), 0.5);
}

TEST(MlpAttention, IdenticalVectorsWithZeroBiasesGiveOneHalf) {
  std::mt19937_64 rng(2);
  AttentionMlp<double> mlp("a", 6, 8, 2, rng);
  const std::vector<double> q{0.3, 0.1, 0.9, 0, 1, 0};
  EXPECT_EQ(mlp.omega(q, q), 0.5);
}

TEST(MlpAttention, OutputInOpenUnitInterval) {
  std::mt19937_64 rng(3);
  AttentionMlp<double> mlp("a", 6, 8, 2, rng);
  const Matrix<double> d = test::random_matrix<double>(500, 6, 4, -3.0, 3.0);
  typename AttentionMlp<double>::Cache cache;
  const Matrix<double> w = mlp.forward(d, cache);
  EXPECT_TRUE((w.array() > 0.0).all());
  EXPECT_TRUE((w.array() < 1.0).all());
}

TEST(MlpAttention, BackwardMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto problem = make_gradcheck_problem("attention", seed);
    const GradcheckReport r = gradcheck(*problem);
    EXPECT_TRUE(r.passed()) << r.to_text();
  }
}

TEST(ApplyAttention, ResidualForm) {
  const Matrix<double> f = test::random_matrix<double>(50, 5, 1);
  const std::vector<double> zeros(50, 0.0), ones(50, 1.0);
  EXPECT_TRUE((apply_attention<double>(f, zeros).array() == f.array()).all());
  EXPECT_TRUE((apply_attention<double>(f, ones).array() == (2.0 * f).array()).all());
}

TEST(ApplyAttention, RowNormsWithinOneAndTwoTimes) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Matrix<double> f = test::random_matrix<double>(200, 7, 2);
  std::vector<double> w(200);
  for (double& x : w) x = u(rng);
  const Matrix<double> out = apply_attention<double>(f, w);
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    const double n = f.row(i).norm(), m = out.row(i).norm();
    EXPECT_GE(m, n * (1.0 - 1e-15));
    EXPECT_LE(m, 2.0 * n * (1.0 + 1e-15));
  }
}

TEST(ApplyAttention, RejectsMismatchedWeights) {
  const std::vector<double> w(3, 0.5);
  EXPECT_THROW(apply_attention<double>(Matrix<double>::Zero(4, 2), w), ShapeError);
}

TEST(AttentionVariantNames, RoundTrip) {
  for (auto v : {AttentionVariant::none, AttentionVariant::gaussian, AttentionVariant::mlp2,
                 AttentionVariant::mlp3}) {
    EXPECT_EQ(parse_attention_variant(to_string(v)), v);
  }
  EXPECT_THROW(parse_attention_variant("mlp4"), ParameterError);
}

}  // namespace
}  // namespace spnet
