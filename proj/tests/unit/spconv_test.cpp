#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "reference.hpp"
#include "spnet/conv_geometry.hpp"
#include "spnet/errors.hpp"
#include "spnet/neighborhood.hpp"
#include "spnet/spconv.hpp"
#include "spnet/synthetic.hpp"
#include "test_support.hpp"

namespace spnet {
namespace {

constexpr double kV = 0.1;

KernelLayout default_layout(std::uint64_t seed = 42) {
  const std::vector<double> radii{1.5 * kV, 3.0 * kV};
  return build_layout(3, 14, radii, kV, seed);
}

double max_rel(const Matrix<double>& a, const Matrix<double>& b) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

struct Instance {
  std::vector<Vec3> queries, supports;
  Matrix<double> x, qa, sa;
  ConvGeometry geometry;
};

Instance make_instance(const KernelLayout& layout, std::size_t nq, std::size_t ns, std::size_t cin,
                       std::uint64_t seed) {
  Instance in;
  in.supports = test::random_points(ns, seed, 0.6);
  in.queries = test::random_points(nq, seed + 1000, 0.6);
  in.x = test::random_matrix<double>(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(cin), seed + 1);
  in.qa = test::random_matrix<double>(static_cast<Eigen::Index>(nq), 6, seed + 2, 0.0, 1.0);
  in.sa = test::random_matrix<double>(static_cast<Eigen::Index>(ns), 6, seed + 3, 0.0, 1.0);
  const auto nb = radius_search(in.queries, in.supports, 4.0 * kV);
  in.geometry = build_conv_geometry(layout, in.queries, in.supports, nb);
  return in;
}

test::RefSPConv reference_of(SPConv<double>& conv, const KernelLayout& layout) {
  test::RefSPConv r;
  r.layout = &layout;
  r.query_radius = 4.0 * kV;
  r.w1 = conv.w1.value;
  r.w2 = conv.w2.value;
  r.sigma = conv.attention().sigma;
  switch (conv.attention().variant) {
    case AttentionVariant::none:
      r.attention = test::RefAttention::none;
      break;
    case AttentionVariant::gaussian:
      r.attention = test::RefAttention::gaussian;
      break;
    default:
      r.attention = test::RefAttention::mlp;
      for (std::size_t i = 0; i < conv.mlp->weights.size(); ++i) {
        r.mlp.weights.push_back(conv.mlp->weights[i].value);
        r.mlp.biases.push_back(conv.mlp->biases[i].value);
      }
  }
  return r;
}

TEST(Aggregate, NoNeighboursGivesZeros) {
  const KernelLayout l = default_layout();
  const Matrix<double> f(0, 4);
  const Matrix<double> agg = aggregate<double>(l, {0, 0, 0}, {}, f);
  EXPECT_EQ(agg.rows(), 29);
  EXPECT_EQ(agg.cols(), 4);
  EXPECT_TRUE((agg.array() == 0.0).all());
}

TEST(Aggregate, NeighbourOnKernelPoint) {
  const KernelLayout l = default_layout();
  const Vec3 q{1, 2, 3};
  const std::size_t k = 5;
  const std::vector<Vec3> nb{q + l.points[k]};
  Matrix<double> f(1, 3);
  f << 0.5, -2.0, 4.0;
  const Matrix<double> agg = aggregate<double>(l, q, nb, f);
  EXPECT_TRUE(agg.row(static_cast<Eigen::Index>(k)).isApprox(f.row(0), 1e-12));
  for (std::size_t j = 0; j < l.total_kernel_count(); ++j) {
    const double c = test::ref_correlation(l.points[j], l.points[k], kV);
    EXPECT_NEAR((agg.row(static_cast<Eigen::Index>(j)) - c * f.row(0)).cwiseAbs().maxCoeff(), 0.0, 1e-12);
  }
}

TEST(Aggregate, MatchesDoubleLoop) {
  const KernelLayout l = default_layout();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 0.12);
  const Vec3 q{0.3, -0.1, 0.7};
  std::vector<Vec3> nb;
  for (int i = 0; i < 20; ++i) nb.push_back(q + Vec3{g(rng), g(rng), g(rng)});
  const Matrix<double> f = test::random_matrix<double>(20, 5, 6);
  const Matrix<double> agg = aggregate<double>(l, q, nb, f);
  Matrix<double> ref = Matrix<double>::Zero(29, 5);
  for (std::size_t k = 0; k < 29; ++k) {
    for (std::size_t j = 0; j < nb.size(); ++j) {
      const double c = test::ref_correlation(l.points[k], nb[j] - q, kV);
      for (int ch = 0; ch < 5; ++ch) ref(static_cast<Eigen::Index>(k), ch) += c * f(static_cast<Eigen::Index>(j), ch);
    }
  }
  EXPECT_LT(max_rel(agg, ref), 1e-12);
}

TEST(Aggregate, PermutationIsBitIdentical) {
  const KernelLayout l = default_layout();
  const Vec3 q{0, 0, 0};
  auto nb = test::random_points(40, 8, 0.3);
  for (auto& p : nb) p = p - Vec3{0.15, 0.15, 0.15};
  const Matrix<double> f = test::random_matrix<double>(40, 4, 9);
  const Matrix<double> a = aggregate<double>(l, q, nb, f);
  std::vector<std::size_t> perm(40);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::uint64_t s = 0; s < 10; ++s) {
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(s));
    std::vector<Vec3> pn(40);
    Matrix<double> pf(40, 4);
    for (std::size_t i = 0; i < 40; ++i) {
      pn[i] = nb[perm[i]];
      pf.row(static_cast<Eigen::Index>(i)) = f.row(static_cast<Eigen::Index>(perm[i]));
    }
    EXPECT_TRUE((aggregate<double>(l, q, pn, pf).array() == a.array()).all());
  }
}

TEST(Aggregate, RejectsMismatchedRows) {
  const KernelLayout l = default_layout();
  const std::vector<Vec3> nb{{0, 0, 0}};
  EXPECT_THROW(aggregate<double>(l, {0, 0, 0}, nb, Matrix<double>(2, 3)), ShapeError);
}

class SPConvOracle : public ::testing::TestWithParam<AttentionVariant> {};

TEST_P(SPConvOracle, ForwardMatchesScalarReference) {
  const KernelLayout l = default_layout();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    AttentionConfig att;
    att.variant = GetParam();
    att.sigma = 0.7;
    SPConv<double> conv("c", l, 4, 8, att, {}, rng);
    if (conv.mlp) {
      for (auto& b : conv.mlp->biases) b.value = test::random_matrix<double>(1, b.value.cols(), seed + 50, -0.2, 0.2);
    }
    Instance in = make_instance(l, 12, 60, 4, seed * 17 + 1);
    const Matrix<double> out = conv.forward(in.x, in.geometry, {&in.qa, &in.sa}, NormMode::identity);
    const Matrix<double> ref =
        test::ref_spconv_forward(reference_of(conv, l), in.queries, in.supports, in.x, &in.qa, &in.sa);
    ASSERT_EQ(out.rows(), 12);
    ASSERT_EQ(out.cols(), 8);
    EXPECT_LT(max_rel(out, ref), 1e-12) << "seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(Variants, SPConvOracle,
                         ::testing::Values(AttentionVariant::none, AttentionVariant::gaussian,
                                           AttentionVariant::mlp2, AttentionVariant::mlp3),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(SPConv, SingleShellReducesToPointConvolution) {
  const KernelLayout l = build_layout(1, 0, {}, kV, 1);
  std::mt19937_64 rng(3);
  SPConvOptions opt;
  opt.activation = false;
  SPConv<double> conv("c", l, 3, 4, {}, opt, rng);
  conv.w2.value = Matrix<double>::Identity(2, 4);
  Instance in = make_instance(l, 20, 80, 3, 4);
  const Matrix<double> out = conv.forward(in.x, in.geometry, {}, NormMode::identity);
  const Matrix<double> ref = test::ref_point_conv(l, 4.0 * kV, in.queries, in.supports, in.x, conv.w1.value);
  EXPECT_LT(max_rel(out.leftCols(2), ref), 1e-12);
  EXPECT_TRUE((out.rightCols(2).array() == 0.0).all());
}

TEST(SPConv, ZeroAggregateGivesZeroOutput) {
  const KernelLayout l = default_layout();
  std::mt19937_64 rng(1);
  SPConv<double> conv("c", l, 4, 8, {}, {}, rng);
  const Matrix<double> out = conv.convolve(Matrix<double>::Zero(10, 29 * 4), NormMode::identity);
  EXPECT_TRUE((out.array() == 0.0).all());
}

TEST(SPConv, ZeroUpstreamGradientGivesZeroGradients) {
  const KernelLayout l = default_layout();
  std::mt19937_64 rng(1);
  AttentionConfig att;
  att.variant = AttentionVariant::mlp3;
  SPConv<double> conv("c", l, 4, 8, att, {}, rng);
  Instance in = make_instance(l, 16, 50, 4, 2);
  ParameterList<double> params;
  conv.collect(params);
  for (auto* p : params) p->zero_grad();
  const Matrix<double> out = conv.forward(in.x, in.geometry, {&in.qa, &in.sa}, NormMode::identity);
  const Matrix<double> dx = conv.backward(Matrix<double>::Zero(out.rows(), out.cols()));
  EXPECT_TRUE((dx.array() == 0.0).all());
  for (auto* p : params) EXPECT_TRUE((p->grad.array() == 0.0).all()) << p->name;
}

TEST(SPConv, FarNeighbourGetsNoGradientAndNoInfluence) {
  const KernelLayout l = default_layout();
  std::mt19937_64 rng(2);
  AttentionConfig att;
  att.variant = AttentionVariant::gaussian;
  att.sigma = 1.0;
  SPConv<double> conv("c", l, 3, 6, att, {}, rng);
  // Supports at distance 3.95 v from the query: inside R = 4 v, outside r_3 + v.
  const std::vector<Vec3> q{{0, 0, 0}};
  std::vector<Vec3> s = test::random_points(30, 3, 0.25);
  s.push_back({3.95 * kV, 0, 0});
  NeighborhoodIndex nb = radius_search(q, s, 4.0 * kV);
  ASSERT_EQ(nb.neighbors(0).back(), 30u);
  const ConvGeometry g = build_conv_geometry(l, q, s, nb);
  Matrix<double> x = test::random_matrix<double>(31, 3, 4);
  const Matrix<double> qa = test::random_matrix<double>(1, 6, 5);
  const Matrix<double> sa = test::random_matrix<double>(31, 6, 6);
  const Matrix<double> out = conv.forward(x, g, {&qa, &sa}, NormMode::identity);
  const Matrix<double> dx = conv.backward(Matrix<double>::Ones(1, 6));
  EXPECT_TRUE((dx.row(30).array() == 0.0).all());
  x.row(30).setConstant(1e6);
  EXPECT_TRUE((conv.forward(x, g, {&qa, &sa}, NormMode::identity).array() == out.array()).all());
}

TEST(SPConv, TranslationIsBitIdenticalOnQuantizedPositions) {
  const KernelLayout l = default_layout();
  std::mt19937_64 rng(7);
  SPConv<double> conv("c", l, 4, 8, {}, {}, rng);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    PointCloud c;
    c.positions = test::random_points(80, seed, 0.6);
    quantize_positions(c, std::ldexp(1.0, -20));
    const Matrix<double> x = test::random_matrix<double>(80, 4, seed + 9);
    auto run = [&](const std::vector<Vec3>& p) {
      const ConvGeometry g = build_conv_geometry(l, p, p, radius_search(p, p, 4.0 * kV));
      return conv.forward(x, g, {}, NormMode::identity);
    };
    std::vector<Vec3> moved = c.positions;
    for (auto& p : moved) p = p + Vec3{10, 10, 10};
    EXPECT_TRUE((run(c.positions).array() == run(moved).array()).all()) << seed;
  }
}

TEST(SPConv, RejectsBadShapes) {
  const KernelLayout l = default_layout();
  std::mt19937_64 rng(1);
  EXPECT_THROW(SPConv<double>("c", l, 4, 7, {}, {}, rng), ParameterError);
  AttentionConfig att;
  att.variant = AttentionVariant::gaussian;
  att.sigma = 0.0;
  EXPECT_THROW(SPConv<double>("c", l, 4, 8, att, {}, rng), ParameterError);
  SPConv<double> conv("c", l, 4, 8, {}, {}, rng);
  Instance in = make_instance(l, 4, 20, 3, 1);
  EXPECT_THROW(conv.forward(in.x, in.geometry, {}, NormMode::identity), ShapeError);
  EXPECT_THROW(conv.backward(Matrix<double>::Zero(4, 8)), StateError);
}

}  // namespace
}  // namespace spnet
