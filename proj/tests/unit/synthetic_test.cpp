#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <map>

#include "spnet/errors.hpp"
#include "spnet/synthetic.hpp"

namespace spnet {
namespace {

SyntheticSceneSpec single(std::size_t planes, std::size_t spheres, std::size_t boxes) {
  SyntheticSceneSpec s;
  s.planes = planes;
  s.spheres = spheres;
  s.boxes = boxes;
  s.points_per_primitive = 500;
  s.noise = 0.0;
  s.seed = 17;
  return s;
}

TEST(Synthetic, NoiselessPlaneIsFlat) {
  const PointCloud c = generate_scene(single(1, 0, 0));
  ASSERT_EQ(c.size(), 500u);
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : c.positions) mean += Eigen::Vector3d(p.data());
  mean /= static_cast<double>(c.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : c.positions) {
    const Eigen::Vector3d d = Eigen::Vector3d(p.data()) - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  const Eigen::Vector3d n = es.eigenvectors().col(0);
  for (const auto& p : c.positions) EXPECT_NEAR(n.dot(Eigen::Vector3d(p.data()) - mean), 0.0, 1e-12);
  for (auto l : c.labels) EXPECT_EQ(l, static_cast<std::int32_t>(PrimitiveClass::plane));
}

TEST(Synthetic, NoiselessSphereHasConstantRadius) {
  const PointCloud c = generate_scene(single(0, 1, 0));
  // Least-squares sphere fit: |p|^2 = 2 c.p + k.
  Eigen::MatrixXd a(static_cast<Eigen::Index>(c.size()), 4);
  Eigen::VectorXd b(static_cast<Eigen::Index>(c.size()));
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto& p = c.positions[i];
    a.row(static_cast<Eigen::Index>(i)) << 2 * p[0], 2 * p[1], 2 * p[2], 1.0;
    b(static_cast<Eigen::Index>(i)) = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
  }
  const Eigen::Vector4d x = a.colPivHouseholderQr().solve(b);
  const Vec3 center{x(0), x(1), x(2)};
  const double r = std::sqrt(x(3) + squared_norm(center));
  EXPECT_GE(r, 0.35 - 1e-9);
  EXPECT_LE(r, 0.5 + 1e-9);
  for (const auto& p : c.positions) EXPECT_NEAR(distance(p, center), r, 1e-9);
  for (auto l : c.labels) EXPECT_EQ(l, static_cast<std::int32_t>(PrimitiveClass::sphere));
}

TEST(Synthetic, LabelCountsMatchRequest) {
  SyntheticSceneSpec s;
  s.planes = 3;
  s.spheres = 1;
  s.boxes = 2;
  s.points_per_primitive = 250;
  s.seed = 4;
  const PointCloud c = generate_scene(s);
  std::map<std::int32_t, std::size_t> counts;
  for (auto l : c.labels) ++counts[l];
  EXPECT_EQ(counts[0], 750u);
  EXPECT_EQ(counts[1], 250u);
  EXPECT_EQ(counts[2], 500u);
  EXPECT_TRUE(c.has_colors());
  EXPECT_TRUE(c.has_normals());
  for (const auto& n : c.normals) EXPECT_NEAR(norm(n), 1.0, 1e-6);
}

TEST(Synthetic, DeterministicPerSeed) {
  SyntheticSceneSpec s;
  s.seed = 99;
  const PointCloud a = generate_scene(s), b = generate_scene(s);
  EXPECT_EQ(a.positions, b.positions);
  EXPECT_EQ(a.colors, b.colors);
  EXPECT_EQ(a.normals, b.normals);
  EXPECT_EQ(a.labels, b.labels);
  s.seed = 100;
  EXPECT_NE(generate_scene(s).positions, a.positions);
}

TEST(Synthetic, QuantizeSnapsToGrid) {
  SyntheticSceneSpec s;
  s.quantum = 0.25;
  s.points_per_primitive = 50;
  for (const auto& p : generate_scene(s).positions) {
    for (double v : p) EXPECT_EQ(v, std::round(v / 0.25) * 0.25);
  }
}

TEST(Synthetic, RejectsEmptyScene) {
  EXPECT_THROW(generate_scene(single(0, 0, 0)), ParameterError);
}

}  // namespace
}  // namespace spnet
