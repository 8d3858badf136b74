#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "spnet/errors.hpp"
#include "spnet/pyramid.hpp"
#include "test_support.hpp"

namespace spnet {
namespace {

NetworkSpec small_spec() {
  NetworkSpec s;
  s.levels = 4;
  s.base_channels = 4;
  return s;
}

TEST(Pyramid, SinglePointSurvivesEveryLevel) {
  const NetworkSpec s = small_spec();
  const auto layouts = build_level_layouts(s);
  const Pyramid p = build_pyramid(s, layouts, test::random_cloud(1, 1));
  ASSERT_EQ(p.levels.size(), 4u);
  for (const auto& lv : p.levels) EXPECT_EQ(lv.positions.size(), 1u);
}

TEST(Pyramid, LevelsShrinkAndNest) {
  NetworkSpec s = small_spec();
  s.levels = 5;
  const auto layouts = build_level_layouts(s);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const PointCloud cloud = test::random_cloud(10000, seed);
    const Pyramid p = build_pyramid(s, layouts, cloud);
    for (std::size_t l = 1; l < p.levels.size(); ++l) {
      EXPECT_LE(p.levels[l].positions.size(), p.levels[l - 1].positions.size());
      ASSERT_EQ(p.levels[l].parent.size(), p.levels[l].positions.size());
      for (std::size_t i = 0; i < p.levels[l].positions.size(); ++i) {
        EXPECT_EQ(p.levels[l].positions[i], p.levels[l - 1].positions[p.levels[l].parent[i]]);
      }
    }
    // Level 0 holds every input point.
    std::vector<Vec3> a = p.levels[0].positions, b = cloud.positions;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
  }
}

TEST(Pyramid, CanonicalOrderIgnoresInputOrder) {
  const PointCloud cloud = test::random_cloud(500, 3);
  std::vector<std::size_t> perm(cloud.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(4));
  const PointCloud shuffled = cloud.subset(perm);
  const auto a = canonical_order(cloud), b = canonical_order(shuffled);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], perm[b[i]]);
}

TEST(Pyramid, MissingAttributesAreNamed) {
  const NetworkSpec s = small_spec();
  const auto layouts = build_level_layouts(s);
  PointCloud c;
  c.positions = test::random_points(10, 1);
  try {
    build_pyramid(s, layouts, c);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("colors"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("normals"), std::string::npos);
  }
}

TEST(Pyramid, MergeKeepsScenesApart) {
  const NetworkSpec s = small_spec();
  const auto layouts = build_level_layouts(s);
  const Pyramid a = build_pyramid(s, layouts, test::random_cloud(300, 1));
  const Pyramid b = build_pyramid(s, layouts, test::random_cloud(200, 2));
  const Pyramid* parts[] = {&a, &b};
  const Pyramid m = merge_pyramids(parts);
  EXPECT_EQ(m.point_count(), 500u);
  EXPECT_EQ(m.scene_sizes, (std::vector<std::size_t>{300, 200}));
  EXPECT_EQ(m.conv[0].pair_count(), a.conv[0].pair_count() + b.conv[0].pair_count());
  for (std::size_t p = 0; p < m.conv[0].pair_count(); ++p) {
    EXPECT_EQ(m.conv[0].pair_query[p] < 300, m.conv[0].pair_support[p] < 300);
  }
}

}  // namespace
}  // namespace spnet
