#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "spnet/errors.hpp"
#include "spnet/neighborhood.hpp"
#include "test_support.hpp"

namespace spnet {
namespace {

std::set<std::uint32_t> as_set(std::span<const std::uint32_t> s) { return {s.begin(), s.end()}; }

// All-pairs oracle written independently of the library.
std::vector<std::set<std::uint32_t>> naive(const std::vector<Vec3>& q, const std::vector<Vec3>& s,
                                           double r) {
  std::vector<std::set<std::uint32_t>> out(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      const double dx = q[i][0] - s[j][0], dy = q[i][1] - s[j][1], dz = q[i][2] - s[j][2];
      if (std::sqrt(dx * dx + dy * dy + dz * dz) < r) out[i].insert(static_cast<std::uint32_t>(j));
    }
  }
  return out;
}

TEST(RadiusSearch, KeepsOnlyPointsInsideTheBall) {
  const std::vector<Vec3> q{{0, 0, 0}};
  const std::vector<Vec3> s{{0, 0, 0.5}, {0, 0, 2}};
  const auto idx = radius_search(q, s, 1.0);
  ASSERT_EQ(idx.query_count(), 1u);
  EXPECT_EQ(std::vector<std::uint32_t>(idx.neighbors(0).begin(), idx.neighbors(0).end()),
            std::vector<std::uint32_t>{0});
}

TEST(RadiusSearch, BoundaryIsExcluded) {
  const std::vector<Vec3> q{{0, 0, 0}};
  const std::vector<Vec3> s{{0, 0, 1}, {0, 0.5, 0}};
  const auto idx = radius_search(q, s, 1.0);
  EXPECT_EQ(as_set(idx.neighbors(0)), (std::set<std::uint32_t>{1}));
}

TEST(RadiusSearch, MatchesNaiveOracleOnUnitCube) {
  const auto pts = test::random_points(1000, 11);
  const auto idx = radius_search(pts, pts, 0.1);
  const auto ref = naive(pts, pts, 0.1);
  for (std::size_t i = 0; i < pts.size(); ++i) ASSERT_EQ(as_set(idx.neighbors(i)), ref[i]) << i;
}

TEST(RadiusSearch, TinyRadiusGivesEmptyLists) {
  const auto pts = test::random_points(200, 3);
  const auto q = test::random_points(50, 4);
  const auto idx = radius_search(q, pts, 1e-9);
  for (std::size_t i = 0; i < q.size(); ++i) EXPECT_TRUE(idx.neighbors(i).empty());
}

TEST(RadiusSearch, IndependentOfSupportOrder) {
  auto s = test::random_points(500, 5);
  const auto q = test::random_points(100, 6);
  const auto a = radius_search(q, s, 0.15);
  std::vector<std::uint32_t> perm(s.size());
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(9));
  std::vector<Vec3> shuffled(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) shuffled[i] = s[perm[i]];
  const auto b = radius_search(q, shuffled, 0.15);
  for (std::size_t i = 0; i < q.size(); ++i) {
    std::set<std::uint32_t> mapped;
    for (auto j : b.neighbors(i)) mapped.insert(perm[j]);
    EXPECT_EQ(as_set(a.neighbors(i)), mapped);
  }
}

TEST(RadiusSearch, ListsAreSortedAscending) {
  const auto pts = test::random_points(300, 8);
  const auto idx = radius_search(pts, pts, 0.2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto n = idx.neighbors(i);
    EXPECT_TRUE(std::is_sorted(n.begin(), n.end()));
  }
}

TEST(RadiusSearch, RejectsNonPositiveRadius) {
  const auto pts = test::random_points(10, 1);
  EXPECT_THROW(radius_search(pts, pts, 0.0), ParameterError);
  EXPECT_THROW(radius_search(pts, pts, -1.0), ParameterError);
}

TEST(BruteForce, QueryAtSupportContainsIt) {
  const std::vector<Vec3> s{{0.3, 0.2, 0.1}, {5, 5, 5}};
  const std::vector<Vec3> q{{0.3, 0.2, 0.1}};
  EXPECT_EQ(as_set(brute_force_radius_search(q, s, 0.01).neighbors(0)), (std::set<std::uint32_t>{0}));
}

TEST(BruteForce, SupportBeyondRadiusGivesEmptyList) {
  const std::vector<Vec3> s{{2, 0, 0}};
  const std::vector<Vec3> q{{0, 0, 0}};
  EXPECT_TRUE(brute_force_radius_search(q, s, 1.0).neighbors(0).empty());
}

TEST(BruteForce, AgreesWithGridSearch) {
  const auto pts = test::random_points(100, 21);
  const auto a = brute_force_radius_search(pts, pts, 0.2);
  const auto b = radius_search(pts, pts, 0.2);
  const auto ref = naive(pts, pts, 0.2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_EQ(as_set(a.neighbors(i)), ref[i]);
    EXPECT_EQ(as_set(b.neighbors(i)), ref[i]);
  }
}

TEST(Knn, ReturnsNearestFirst) {
  const auto s = test::random_points(400, 31);
  const auto q = test::random_points(40, 32);
  const auto res = knn_search(q, s, 5);
  for (std::size_t i = 0; i < q.size(); ++i) {
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::size_t j = 0; j < s.size(); ++j) all.push_back({distance(q[i], s[j]), static_cast<std::uint32_t>(j)});
    std::sort(all.begin(), all.end());
    const auto d = res.neighbor_distances(i);
    for (std::size_t k = 0; k < 5; ++k) EXPECT_DOUBLE_EQ(d[k], all[k].first);
  }
}

}  // namespace
}  // namespace spnet
