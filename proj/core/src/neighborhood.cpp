#include "spnet/neighborhood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "spnet/errors.hpp"

namespace spnet {
namespace {

// Cell sizes are inflated by this relative margin so that floating-point
// rounding in the cell index cannot push a true neighbour two cells away.
constexpr double kCellMargin = 1e-6;

void check_points(std::span<const Vec3> points, const char* what) {
  if (points.empty()) {
    throw InputError(std::string(what) + " point set is empty");
  }
  if (points.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw InputError(std::string(what) + " point set too large");
  }
  for (const Vec3& p : points) {
    if (!is_finite(p)) {
      throw InputError(std::string(what) + " contains non-finite coordinates");
    }
  }
}

void check_radius(double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw ParameterError("search radius must be positive and finite");
  }
}

std::int64_t to_cell_index(double v) {
  constexpr double kLimit = 4.0e18;
  const double f = std::floor(v);
  if (!(f < kLimit)) return static_cast<std::int64_t>(kLimit);
  if (!(f > -kLimit)) return -static_cast<std::int64_t>(kLimit);
  return static_cast<std::int64_t>(f);
}

}  // namespace

std::size_t SpatialGrid::CellHash::operator()(const Cell& c) const noexcept {
  std::uint64_t h = static_cast<std::uint64_t>(c.x) * 0x9E3779B97F4A7C15ULL;
  h ^= static_cast<std::uint64_t>(c.y) * 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
  h ^= static_cast<std::uint64_t>(c.z) * 0x165667B19E3779F9ULL + (h << 6) + (h >> 2);
  return static_cast<std::size_t>(h);
}

SpatialGrid::SpatialGrid(std::span<const Vec3> points, double cell_size)
    : cell_size_(cell_size) {
  origin_ = points.empty() ? Vec3{0, 0, 0} : points.front();
  for (const Vec3& p : points) {
    for (int d = 0; d < 3; ++d) origin_[d] = std::min(origin_[d], p[d]);
  }

  std::vector<Cell> cell_ids(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) cell_ids[i] = cell_of(points[i]);

  sorted_.resize(points.size());
  std::iota(sorted_.begin(), sorted_.end(), 0u);
  auto key = [&](std::uint32_t i) {
    const Cell& c = cell_ids[i];
    return std::tuple(c.x, c.y, c.z, i);
  };
  std::sort(sorted_.begin(), sorted_.end(),
            [&](std::uint32_t a, std::uint32_t b) { return key(a) < key(b); });

  cells_.reserve(points.size());
  if (!points.empty()) {
    lo_ = hi_ = cell_ids[sorted_.front()];
  }
  std::uint32_t begin = 0;
  for (std::uint32_t i = 1; i <= sorted_.size(); ++i) {
    if (i == sorted_.size() || !(cell_ids[sorted_[i]] == cell_ids[sorted_[begin]])) {
      const Cell& c = cell_ids[sorted_[begin]];
      cells_.emplace(c, Range{begin, i});
      lo_ = {std::min(lo_.x, c.x), std::min(lo_.y, c.y), std::min(lo_.z, c.z)};
      hi_ = {std::max(hi_.x, c.x), std::max(hi_.y, c.y), std::max(hi_.z, c.z)};
      begin = i;
    }
  }
}

SpatialGrid::Cell SpatialGrid::cell_of(const Vec3& p) const {
  return {to_cell_index((p[0] - origin_[0]) / cell_size_),
          to_cell_index((p[1] - origin_[1]) / cell_size_),
          to_cell_index((p[2] - origin_[2]) / cell_size_)};
}

std::span<const std::uint32_t> SpatialGrid::points_in(const Cell& cell) const {
  auto it = cells_.find(cell);
  if (it == cells_.end()) return {};
  return {sorted_.data() + it->second.begin, it->second.end - it->second.begin};
}

std::int64_t SpatialGrid::max_ring(const Cell& c) const {
  std::int64_t r = 0;
  r = std::max({r, c.x - lo_.x, hi_.x - c.x, c.y - lo_.y, hi_.y - c.y,
                c.z - lo_.z, hi_.z - c.z});
  return r;
}

NeighborhoodIndex radius_search(std::span<const Vec3> queries,
                                std::span<const Vec3> supports, double radius) {
  check_radius(radius);
  check_points(queries, "query");
  check_points(supports, "support");

  const SpatialGrid grid(supports, radius * (1.0 + kCellMargin));
  std::vector<std::vector<std::uint32_t>> lists(queries.size());

#pragma omp parallel for schedule(dynamic, 256)
  for (std::int64_t qi = 0; qi < static_cast<std::int64_t>(queries.size()); ++qi) {
    const Vec3& q = queries[qi];
    const SpatialGrid::Cell c = grid.cell_of(q);
    auto& out = lists[qi];
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          for (std::uint32_t s : grid.points_in({c.x + dx, c.y + dy, c.z + dz})) {
            if (distance(q, supports[s]) < radius) out.push_back(s);
          }
        }
      }
    }
    std::sort(out.begin(), out.end());
  }

  NeighborhoodIndex result;
  result.radius = radius;
  result.offsets.resize(queries.size() + 1);
  result.offsets[0] = 0;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    result.offsets[q + 1] = result.offsets[q] + lists[q].size();
  }
  result.indices.reserve(result.offsets.back());
  for (auto& list : lists) {
    result.indices.insert(result.indices.end(), list.begin(), list.end());
  }
  return result;
}

NeighborhoodIndex brute_force_radius_search(std::span<const Vec3> queries,
                                            std::span<const Vec3> supports,
                                            double radius) {
  check_radius(radius);
  check_points(queries, "query");
  check_points(supports, "support");

  NeighborhoodIndex result;
  result.radius = radius;
  result.offsets.assign(1, 0);
  for (const Vec3& q : queries) {
    for (std::uint32_t s = 0; s < supports.size(); ++s) {
      if (distance(q, supports[s]) < radius) result.indices.push_back(s);
    }
    result.offsets.push_back(result.indices.size());
  }
  return result;
}

KnnResult knn_search(std::span<const Vec3> queries,
                     std::span<const Vec3> supports, std::size_t k) {
  check_points(supports, "support");
  if (!queries.empty()) check_points(queries, "query");
  if (k == 0) throw ParameterError("k must be at least 1");
  k = std::min(k, supports.size());

  // Aim for a handful of points per occupied cell.
  Vec3 lo = supports.front(), hi = supports.front();
  for (const Vec3& p : supports) {
    for (int d = 0; d < 3; ++d) {
      lo[d] = std::min(lo[d], p[d]);
      hi[d] = std::max(hi[d], p[d]);
    }
  }
  const double extent = std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]});
  double cell = extent > 0.0
                    ? extent / std::max(1.0, std::cbrt(static_cast<double>(supports.size())))
                    : 1.0;
  SpatialGrid grid(supports, cell);
  // Surface-like data concentrates in few cells; refine once for it.
  const double per_cell =
      static_cast<double>(supports.size()) / static_cast<double>(grid.occupied_cells());
  const double target = std::max<double>(4.0, static_cast<double>(k));
  if (extent > 0.0 && per_cell > 2.0 * target) {
    cell /= std::sqrt(per_cell / target);
    grid = SpatialGrid(supports, cell);
  }

  KnnResult result;
  result.k = k;
  result.indices.resize(queries.size() * k);
  result.distances.resize(queries.size() * k);

#pragma omp parallel for schedule(dynamic, 256)
  for (std::int64_t qi = 0; qi < static_cast<std::int64_t>(queries.size()); ++qi) {
    const Vec3& q = queries[qi];
    const SpatialGrid::Cell c = grid.cell_of(q);
    const std::int64_t last_ring = grid.max_ring(c);
    std::vector<std::pair<double, std::uint32_t>> best;
    best.reserve(k + 1);
    auto offer = [&](std::uint32_t s) {
      std::pair<double, std::uint32_t> cand{distance(q, supports[s]), s};
      if (best.size() == k && !(cand < best.back())) return;
      best.insert(std::upper_bound(best.begin(), best.end(), cand), cand);
      if (best.size() > k) best.pop_back();
    };
    for (std::int64_t r = 0; r <= last_ring; ++r) {
      for (std::int64_t dx = -r; dx <= r; ++dx) {
        for (std::int64_t dy = -r; dy <= r; ++dy) {
          const bool edge = std::abs(dx) == r || std::abs(dy) == r;
          for (std::int64_t dz = -r; dz <= r; dz += (edge || r == 0) ? 1 : 2 * r) {
            for (std::uint32_t s : grid.points_in({c.x + dx, c.y + dy, c.z + dz})) offer(s);
          }
        }
      }
      // Unvisited cells lie at least r cells away along some axis.
      if (best.size() == k &&
          best.back().first < (static_cast<double>(r) - 1e-3) * grid.cell_size()) {
        break;
      }
    }
    for (std::size_t j = 0; j < k; ++j) {
      result.indices[qi * k + j] = best[j].second;
      result.distances[qi * k + j] = best[j].first;
    }
  }
  return result;
}

}  // namespace spnet
