#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "spnet/point_cloud.hpp"

namespace spnet {

// Radius-search result in CSR form. Lists are sorted by ascending support
// index, which the convolution relies on for a fixed summation order.
struct NeighborhoodIndex {
  double radius = 0.0;
  std::vector<std::size_t> offsets{0};  // query_count() + 1 entries
  std::vector<std::uint32_t> indices;

  std::size_t query_count() const { return offsets.size() - 1; }
  std::span<const std::uint32_t> neighbors(std::size_t query) const {
    return {indices.data() + offsets[query],
            offsets[query + 1] - offsets[query]};
  }
};

// Uniform hash grid over a fixed point set.
class SpatialGrid {
 public:
  struct Cell {
    std::int64_t x, y, z;
    bool operator==(const Cell&) const = default;
  };

  SpatialGrid(std::span<const Vec3> points, double cell_size);

  Cell cell_of(const Vec3& p) const;
  double cell_size() const { return cell_size_; }
  std::size_t occupied_cells() const { return cells_.size(); }

  // Indices of the points stored in `cell`, ascending.
  std::span<const std::uint32_t> points_in(const Cell& cell) const;

  // Chebyshev radius (in cells) beyond which no stored point exists, seen
  // from `cell`.
  std::int64_t max_ring(const Cell& cell) const;

 private:
  struct CellHash {
    std::size_t operator()(const Cell& c) const noexcept;
  };
  struct Range {
    std::uint32_t begin, end;
  };

  double cell_size_;
  Vec3 origin_{};
  Cell lo_{}, hi_{};
  std::vector<std::uint32_t> sorted_;
  std::unordered_map<Cell, Range, CellHash> cells_;
};

// All supports strictly closer than `radius` to each query (open ball),
// found through a hash grid with cell size equal to the radius.
// Throws ParameterError for radius <= 0 or empty sets and InputError for
// non-finite coordinates.
NeighborhoodIndex radius_search(std::span<const Vec3> queries,
                                std::span<const Vec3> supports, double radius);

// Reference all-pairs scan with the same semantics as radius_search.
NeighborhoodIndex brute_force_radius_search(std::span<const Vec3> queries,
                                            std::span<const Vec3> supports,
                                            double radius);

struct KnnResult {
  std::size_t k = 0;
  std::vector<std::uint32_t> indices;  // [query_count x k], nearest first
  std::vector<double> distances;       // matching distances

  std::span<const std::uint32_t> neighbors(std::size_t q) const {
    return {indices.data() + q * k, k};
  }
  std::span<const double> neighbor_distances(std::size_t q) const {
    return {distances.data() + q * k, k};
  }
};

// k nearest supports per query, ties broken by support index. k is clamped
// to the support count.
KnnResult knn_search(std::span<const Vec3> queries,
                     std::span<const Vec3> supports, std::size_t k);

}  // namespace spnet
