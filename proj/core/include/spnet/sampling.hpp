#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "spnet/point_cloud.hpp"

namespace spnet {

// Poisson disk subsampling by greedy dart throwing over a seeded shuffle of
// the input indices. The result (ascending indices) is a maximal subset whose
// pairwise distances are all >= r_p: every rejected point lies within r_p of
// an accepted one. Throws ParameterError for r_p <= 0.
std::vector<std::size_t> poisson_disk_sample(std::span<const Vec3> positions,
                                             double r_p, std::uint64_t seed);

inline std::vector<std::size_t> poisson_disk_sample(const PointCloud& cloud,
                                                    double r_p,
                                                    std::uint64_t seed) {
  return poisson_disk_sample(cloud.positions, r_p, seed);
}

// Grid subsampling: one barycentric point per occupied cell, with colors and
// normals averaged (normals renormalised). Not a subset of the input.
PointCloud grid_subsample(const PointCloud& cloud, double cell_size);

struct NormalEstimate {
  PointCloud cloud;                    // input with normals filled in
  std::vector<std::uint8_t> degenerate;  // 1 where the neighbourhood had rank < 2
};

// Normal of the k-nearest-neighbour covariance (point itself included, so
// k + 1 points per patch), oriented towards +z. Rank-deficient patches get
// (0, 0, 1) and are flagged.
NormalEstimate estimate_normals(const PointCloud& cloud, std::size_t k);

}  // namespace spnet
