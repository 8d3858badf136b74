#include "spnet/sampling.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <tuple>
#include <unordered_map>

#include "spnet/errors.hpp"
#include "spnet/neighborhood.hpp"

namespace spnet {

std::vector<std::size_t> poisson_disk_sample(std::span<const Vec3> positions,
                                             double r_p, std::uint64_t seed) {
  if (!(r_p > 0.0) || !std::isfinite(r_p)) {
    throw ParameterError("Poisson disk radius must be positive and finite");
  }
  if (positions.empty()) return {};
  for (const Vec3& p : positions) {
    if (!is_finite(p)) throw InputError("non-finite coordinates in sampling input");
  }

  std::vector<std::size_t> order(positions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  // Accepted points are bucketed on a grid slightly coarser than r_p, so any
  // conflict lies in the 27 surrounding cells.
  const SpatialGrid frame(positions, r_p * (1.0 + 1e-6));
  struct CellHash {
    std::size_t operator()(const SpatialGrid::Cell& c) const noexcept {
      return static_cast<std::size_t>(c.x * 73856093LL ^ c.y * 19349663LL ^ c.z * 83492791LL);
    }
  };
  std::unordered_map<SpatialGrid::Cell, std::vector<std::size_t>, CellHash> accepted;

  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    const Vec3& p = positions[i];
    const SpatialGrid::Cell c = frame.cell_of(p);
    bool free = true;
    for (std::int64_t dx = -1; dx <= 1 && free; ++dx) {
      for (std::int64_t dy = -1; dy <= 1 && free; ++dy) {
        for (std::int64_t dz = -1; dz <= 1 && free; ++dz) {
          auto it = accepted.find({c.x + dx, c.y + dy, c.z + dz});
          if (it == accepted.end()) continue;
          for (std::size_t j : it->second) {
            if (distance(p, positions[j]) < r_p) {
              free = false;
              break;
            }
          }
        }
      }
    }
    if (free) {
      accepted[c].push_back(i);
      kept.push_back(i);
    }
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

PointCloud grid_subsample(const PointCloud& cloud, double cell_size) {
  if (!(cell_size > 0.0)) throw ParameterError("grid cell size must be positive");
  PointCloud out;
  if (cloud.empty()) return out;

  const SpatialGrid grid(cloud.positions, cell_size);
  std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto c = grid.cell_of(cloud.positions[i]);
    cells[{c.x, c.y, c.z}].push_back(i);
  }
  for (const auto& [key, members] : cells) {
    const double inv = 1.0 / static_cast<double>(members.size());
    Vec3 p{0, 0, 0}, col{0, 0, 0}, n{0, 0, 0};
    for (std::size_t i : members) {
      p = p + cloud.positions[i];
      if (cloud.has_colors()) col = col + cloud.colors[i];
      if (cloud.has_normals()) n = n + cloud.normals[i];
    }
    out.positions.push_back(inv * p);
    if (cloud.has_colors()) out.colors.push_back(inv * col);
    if (cloud.has_normals()) {
      const double len = norm(n);
      out.normals.push_back(len > 0.0 ? (1.0 / len) * n : Vec3{0, 0, 1});
    }
  }
  return out;
}

NormalEstimate estimate_normals(const PointCloud& cloud, std::size_t k) {
  if (k == 0) throw ParameterError("normal estimation needs k >= 1");
  if (cloud.size() < k + 1) {
    throw InputError("normal estimation needs at least k + 1 points");
  }
  const KnnResult knn = knn_search(cloud.positions, cloud.positions, k + 1);

  NormalEstimate result{cloud, std::vector<std::uint8_t>(cloud.size(), 0)};
  result.cloud.normals.assign(cloud.size(), Vec3{0, 0, 1});

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (std::uint32_t j : knn.neighbors(i)) {
      mean += Eigen::Vector3d(cloud.positions[j].data());
    }
    mean /= static_cast<double>(knn.k);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (std::uint32_t j : knn.neighbors(i)) {
      const Eigen::Vector3d d = Eigen::Vector3d(cloud.positions[j].data()) - mean;
      cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
    const Eigen::Vector3d values = solver.eigenvalues();  // ascending
    if (!(values[1] > 1e-12 * std::max(values[2], 1e-300))) {
      result.degenerate[i] = 1;
      continue;
    }
    Eigen::Vector3d n = solver.eigenvectors().col(0).normalized();
    if (n.z() < 0.0) n = -n;
    result.cloud.normals[i] = {n.x(), n.y(), n.z()};
  }
  return result;
}

}  // namespace spnet
