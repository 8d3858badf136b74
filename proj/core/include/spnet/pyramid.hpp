#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "spnet/config.hpp"
#include "spnet/conv_geometry.hpp"
#include "spnet/feature_propagation.hpp"
#include "spnet/kernel_layout.hpp"
#include "spnet/point_cloud.hpp"
#include "spnet/tensor.hpp"

namespace spnet {

struct LevelPoints {
  std::vector<Vec3> positions;
  Matrix<double> attributes;          // [n x 6] RGB + normal, read by attention
  std::vector<std::size_t> parent;    // index into the previous level (PDS only)
};

// Everything geometric a forward pass needs for one cloud (or a batch of
// clouds merged block-diagonally). Points are held in canonical order: sorted
// by position, then color, normal and original index, so the result does not
// depend on the order the points arrived in.
struct Pyramid {
  std::vector<LevelPoints> levels;
  std::vector<ConvGeometry> conv;               // level l -> level l
  std::vector<ConvGeometry> strided;            // [l]: level l -> level l + 1
  std::vector<std::vector<std::uint32_t>> pool; // [l]: nearest level-l point of each level-(l+1) point
  std::vector<FpWeights> up;                    // [l]: level l + 1 -> level l
  Matrix<double> input_features;                // [n0 x input width]
  std::vector<std::int32_t> labels;             // canonical order, empty if unlabeled
  std::vector<std::size_t> order;               // canonical row -> original point index
  std::vector<std::size_t> scene_sizes;         // level-0 points per merged scene

  std::size_t point_count() const { return levels.empty() ? 0 : levels[0].positions.size(); }
};

// One layout per level, radii and influence following the level config.
std::vector<KernelLayout> build_level_layouts(
    const NetworkSpec& spec, const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

// Canonical permutation of a cloud (see Pyramid).
std::vector<std::size_t> canonical_order(const PointCloud& cloud);

// Throws InputError listing missing attributes (colors, normals) and
// DegenerateInputError naming the level for an empty level.
Pyramid build_pyramid(const NetworkSpec& spec, std::span<const KernelLayout> layouts,
                      const PointCloud& cloud);

// Concatenates scenes; they never interact inside the merged geometry.
Pyramid merge_pyramids(std::span<const Pyramid* const> parts);

}  // namespace spnet
