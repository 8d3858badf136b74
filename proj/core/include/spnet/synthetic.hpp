#pragma once

#include <cstddef>
#include <cstdint>

#include "spnet/point_cloud.hpp"

namespace spnet {

enum class PrimitiveClass : std::int32_t { plane = 0, sphere = 1, box = 2 };
inline constexpr std::size_t kSyntheticClasses = 3;

struct SyntheticSceneSpec {
  std::size_t planes = 2;
  std::size_t spheres = 2;
  std::size_t boxes = 2;
  std::size_t points_per_primitive = 1333;
  double noise = 0.005;           // Gaussian positional noise (m)
  Vec3 bounds{4.0, 4.0, 2.0};     // scene extent (m), corner at the origin
  std::uint64_t seed = 0;
  // Spread of each primitive's hue around its class hue, as a fraction of the
  // colour wheel (0 makes colour a perfect class cue, 0.5 makes it useless).
  double hue_spread = 0.25;
  double color_jitter = 0.03;     // per-point, per-channel
  // Positions are rounded to multiples of this step (0 disables). A power of
  // two keeps coordinates exact under translation by small integers and in
  // float32.
  double quantum = 0.0;
};

// Planes are rectangles of random size and orientation, spheres and boxes
// sit at random non-overlapping places with random yaw. Labels follow
// PrimitiveClass. Throws ParameterError when no primitive is requested.
PointCloud generate_scene(const SyntheticSceneSpec& spec);

// Rounds every coordinate to a multiple of `step`.
void quantize_positions(PointCloud& cloud, double step);

// Per-scene seed derived from a dataset seed.
std::uint64_t scene_seed(std::uint64_t dataset_seed, std::size_t index);

}  // namespace spnet
