#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "spnet/point_cloud.hpp"

namespace spnet {

struct KernelShell {
  double radius = 0.0;     // 0 for the central shell
  std::size_t first = 0;   // index of the shell's first kernel point
  std::size_t count = 0;
};

// Rigid shell-structured kernel: shell 0 holds the single central point, every
// further shell holds points on a sphere of its radius. Shell kernel points are
// stored contiguously, shells in order of increasing radius.
struct KernelLayout {
  std::vector<Vec3> points;
  std::vector<KernelShell> shells;
  std::vector<std::uint16_t> shell_of;  // shell index per kernel point
  double influence = 0.0;

  std::size_t total_kernel_count() const { return points.size(); }
  std::size_t shell_count() const { return shells.size(); }
  double outer_radius() const { return shells.empty() ? 0.0 : shells.back().radius; }

  // Throws ParameterError if the shell invariants do not hold.
  void validate() const;
};

struct RepulsionOptions {
  std::size_t max_iterations = 10000;
  double gradient_tolerance = 1e-9;
  double step = 0.01;
};

// Seeded random unit vectors (normalised Gaussian draws).
std::vector<Vec3> random_sphere_points(std::size_t count, std::uint64_t seed);

// Coulomb energy sum over pairs of 1 / |a - b|.
double repulsion_energy(std::span<const Vec3> points);

// Minimises repulsion_energy on the unit sphere by projected gradient descent
// from random_sphere_points(count, seed).
std::vector<Vec3> repulsion_sphere_points(std::size_t count, std::uint64_t seed,
                                          const RepulsionOptions& options = {});

// Builds the layout: the central point plus `points_per_outer_shell` points on
// each outer shell, every outer shell reusing one repulsion-optimised unit
// layout scaled to its radius. `shell_radii` lists the num_shells - 1 outer
// radii in strictly increasing order. When `cache_dir` is set the offsets are
// memoised there, keyed by all inputs.
KernelLayout build_layout(std::size_t num_shells, std::size_t points_per_outer_shell,
                          std::span<const double> shell_radii, double influence,
                          std::uint64_t seed,
                          const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

// Linear kernel correlation max(0, 1 - |kernel_point - neighbor_offset| / v).
double correlation(const Vec3& kernel_point, const Vec3& neighbor_offset, double influence);

// Layout cache file: magic "SPKL", u32 version, u32 shell count, u32 points per
// outer shell, u32 total kernel points, u64 seed, f64 influence, f64 outer
// radii, then total x 3 f64 offsets. All little-endian.
struct LayoutCacheKey {
  std::size_t num_shells = 0;
  std::size_t points_per_outer_shell = 0;
  std::vector<double> shell_radii;
  double influence = 0.0;
  std::uint64_t seed = 0;

  std::string file_name() const;
};

void write_layout_cache(const std::filesystem::path& file, const LayoutCacheKey& key,
                        std::span<const Vec3> offsets);
// Returns nullopt if the file is missing or belongs to another key.
std::optional<std::vector<Vec3>> read_layout_cache(const std::filesystem::path& file,
                                                   const LayoutCacheKey& key);

// Default cache location: $SPNET_CACHE_DIR, else <temp>/spnet-cache.
std::filesystem::path default_cache_dir();

}  // namespace spnet
