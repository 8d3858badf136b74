#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spnet/point_cloud.hpp"
#include "spnet/synthetic.hpp"

namespace spnet {

struct Dataset {
  std::vector<std::string> names;
  std::vector<PointCloud> scenes;

  std::size_t size() const { return scenes.size(); }
  bool empty() const { return scenes.empty(); }
};

inline constexpr const char* kManifestName = "manifest.txt";

// Accepts a PLY file, a manifest file, or a directory (its manifest.txt when
// present, otherwise every *.ply in name order). Throws InputError when the
// path does not exist or a listed file cannot be read.
Dataset load_dataset(const std::filesystem::path& path);

// Generates `count` scenes with seeds scene_seed(seed, i), writes
// scene_NNN.ply files and a manifest (`file<TAB>seed` per line) to `dir`.
Dataset write_synthetic_dataset(const std::filesystem::path& dir, std::size_t count,
                                std::uint64_t seed, const SyntheticSceneSpec& base);

// In-memory variant of the above.
Dataset make_synthetic_dataset(std::size_t count, std::uint64_t seed, const SyntheticSceneSpec& base);

}  // namespace spnet
