#pragma once

#include <filesystem>

#include "spnet/point_cloud.hpp"

namespace spnet {

enum class PlyFormat { ascii, binary_little_endian };

// Reads the `vertex` element: x, y, z (any numeric type), optional
// red/green/blue (uchar mapped to [0, 1], float taken as is), optional
// nx/ny/nz and optional integer `label`. Other properties and elements are
// skipped. Throws InputError on malformed files.
PointCloud read_ply(const std::filesystem::path& path);

// Writes positions as float32 when every coordinate survives the float
// round trip, float64 otherwise. Colors are stored as uchar, normals as
// float32, labels as int32.
void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
               PlyFormat format = PlyFormat::binary_little_endian);

}  // namespace spnet
