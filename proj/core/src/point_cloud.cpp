#include "spnet/point_cloud.hpp"

#include <cmath>
#include <string>

#include "spnet/errors.hpp"

namespace spnet {

void PointCloud::validate() const {
  const std::size_t n = positions.size();
  auto check_len = [n](std::size_t len, const char* name) {
    if (len != 0 && len != n) {
      throw InputError(std::string(name) + " has " + std::to_string(len) +
                       " entries but the cloud has " + std::to_string(n) + " points");
    }
  };
  check_len(colors.size(), "colors");
  check_len(normals.size(), "normals");
  check_len(labels.size(), "labels");
  if (feature_width == 0 ? !features.empty() : features.size() != n * feature_width) {
    throw InputError("feature array does not match point count x feature width");
  }
  for (const Vec3& p : positions) {
    if (!is_finite(p)) throw InputError("non-finite point coordinates");
  }
  for (const Vec3& nrm : normals) {
    if (!is_finite(nrm) || std::abs(norm(nrm) - 1.0) > 1e-6) {
      throw InputError("normals must have unit length");
    }
  }
}

PointCloud PointCloud::subset(std::span<const std::size_t> indices) const {
  PointCloud out;
  out.feature_width = feature_width;
  out.positions.reserve(indices.size());
  for (std::size_t i : indices) {
    out.positions.push_back(positions.at(i));
    if (has_colors()) out.colors.push_back(colors[i]);
    if (has_normals()) out.normals.push_back(normals[i]);
    if (has_labels()) out.labels.push_back(labels[i]);
    if (feature_width > 0) {
      auto row = feature_row(i);
      out.features.insert(out.features.end(), row.begin(), row.end());
    }
  }
  return out;
}

}  // namespace spnet
