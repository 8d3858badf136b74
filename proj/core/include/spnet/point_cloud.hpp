#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace spnet {

using Vec3 = std::array<double, 3>;

inline Vec3 operator-(const Vec3& a, const Vec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

inline Vec3 operator+(const Vec3& a, const Vec3& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

inline Vec3 operator*(double s, const Vec3& a) {
  return {s * a[0], s * a[1], s * a[2]};
}

inline double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

inline double squared_norm(const Vec3& a) { return dot(a, a); }

inline double norm(const Vec3& a) { return std::sqrt(squared_norm(a)); }

// Euclidean distance. Every radius predicate in the library goes through this
// function so that search, sampling and their oracles agree bit for bit.
inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

inline bool is_finite(const Vec3& a) {
  return std::isfinite(a[0]) && std::isfinite(a[1]) && std::isfinite(a[2]);
}

// Positions plus optional per-point attributes. An empty attribute vector
// means the attribute is absent.
struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<Vec3> colors;   // RGB in [0, 1]
  std::vector<Vec3> normals;  // unit length
  std::size_t feature_width = 0;
  std::vector<double> features;  // row-major [size() x feature_width]
  std::vector<std::int32_t> labels;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  bool has_colors() const { return !colors.empty(); }
  bool has_normals() const { return !normals.empty(); }
  bool has_labels() const { return !labels.empty(); }

  std::span<const double> feature_row(std::size_t i) const {
    return {features.data() + i * feature_width, feature_width};
  }

  // Throws InputError when attribute lengths disagree, a coordinate is not
  // finite, or a normal is not unit length within 1e-6.
  void validate() const;

  // Copy of the points at `indices`, in the given order.
  PointCloud subset(std::span<const std::size_t> indices) const;
};

}  // namespace spnet
