#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "spnet/point_cloud.hpp"
#include "spnet/tensor.hpp"

namespace spnet {

// inverse_square: w_k = d_k^2 / sum d^2 with d_k = 1 / distance (the default).
// inverse: w_k = d_k / sum d.
enum class FpWeighting { inverse_square, inverse };

std::string_view to_string(FpWeighting w);
FpWeighting parse_fp_weighting(std::string_view name);

// Distance below which a fine point is treated as coincident with a coarse
// point and copies its feature.
inline constexpr double kCoincidentDistance = 1e-12;

// Interpolation stencil from a coarse to a fine point set: `k` coarse indices
// and weights per fine point (nearest first). A coincident point gets weight 1
// on its coarse twin and 0 elsewhere.
struct FpWeights {
  std::size_t fine_count = 0;
  std::size_t coarse_count = 0;
  std::size_t k = 0;
  std::vector<std::uint32_t> indices;
  std::vector<double> weights;

  std::span<const std::uint32_t> neighbors(std::size_t i) const {
    return {indices.data() + i * k, k};
  }
  std::span<const double> neighbor_weights(std::size_t i) const {
    return {weights.data() + i * k, k};
  }
};

// k is clamped to the coarse count. Throws ParameterError for k == 0 and
// InputError for an empty coarse set.
FpWeights compute_fp_weights(std::span<const Vec3> coarse, std::span<const Vec3> fine,
                             std::size_t k, FpWeighting weighting = FpWeighting::inverse_square);

// Block-diagonal union of stencils (one per scene of a batch).
FpWeights concat_fp_weights(std::span<const FpWeights* const> parts);

template <class T>
Matrix<T> apply_fp(const FpWeights& w, const Matrix<T>& coarse_features);

// Transpose of apply_fp: gradient w.r.t. the coarse features.
template <class T>
Matrix<T> apply_fp_backward(const FpWeights& w, const Matrix<T>& grad_fine);

// One-shot interpolation of coarse features onto fine points.
template <class T>
Matrix<T> propagate_features(std::span<const Vec3> coarse, const Matrix<T>& coarse_features,
                             std::span<const Vec3> fine, std::size_t k,
                             FpWeighting weighting = FpWeighting::inverse_square);

}  // namespace spnet
