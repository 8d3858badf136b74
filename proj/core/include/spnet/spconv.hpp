#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>

#include "spnet/attention.hpp"
#include "spnet/conv_geometry.hpp"
#include "spnet/kernel_layout.hpp"
#include "spnet/layers.hpp"
#include "spnet/tensor.hpp"

namespace spnet {

struct SPConvOptions {
  bool activation = true;  // leaky ReLU after both stages
  double leaky_slope = 0.1;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
};

// Low-level attributes (RGB + normal) of the query and support points; only
// read when attention is enabled.
template <class T>
struct AttentionInputs {
  const Matrix<T>* query = nullptr;    // [Q x 6]
  const Matrix<T>* support = nullptr;  // [S x 6]
};

// Shell point convolution.
//
// Stage 0 aggregates neighbour features on every kernel point:
//   agg[k] = sum_j corr(k, j) * f'_j,  f'_j = w_j f_j + f_j (or f_j without attention)
// Stage 1 convolves each shell separately with W1 ([K, C_in, C_out/2]):
//   h_n = act(BN(sum_{k in shell n} agg[k] W1[k]))
// Stage 2 fuses the shells with W2 ([N, C_out/2, C_out]):
//   out = act(BN(sum_n h_n W2[n]))
//
// Aggregated features live in rows of width K * C_in (kernel-major). forward
// caches everything backward needs, including a pointer to the geometry,
// which must outlive the backward call.
template <class T>
class SPConv {
 public:
  SPConv() = default;
  SPConv(const std::string& name, const KernelLayout& layout, std::size_t in_channels,
         std::size_t out_channels, const AttentionConfig& attention,
         const SPConvOptions& options, std::mt19937_64& rng);

  Matrix<T> aggregate(const Matrix<T>& support_features, const ConvGeometry& geometry,
                      const AttentionInputs<T>& attributes = {});
  Matrix<T> convolve(Matrix<T> aggregated, NormMode mode);
  Matrix<T> forward(const Matrix<T>& support_features, const ConvGeometry& geometry,
                    const AttentionInputs<T>& attributes, NormMode mode) {
    return convolve(aggregate(support_features, geometry, attributes), mode);
  }

  // Gradient w.r.t. the aggregated rows; accumulates W1, W2 and BN gradients.
  Matrix<T> backward_convolve(const Matrix<T>& grad_out);
  // Gradient w.r.t. the support features; accumulates attention gradients.
  Matrix<T> backward_aggregate(const Matrix<T>& grad_aggregated);
  Matrix<T> backward(const Matrix<T>& grad_out) {
    return backward_aggregate(backward_convolve(grad_out));
  }

  void collect(ParameterList<T>& out);

  const KernelLayout& layout() const { return layout_; }
  std::size_t in_channels() const { return in_channels_; }
  std::size_t out_channels() const { return out_channels_; }
  const AttentionConfig& attention() const { return attention_; }
  // Attention weight per pair of the last aggregate call (empty without attention).
  std::span<const T> last_attention() const { return omega_; }

  Parameter<T> w1;  // [K * C_in, C_out / 2]
  Parameter<T> w2;  // [N * C_out / 2, C_out]
  BatchNorm<T> bn1, bn2;
  std::optional<AttentionMlp<T>> mlp;

 private:
  Matrix<T> attribute_diffs(const ConvGeometry& geometry) const;

  KernelLayout layout_;
  std::size_t in_channels_ = 0, out_channels_ = 0;
  AttentionConfig attention_;
  SPConvOptions options_;

  const ConvGeometry* geometry_ = nullptr;
  AttentionInputs<T> attributes_;
  Matrix<T> support_features_;
  std::vector<T> omega_;
  Matrix<T> aggregated_, hidden_, output_;
  bool aggregated_cached_ = false, convolved_cached_ = false;
};

// Single-query aggregation over explicit neighbours: returns [K x C_in].
// Neighbours are summed in a canonical order (lexicographic offset, then
// features), so any permutation of the input gives a bit-identical result.
// Throws ShapeError when feature rows and positions disagree.
template <class T>
Matrix<T> aggregate(const KernelLayout& layout, const Vec3& query,
                    std::span<const Vec3> neighbor_positions,
                    const Matrix<T>& neighbor_features);

}  // namespace spnet
