#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spnet/tensor.hpp"

namespace spnet {

enum class AttentionVariant { none, gaussian, mlp2, mlp3 };

std::string_view to_string(AttentionVariant v);
// Throws ParameterError for unknown names.
AttentionVariant parse_attention_variant(std::string_view name);

// Width of the low-level attribute vector fed to attention: RGB + normal.
inline constexpr std::size_t kLowLevelWidth = 6;

struct AttentionConfig {
  AttentionVariant variant = AttentionVariant::none;
  double sigma = 1.0;              // gaussian bandwidth
  std::size_t hidden_width = 8;    // mlp hidden layers
  std::size_t input_width = kLowLevelWidth;
};

// exp(-|q - n| / (2 sigma^2)); note the unsquared norm in the exponent.
// Throws ParameterError for sigma <= 0 and ShapeError for width mismatch.
double attention_gaussian(std::span<const double> query, std::span<const double> neighbor,
                          double sigma);

// Sequential MLP on the attribute difference q - n: ReLU hidden layers and a
// sigmoid output of width 1.
template <class T>
class AttentionMlp {
 public:
  // Hidden activations of one batched pass, kept for backward.
  struct Cache {
    std::vector<Matrix<T>> activations;  // post-ReLU hidden outputs
    Matrix<T> omega;                     // [pairs x 1]
  };

  AttentionMlp() = default;
  // `hidden_layers` hidden layers of `hidden_width`, so depth = hidden_layers + 1.
  AttentionMlp(const std::string& name, std::size_t input_width, std::size_t hidden_width,
               std::size_t hidden_layers, std::mt19937_64& rng);

  std::size_t input_width() const;
  std::size_t depth() const { return weights.size(); }

  // Single-pair evaluation.
  T omega(std::span<const T> query, std::span<const T> neighbor) const;

  // Rows of `diffs` are query-minus-neighbour attribute differences.
  Matrix<T> forward(const Matrix<T>& diffs, Cache& cache) const;
  // Accumulates parameter gradients given dL/domega per pair.
  void backward(const Matrix<T>& diffs, const Cache& cache, const Matrix<T>& domega);

  void collect(ParameterList<T>& out);

  std::vector<Parameter<T>> weights;  // [in x out]
  std::vector<Parameter<T>> biases;   // [1 x out]
};

// Residual re-weighting f' = omega * f + f applied row-wise.
template <class T>
Matrix<T> apply_attention(const Matrix<T>& features, std::span<const T> omega);

}  // namespace spnet
