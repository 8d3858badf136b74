#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "spnet/config.hpp"
#include "spnet/layers.hpp"
#include "spnet/pyramid.hpp"
#include "spnet/spconv.hpp"

namespace spnet {

// Bottleneck residual block: Linear down to C_mid, SPConv at C_mid, Linear up
// to C_out, plus a shortcut (projected when the width changes). A strided
// block's shortcut takes the nearest support of every query.
template <class T>
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(const std::string& name, const KernelLayout& layout, std::size_t in,
                std::size_t out, std::size_t mid, const AttentionConfig& attention,
                const SPConvOptions& options, std::mt19937_64& rng);

  // `pool` is null for a same-level block.
  Matrix<T> forward(const Matrix<T>& x, const ConvGeometry& geometry,
                    const AttentionInputs<T>& attributes,
                    const std::vector<std::uint32_t>* pool, NormMode mode);
  Matrix<T> backward(const Matrix<T>& grad_out);
  void collect(ParameterList<T>& out);

  std::size_t in_channels() const { return down.in_features(); }
  std::size_t out_channels() const { return up.out_features(); }

  Linear<T> down;
  BatchNorm<T> down_bn;
  SPConv<T> conv;
  Linear<T> up;
  BatchNorm<T> up_bn;
  std::optional<Linear<T>> proj;
  std::optional<BatchNorm<T>> proj_bn;

 private:
  T slope_ = T(0.1);
  const std::vector<std::uint32_t>* pool_ = nullptr;
  std::size_t support_rows_ = 0;
  Matrix<T> mid_, output_;
};

// Encoder-decoder segmentation network. Level 0 starts with a plain SPConv
// stem on the input features; each encoder level then runs its residual
// blocks (the first of level l > 0 strided from level l - 1). Each decoder
// step interpolates the coarser features up, concatenates the encoder skip of
// that level and runs its blocks; a per-point head produces the logits.
template <class T>
class Network {
 public:
  Network(const NetworkSpec& spec, std::uint64_t seed,
          const std::optional<std::filesystem::path>& layout_cache = std::nullopt);

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<KernelLayout>& layouts() const { return layouts_; }

  Pyramid prepare(const PointCloud& cloud) const { return build_pyramid(spec_, layouts_, cloud); }

  // Encoder features per level, canonical row order. The pyramid must
  // outlive the following backward call.
  std::vector<Matrix<T>> encode(const Pyramid& pyramid, NormMode mode);
  // Logits in the pyramid's canonical row order.
  Matrix<T> forward(const Pyramid& pyramid, NormMode mode);
  // Accumulates parameter gradients; returns dL/d(input features).
  Matrix<T> backward(const Matrix<T>& grad_logits);

  // Logits in the cloud's original point order.
  Matrix<T> predict(const PointCloud& cloud, NormMode mode = NormMode::eval);

  // Trainable and non-trainable tensors in declaration order.
  ParameterList<T> parameters();
  std::size_t parameter_count();  // trainable scalars
  void zero_grad();

  SPConv<T> stem;
  std::vector<std::vector<ResidualBlock<T>>> encoder;  // [level][block]
  std::vector<std::vector<ResidualBlock<T>>> decoder;  // [step][block], step 0 ends at level L-2
  Linear<T> head1;
  BatchNorm<T> head_bn;
  Linear<T> head2;
  Parameter<T> head_bias;

 private:
  Matrix<T> backward_decoder(const Matrix<T>& grad_logits);

  NetworkSpec spec_;
  std::vector<KernelLayout> layouts_;
  const Pyramid* pyramid_ = nullptr;
  std::vector<Matrix<T>> attributes_;
  std::vector<Matrix<T>> skips_;
  Matrix<T> head_hidden_;
  std::vector<Matrix<T>> dskip_;
};

// Closed-form trainable parameter count of one residual block.
std::size_t residual_block_parameter_count(std::size_t in, std::size_t out, std::size_t mid,
                                           std::size_t kernel_points, std::size_t shells,
                                           std::size_t attention_parameters);

// Trainable parameter count of the attention MLP of one SPConv.
std::size_t attention_parameter_count(AttentionVariant variant, std::size_t input_width,
                                      std::size_t hidden_width);

}  // namespace spnet
