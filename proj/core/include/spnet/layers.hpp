#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

#include "spnet/tensor.hpp"

namespace spnet {

// How batch normalisation behaves in a pass. `identity` switches it off
// entirely (used by gradient checks and oracle comparisons).
enum class NormMode { identity, train, eval };

// Bias-free dense layer y = x W. Initialised with He fan-in scaling.
template <class T>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng);

  Matrix<T> forward(const Matrix<T>& x);
  // Accumulates into weight.grad and returns dL/dx.
  Matrix<T> backward(const Matrix<T>& dy);
  void collect(ParameterList<T>& out) { out.push_back(&weight); }

  std::size_t in_features() const { return static_cast<std::size_t>(weight.value.rows()); }
  std::size_t out_features() const { return static_cast<std::size_t>(weight.value.cols()); }

  Parameter<T> weight;

 private:
  Matrix<T> input_;
  bool cached_ = false;
};

// Per-channel batch normalisation over the rows of its input.
template <class T>
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(const std::string& name, std::size_t channels, double momentum, double eps);

  Matrix<T> forward(const Matrix<T>& x, NormMode mode);
  Matrix<T> backward(const Matrix<T>& dy);
  void collect(ParameterList<T>& out);

  Parameter<T> gamma, beta;
  Parameter<T> running_mean, running_var;  // not trainable

 private:
  double momentum_ = 0.1;
  double eps_ = 1e-5;
  NormMode mode_ = NormMode::identity;
  Matrix<T> xhat_;
  Eigen::Matrix<T, 1, Eigen::Dynamic> inv_std_;
  bool cached_ = false;
};

namespace detail {

// Fingerprint of the sign pattern of every rectifier input seen while
// enabled. The gradient checker compares fingerprints to notice a finite
// difference step that crosses a kink.
struct KinkProbe {
  bool enabled = false;
  std::uint64_t hash = 0;

  void reset() { hash = 0xcbf29ce484222325ULL; }
  template <class Derived>
  void mix(const Eigen::DenseBase<Derived>& pre) {
    for (Eigen::Index i = 0; i < pre.size(); ++i) {
      hash = (hash ^ (pre.derived().data()[i] > 0 ? 0x9eULL : 0x5dULL)) * 0x100000001b3ULL;
    }
  }
};

KinkProbe& kink_probe();

}  // namespace detail

template <class T>
void leaky_relu_inplace(Matrix<T>& x, T slope) {
  if (detail::kink_probe().enabled) detail::kink_probe().mix(x);
  x = x.unaryExpr([slope](T v) { return v > T(0) ? v : slope * v; });
}

// Backward through leaky ReLU given its output (same sign as its input).
template <class T>
Matrix<T> leaky_relu_backward(const Matrix<T>& output, const Matrix<T>& dy, T slope) {
  return dy.binaryExpr(output, [slope](T g, T y) { return y > T(0) ? g : slope * g; });
}

}  // namespace spnet
