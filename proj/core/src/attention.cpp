#include "spnet/attention.hpp"

#include <cmath>

#include "spnet/errors.hpp"
#include "spnet/layers.hpp"

namespace spnet {

std::string_view to_string(AttentionVariant v) {
  switch (v) {
    case AttentionVariant::none:
      return "none";
    case AttentionVariant::gaussian:
      return "gaussian";
    case AttentionVariant::mlp2:
      return "mlp2";
    case AttentionVariant::mlp3:
      return "mlp3";
  }
  return "none";
}

AttentionVariant parse_attention_variant(std::string_view name) {
  if (name == "none") return AttentionVariant::none;
  if (name == "gaussian") return AttentionVariant::gaussian;
  if (name == "mlp2") return AttentionVariant::mlp2;
  if (name == "mlp3") return AttentionVariant::mlp3;
  throw ParameterError("unknown attention variant '" + std::string(name) + "'");
}

double attention_gaussian(std::span<const double> query, std::span<const double> neighbor,
                          double sigma) {
  if (!(sigma > 0.0)) throw ParameterError("gaussian attention needs sigma > 0");
  if (query.size() != neighbor.size()) throw ShapeError("attention inputs differ in width");
  double sq = 0.0;
  for (std::size_t i = 0; i < query.size(); ++i) {
    const double d = query[i] - neighbor[i];
    sq += d * d;
  }
  return std::exp(-std::sqrt(sq) / (2.0 * sigma * sigma));
}

template <class T>
AttentionMlp<T>::AttentionMlp(const std::string& name, std::size_t input_width,
                              std::size_t hidden_width, std::size_t hidden_layers,
                              std::mt19937_64& rng) {
  std::size_t in = input_width;
  for (std::size_t layer = 0; layer <= hidden_layers; ++layer) {
    const std::size_t out = layer == hidden_layers ? 1 : hidden_width;
    const std::string tag = name + ".layer" + std::to_string(layer);
    Parameter<T> w(tag + ".weight", static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out));
    std::normal_distribution<double> gauss(0.0, std::sqrt(2.0 / static_cast<double>(in)));
    for (Eigen::Index i = 0; i < w.value.size(); ++i) w.value.data()[i] = static_cast<T>(gauss(rng));
    weights.push_back(std::move(w));
    biases.emplace_back(tag + ".bias", 1, static_cast<Eigen::Index>(out));
    in = out;
  }
}

template <class T>
std::size_t AttentionMlp<T>::input_width() const {
  return weights.empty() ? 0 : static_cast<std::size_t>(weights.front().value.rows());
}

template <class T>
T AttentionMlp<T>::omega(std::span<const T> query, std::span<const T> neighbor) const {
  if (query.size() != input_width() || neighbor.size() != input_width()) {
    throw ShapeError("attention MLP input width mismatch");
  }
  Matrix<T> diff(1, static_cast<Eigen::Index>(query.size()));
  for (std::size_t i = 0; i < query.size(); ++i) diff(0, static_cast<Eigen::Index>(i)) = query[i] - neighbor[i];
  Cache cache;
  return forward(diff, cache)(0, 0);
}

template <class T>
Matrix<T> AttentionMlp<T>::forward(const Matrix<T>& diffs, Cache& cache) const {
  if (static_cast<std::size_t>(diffs.cols()) != input_width()) {
    throw ShapeError("attention MLP input width mismatch");
  }
  cache.activations.clear();
  Matrix<T> h = diffs;
  for (std::size_t layer = 0; layer < weights.size(); ++layer) {
    Matrix<T> z = h * weights[layer].value;
    z.rowwise() += biases[layer].value.row(0);
    if (layer + 1 < weights.size()) {
      if (detail::kink_probe().enabled) detail::kink_probe().mix(z);
      z = z.cwiseMax(T(0));
      cache.activations.push_back(z);
      h = std::move(z);
    } else {
      cache.omega = z.unaryExpr([](T v) { return T(1) / (T(1) + std::exp(-v)); });
    }
  }
  return cache.omega;
}

template <class T>
void AttentionMlp<T>::backward(const Matrix<T>& diffs, const Cache& cache,
                               const Matrix<T>& domega) {
  // Through the sigmoid: d z = d omega * omega * (1 - omega).
  Matrix<T> dz = domega.cwiseProduct(
      cache.omega.unaryExpr([](T w) { return w * (T(1) - w); }));
  for (std::size_t layer = weights.size(); layer-- > 0;) {
    const Matrix<T>& input = layer == 0 ? diffs : cache.activations[layer - 1];
    weights[layer].grad.noalias() += input.transpose() * dz;
    biases[layer].grad.row(0) += dz.colwise().sum();
    if (layer == 0) break;
    Matrix<T> dh = dz * weights[layer].value.transpose();
    dz = dh.binaryExpr(cache.activations[layer - 1], [](T g, T a) { return a > T(0) ? g : T(0); });
  }
}

template <class T>
void AttentionMlp<T>::collect(ParameterList<T>& out) {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.push_back(&weights[i]);
    out.push_back(&biases[i]);
  }
}

template <class T>
Matrix<T> apply_attention(const Matrix<T>& features, std::span<const T> omega) {
  if (static_cast<std::size_t>(features.rows()) != omega.size()) {
    throw ShapeError("one attention weight per neighbour expected");
  }
  Matrix<T> out(features.rows(), features.cols());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const T w = omega[static_cast<std::size_t>(i)];
    for (Eigen::Index c = 0; c < features.cols(); ++c) out(i, c) = w * features(i, c) + features(i, c);
  }
  return out;
}

template class AttentionMlp<float>;
template class AttentionMlp<double>;
template Matrix<float> apply_attention(const Matrix<float>&, std::span<const float>);
template Matrix<double> apply_attention(const Matrix<double>&, std::span<const double>);

}  // namespace spnet
