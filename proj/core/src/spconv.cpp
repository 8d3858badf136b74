#include "spnet/spconv.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spnet/errors.hpp"

namespace spnet {
namespace {

template <class T>
void he_init(Parameter<T>& p, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<T>(gauss(rng));
}

}  // namespace

template <class T>
SPConv<T>::SPConv(const std::string& name, const KernelLayout& layout, std::size_t in_channels,
                  std::size_t out_channels, const AttentionConfig& attention,
                  const SPConvOptions& options, std::mt19937_64& rng)
    : layout_(layout),
      in_channels_(in_channels),
      out_channels_(out_channels),
      attention_(attention),
      options_(options) {
  layout_.validate();
  if (out_channels == 0 || out_channels % 2 != 0) {
    throw ParameterError(name + ": output channel count must be even and positive");
  }
  if (in_channels == 0) throw ParameterError(name + ": needs at least one input channel");
  const std::size_t k = layout_.total_kernel_count();
  const std::size_t n = layout_.shell_count();
  const std::size_t half = out_channels / 2;
  w1 = Parameter<T>(name + ".w1", static_cast<Eigen::Index>(k * in_channels),
                    static_cast<Eigen::Index>(half));
  w2 = Parameter<T>(name + ".w2", static_cast<Eigen::Index>(n * half),
                    static_cast<Eigen::Index>(out_channels));
  he_init(w1, k * in_channels, rng);
  he_init(w2, n * half, rng);
  bn1 = BatchNorm<T>(name + ".bn1", n * half, options.bn_momentum, options.bn_eps);
  bn2 = BatchNorm<T>(name + ".bn2", out_channels, options.bn_momentum, options.bn_eps);
  if (attention.variant == AttentionVariant::mlp2 || attention.variant == AttentionVariant::mlp3) {
    const std::size_t hidden_layers = attention.variant == AttentionVariant::mlp2 ? 1 : 2;
    mlp.emplace(name + ".attention", attention.input_width, attention.hidden_width,
                hidden_layers, rng);
  } else if (attention.variant == AttentionVariant::gaussian && !(attention.sigma > 0.0)) {
    throw ParameterError(name + ": gaussian attention needs sigma > 0");
  }
}

template <class T>
void SPConv<T>::collect(ParameterList<T>& out) {
  if (mlp) mlp->collect(out);
  out.push_back(&w1);
  bn1.collect(out);
  out.push_back(&w2);
  bn2.collect(out);
}

template <class T>
Matrix<T> SPConv<T>::attribute_diffs(const ConvGeometry& g) const {
  const Matrix<T>& q = *attributes_.query;
  const Matrix<T>& s = *attributes_.support;
  Matrix<T> diffs(static_cast<Eigen::Index>(g.pair_count()), q.cols());
  for (std::size_t p = 0; p < g.pair_count(); ++p) {
    diffs.row(static_cast<Eigen::Index>(p)) = q.row(g.pair_query[p]) - s.row(g.pair_support[p]);
  }
  return diffs;
}

template <class T>
Matrix<T> SPConv<T>::aggregate(const Matrix<T>& x, const ConvGeometry& g,
                               const AttentionInputs<T>& attributes) {
  if (static_cast<std::size_t>(x.cols()) != in_channels_) {
    throw ShapeError("SPConv: expected " + std::to_string(in_channels_) +
                     " feature channels, got " + std::to_string(x.cols()));
  }
  if (static_cast<std::size_t>(x.rows()) != g.support_count) {
    throw ShapeError("SPConv: feature rows do not match the support count");
  }
  const bool attend = attention_.variant != AttentionVariant::none;
  if (attend) {
    if (attributes.query == nullptr || attributes.support == nullptr) {
      throw ShapeError("SPConv: attention enabled but no low-level attributes given");
    }
    if (static_cast<std::size_t>(attributes.query->rows()) != g.query_count ||
        static_cast<std::size_t>(attributes.support->rows()) != g.support_count ||
        static_cast<std::size_t>(attributes.query->cols()) != attention_.input_width ||
        static_cast<std::size_t>(attributes.support->cols()) != attention_.input_width) {
      throw ShapeError("SPConv: attention attribute shape mismatch");
    }
  }
  geometry_ = &g;
  attributes_ = attributes;
  if (mlp) {
    support_features_ = x;
  } else {
    support_features_.resize(x.rows(), 0);
  }

  omega_.clear();
  if (attention_.variant == AttentionVariant::gaussian) {
    omega_.resize(g.pair_count());
    const double denom = 2.0 * attention_.sigma * attention_.sigma;
    const Matrix<T>& qa = *attributes.query;
    const Matrix<T>& sa = *attributes.support;
    for (std::size_t p = 0; p < g.pair_count(); ++p) {
      double sq = 0.0;
      for (Eigen::Index c = 0; c < qa.cols(); ++c) {
        const double d = static_cast<double>(qa(g.pair_query[p], c)) -
                         static_cast<double>(sa(g.pair_support[p], c));
        sq += d * d;
      }
      omega_[p] = static_cast<T>(std::exp(-std::sqrt(sq) / denom));
    }
  } else if (mlp) {
    typename AttentionMlp<T>::Cache cache;
    const Matrix<T> w = mlp->forward(attribute_diffs(g), cache);
    omega_.assign(w.data(), w.data() + w.size());
  }

  const auto c_in = static_cast<Eigen::Index>(in_channels_);
  const auto k_total = static_cast<Eigen::Index>(layout_.total_kernel_count());
  Matrix<T> agg = Matrix<T>::Zero(static_cast<Eigen::Index>(g.query_count), k_total * c_in);

#pragma omp parallel
  {
    Eigen::Matrix<T, 1, Eigen::Dynamic> row(c_in);
#pragma omp for schedule(dynamic, 64)
    for (std::int64_t q = 0; q < static_cast<std::int64_t>(g.query_count); ++q) {
      for (std::size_t p = g.query_offsets[q]; p < g.query_offsets[q + 1]; ++p) {
        const auto xs = x.row(g.pair_support[p]);
        if (attend) {
          const T w = omega_[p];
          row = w * xs + xs;
        } else {
          row = xs;
        }
        for (std::size_t e = g.pair_offsets[p]; e < g.pair_offsets[p + 1]; ++e) {
          agg.row(q).segment(g.entry_kernel[e] * c_in, c_in) +=
              static_cast<T>(g.entry_weight[e]) * row;
        }
      }
    }
  }
  aggregated_cached_ = true;
  return agg;
}

template <class T>
Matrix<T> SPConv<T>::convolve(Matrix<T> agg, NormMode mode) {
  const auto c_in = static_cast<Eigen::Index>(in_channels_);
  const auto half = static_cast<Eigen::Index>(out_channels_ / 2);
  if (agg.cols() != static_cast<Eigen::Index>(layout_.total_kernel_count()) * c_in) {
    throw ShapeError("SPConv: aggregated rows must have K * C_in columns");
  }
  const T slope = static_cast<T>(options_.leaky_slope);

  Matrix<T> pre1(agg.rows(), static_cast<Eigen::Index>(layout_.shell_count()) * half);
  for (std::size_t n = 0; n < layout_.shell_count(); ++n) {
    const KernelShell& shell = layout_.shells[n];
    const auto first = static_cast<Eigen::Index>(shell.first) * c_in;
    const auto width = static_cast<Eigen::Index>(shell.count) * c_in;
    pre1.middleCols(static_cast<Eigen::Index>(n) * half, half).noalias() =
        agg.middleCols(first, width) * w1.value.middleRows(first, width);
  }
  hidden_ = bn1.forward(pre1, mode);
  if (options_.activation) leaky_relu_inplace(hidden_, slope);
  output_ = bn2.forward(hidden_ * w2.value, mode);
  if (options_.activation) leaky_relu_inplace(output_, slope);
  aggregated_ = std::move(agg);
  convolved_cached_ = true;
  return output_;
}

template <class T>
Matrix<T> SPConv<T>::backward_convolve(const Matrix<T>& dy) {
  if (!convolved_cached_) throw StateError("SPConv: backward called before forward");
  if (dy.rows() != output_.rows() || dy.cols() != output_.cols()) {
    throw ShapeError("SPConv: upstream gradient shape mismatch");
  }
  const T slope = static_cast<T>(options_.leaky_slope);
  const auto c_in = static_cast<Eigen::Index>(in_channels_);
  const auto half = static_cast<Eigen::Index>(out_channels_ / 2);

  Matrix<T> d = options_.activation ? leaky_relu_backward(output_, dy, slope) : dy;
  d = bn2.backward(d);
  w2.grad.noalias() += hidden_.transpose() * d;
  Matrix<T> dh = d * w2.value.transpose();
  if (options_.activation) dh = leaky_relu_backward(hidden_, dh, slope);
  const Matrix<T> dpre1 = bn1.backward(dh);

  Matrix<T> dagg(aggregated_.rows(), aggregated_.cols());
  for (std::size_t n = 0; n < layout_.shell_count(); ++n) {
    const KernelShell& shell = layout_.shells[n];
    const auto first = static_cast<Eigen::Index>(shell.first) * c_in;
    const auto width = static_cast<Eigen::Index>(shell.count) * c_in;
    const auto block = dpre1.middleCols(static_cast<Eigen::Index>(n) * half, half);
    w1.grad.middleRows(first, width).noalias() += aggregated_.middleCols(first, width).transpose() * block;
    dagg.middleCols(first, width).noalias() = block * w1.value.middleRows(first, width).transpose();
  }
  return dagg;
}

template <class T>
Matrix<T> SPConv<T>::backward_aggregate(const Matrix<T>& dagg) {
  if (!aggregated_cached_ || geometry_ == nullptr) {
    throw StateError("SPConv: backward called before aggregate");
  }
  const ConvGeometry& g = *geometry_;
  const auto c_in = static_cast<Eigen::Index>(in_channels_);
  if (dagg.rows() != static_cast<Eigen::Index>(g.query_count) ||
      dagg.cols() != static_cast<Eigen::Index>(layout_.total_kernel_count()) * c_in) {
    throw ShapeError("SPConv: aggregated gradient shape mismatch");
  }
  const bool attend = attention_.variant != AttentionVariant::none;
  Matrix<T> dx = Matrix<T>::Zero(static_cast<Eigen::Index>(g.support_count), c_in);
  Matrix<T> domega;
  if (mlp) domega.resize(static_cast<Eigen::Index>(g.pair_count()), 1);

#pragma omp parallel
  {
    Eigen::Matrix<T, 1, Eigen::Dynamic> grad(c_in);
#pragma omp for schedule(dynamic, 64)
    for (std::int64_t s = 0; s < static_cast<std::int64_t>(g.support_count); ++s) {
      for (std::size_t i = g.support_offsets[s]; i < g.support_offsets[s + 1]; ++i) {
        const std::uint32_t p = g.support_pairs[i];
        const std::uint32_t q = g.pair_query[p];
        grad.setZero();
        for (std::size_t e = g.pair_offsets[p]; e < g.pair_offsets[p + 1]; ++e) {
          grad += static_cast<T>(g.entry_weight[e]) * dagg.row(q).segment(g.entry_kernel[e] * c_in, c_in);
        }
        if (attend) {
          const T w = omega_[p];
          dx.row(s) += w * grad + grad;
          if (mlp) domega(p, 0) = support_features_.row(s).dot(grad);
        } else {
          dx.row(s) += grad;
        }
      }
    }
  }

  if (mlp) {
    const Matrix<T> diffs = attribute_diffs(g);
    typename AttentionMlp<T>::Cache cache;
    mlp->forward(diffs, cache);
    mlp->backward(diffs, cache, domega);
  }
  return dx;
}

template <class T>
Matrix<T> aggregate(const KernelLayout& layout, const Vec3& query,
                    std::span<const Vec3> neighbor_positions,
                    const Matrix<T>& neighbor_features) {
  if (static_cast<std::size_t>(neighbor_features.rows()) != neighbor_positions.size()) {
    throw ShapeError("aggregate: one feature row per neighbour expected");
  }
  const auto c_in = neighbor_features.cols();
  const auto k_total = static_cast<Eigen::Index>(layout.total_kernel_count());
  if (neighbor_positions.empty() || c_in == 0) return Matrix<T>::Zero(k_total, c_in);

  std::vector<std::size_t> order(neighbor_positions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Vec3> offsets(neighbor_positions.size());
  for (std::size_t j = 0; j < offsets.size(); ++j) offsets[j] = neighbor_positions[j] - query;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (offsets[a] != offsets[b]) return offsets[a] < offsets[b];
    return std::lexicographical_compare(
        neighbor_features.row(a).data(), neighbor_features.row(a).data() + c_in,
        neighbor_features.row(b).data(), neighbor_features.row(b).data() + c_in);
  });

  std::vector<Vec3> supports(order.size());
  Matrix<T> features(static_cast<Eigen::Index>(order.size()), c_in);
  NeighborhoodIndex all;
  for (std::size_t j = 0; j < order.size(); ++j) {
    supports[j] = neighbor_positions[order[j]];
    features.row(static_cast<Eigen::Index>(j)) = neighbor_features.row(static_cast<Eigen::Index>(order[j]));
    all.indices.push_back(static_cast<std::uint32_t>(j));
  }
  all.offsets = {0, order.size()};
  const std::vector<Vec3> queries{query};
  const ConvGeometry g = build_conv_geometry(layout, queries, supports, all);

  Matrix<T> agg = Matrix<T>::Zero(k_total, c_in);
  for (std::size_t p = 0; p < g.pair_count(); ++p) {
    const auto xs = features.row(g.pair_support[p]);
    for (std::size_t e = g.pair_offsets[p]; e < g.pair_offsets[p + 1]; ++e) {
      agg.row(g.entry_kernel[e]) += static_cast<T>(g.entry_weight[e]) * xs;
    }
  }
  return agg;
}

template class SPConv<float>;
template class SPConv<double>;
template Matrix<float> aggregate(const KernelLayout&, const Vec3&, std::span<const Vec3>,
                                 const Matrix<float>&);
template Matrix<double> aggregate(const KernelLayout&, const Vec3&, std::span<const Vec3>,
                                  const Matrix<double>&);

}  // namespace spnet
