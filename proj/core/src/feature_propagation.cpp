#include "spnet/feature_propagation.hpp"

#include <string>

#include "spnet/errors.hpp"
#include "spnet/neighborhood.hpp"

namespace spnet {

std::string_view to_string(FpWeighting w) {
  return w == FpWeighting::inverse ? "inverse" : "inverse_square";
}

FpWeighting parse_fp_weighting(std::string_view name) {
  if (name == "inverse_square") return FpWeighting::inverse_square;
  if (name == "inverse") return FpWeighting::inverse;
  throw ParameterError("unknown feature propagation weighting '" + std::string(name) + "'");
}

FpWeights compute_fp_weights(std::span<const Vec3> coarse, std::span<const Vec3> fine,
                             std::size_t k, FpWeighting weighting) {
  if (k == 0) throw ParameterError("feature propagation needs k >= 1");
  if (coarse.empty()) throw InputError("feature propagation needs a non-empty coarse set");
  FpWeights out;
  out.fine_count = fine.size();
  out.coarse_count = coarse.size();
  if (fine.empty()) {
    out.k = std::min(k, coarse.size());
    return out;
  }
  const KnnResult knn = knn_search(fine, coarse, k);
  out.k = knn.k;
  out.indices = knn.indices;
  out.weights.assign(knn.distances.size(), 0.0);

  for (std::size_t i = 0; i < fine.size(); ++i) {
    const auto dist = knn.neighbor_distances(i);
    double* w = out.weights.data() + i * out.k;
    if (dist[0] < kCoincidentDistance) {
      w[0] = 1.0;
      continue;
    }
    double total = 0.0;
    for (std::size_t j = 0; j < out.k; ++j) {
      const double d = 1.0 / dist[j];
      w[j] = weighting == FpWeighting::inverse_square ? d * d : d;
      total += w[j];
    }
    for (std::size_t j = 0; j < out.k; ++j) w[j] /= total;
  }
  return out;
}

FpWeights concat_fp_weights(std::span<const FpWeights* const> parts) {
  FpWeights out;
  if (parts.empty()) return out;
  out.k = parts.front()->k;
  for (const FpWeights* part : parts) {
    if (part->k != out.k) throw ShapeError("cannot merge stencils with different k");
    const auto base = static_cast<std::uint32_t>(out.coarse_count);
    for (std::uint32_t idx : part->indices) out.indices.push_back(base + idx);
    out.weights.insert(out.weights.end(), part->weights.begin(), part->weights.end());
    out.fine_count += part->fine_count;
    out.coarse_count += part->coarse_count;
  }
  return out;
}

template <class T>
Matrix<T> apply_fp(const FpWeights& w, const Matrix<T>& coarse_features) {
  if (static_cast<std::size_t>(coarse_features.rows()) != w.coarse_count) {
    throw ShapeError("coarse feature rows do not match the stencil");
  }
  Matrix<T> out = Matrix<T>::Zero(static_cast<Eigen::Index>(w.fine_count), coarse_features.cols());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(w.fine_count); ++i) {
    const auto idx = w.neighbors(static_cast<std::size_t>(i));
    const auto wt = w.neighbor_weights(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < w.k; ++j) {
      if (wt[j] == 0.0) continue;
      if (wt[j] == 1.0) {
        out.row(i) = coarse_features.row(idx[j]);
      } else {
        out.row(i) += static_cast<T>(wt[j]) * coarse_features.row(idx[j]);
      }
    }
  }
  return out;
}

template <class T>
Matrix<T> apply_fp_backward(const FpWeights& w, const Matrix<T>& grad_fine) {
  if (static_cast<std::size_t>(grad_fine.rows()) != w.fine_count) {
    throw ShapeError("fine gradient rows do not match the stencil");
  }
  // Sequential scatter keeps the accumulation order fixed.
  Matrix<T> out = Matrix<T>::Zero(static_cast<Eigen::Index>(w.coarse_count), grad_fine.cols());
  for (std::size_t i = 0; i < w.fine_count; ++i) {
    const auto idx = w.neighbors(i);
    const auto wt = w.neighbor_weights(i);
    for (std::size_t j = 0; j < w.k; ++j) {
      if (wt[j] == 0.0) continue;
      out.row(idx[j]) += static_cast<T>(wt[j]) * grad_fine.row(static_cast<Eigen::Index>(i));
    }
  }
  return out;
}

template <class T>
Matrix<T> propagate_features(std::span<const Vec3> coarse, const Matrix<T>& coarse_features,
                             std::span<const Vec3> fine, std::size_t k, FpWeighting weighting) {
  return apply_fp(compute_fp_weights(coarse, fine, k, weighting), coarse_features);
}

template Matrix<float> apply_fp(const FpWeights&, const Matrix<float>&);
template Matrix<double> apply_fp(const FpWeights&, const Matrix<double>&);
template Matrix<float> apply_fp_backward(const FpWeights&, const Matrix<float>&);
template Matrix<double> apply_fp_backward(const FpWeights&, const Matrix<double>&);
template Matrix<float> propagate_features(std::span<const Vec3>, const Matrix<float>&,
                                          std::span<const Vec3>, std::size_t, FpWeighting);
template Matrix<double> propagate_features(std::span<const Vec3>, const Matrix<double>&,
                                           std::span<const Vec3>, std::size_t, FpWeighting);

}  // namespace spnet
