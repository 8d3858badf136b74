#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "spnet/kernel_layout.hpp"
#include "spnet/point_cloud.hpp"
#include "spnet/tensor.hpp"

namespace spnet::test {

// Straight-line scalar evaluators written from the operator definitions,
// sharing no code with the library beyond plain data types.

inline double ref_correlation(const Vec3& kernel, const Vec3& offset, double v) {
  const double dx = offset[0] - kernel[0];
  const double dy = offset[1] - kernel[1];
  const double dz = offset[2] - kernel[2];
  const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
  const double w = 1.0 - d / v;
  return w > 0.0 ? w : 0.0;
}

struct RefMlp {
  std::vector<Matrix<double>> weights;  // [in x out]
  std::vector<Matrix<double>> biases;   // [1 x out]
};

inline double ref_mlp_omega(const RefMlp& mlp, const std::vector<double>& diff) {
  std::vector<double> h = diff;
  for (std::size_t layer = 0; layer < mlp.weights.size(); ++layer) {
    const Matrix<double>& w = mlp.weights[layer];
    std::vector<double> z(static_cast<std::size_t>(w.cols()));
    for (Eigen::Index o = 0; o < w.cols(); ++o) {
      double acc = mlp.biases[layer](0, o);
      for (Eigen::Index i = 0; i < w.rows(); ++i) acc += h[static_cast<std::size_t>(i)] * w(i, o);
      z[static_cast<std::size_t>(o)] = acc;
    }
    if (layer + 1 < mlp.weights.size()) {
      for (double& x : z) x = x > 0.0 ? x : 0.0;
      h = z;
    } else {
      return 1.0 / (1.0 + std::exp(-z[0]));
    }
  }
  return 0.0;
}

enum class RefAttention { none, gaussian, mlp };

struct RefSPConv {
  const KernelLayout* layout = nullptr;
  double query_radius = 0.0;
  Matrix<double> w1, w2;
  RefAttention attention = RefAttention::none;
  double sigma = 1.0;
  RefMlp mlp;
  bool activation = true;
  double slope = 0.1;
};

inline double ref_act(const RefSPConv& c, double x) {
  if (!c.activation) return x;
  return x > 0.0 ? x : c.slope * x;
}

// Output [Q x C_out] with identity batch normalisation.
inline Matrix<double> ref_spconv_forward(const RefSPConv& c, const std::vector<Vec3>& queries,
                                         const std::vector<Vec3>& supports,
                                         const Matrix<double>& x, const Matrix<double>* query_attr,
                                         const Matrix<double>* support_attr) {
  const KernelLayout& layout = *c.layout;
  const std::size_t K = layout.points.size();
  const std::size_t N = layout.shells.size();
  const auto cin = static_cast<std::size_t>(x.cols());
  const auto half = static_cast<std::size_t>(c.w1.cols());
  const auto cout = static_cast<std::size_t>(c.w2.cols());
  Matrix<double> out(static_cast<Eigen::Index>(queries.size()), static_cast<Eigen::Index>(cout));
  for (std::size_t q = 0; q < queries.size(); ++q) {
    std::vector<double> agg(K * cin, 0.0);
    for (std::size_t s = 0; s < supports.size(); ++s) {
      const Vec3 off{supports[s][0] - queries[q][0], supports[s][1] - queries[q][1],
                     supports[s][2] - queries[q][2]};
      if (!(std::sqrt(off[0] * off[0] + off[1] * off[1] + off[2] * off[2]) < c.query_radius)) continue;
      double omega = 0.0;
      if (c.attention != RefAttention::none) {
        std::vector<double> diff(static_cast<std::size_t>(query_attr->cols()));
        for (std::size_t a = 0; a < diff.size(); ++a) {
          diff[a] = (*query_attr)(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(a)) -
                    (*support_attr)(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
        }
        if (c.attention == RefAttention::gaussian) {
          double sq = 0.0;
          for (double d : diff) sq += d * d;
          omega = std::exp(-std::sqrt(sq) / (2.0 * c.sigma * c.sigma));
        } else {
          omega = ref_mlp_omega(c.mlp, diff);
        }
      }
      for (std::size_t k = 0; k < K; ++k) {
        const double corr = ref_correlation(layout.points[k], off, layout.influence);
        if (corr == 0.0) continue;
        for (std::size_t ch = 0; ch < cin; ++ch) {
          const double f = x(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(ch));
          const double fp = c.attention == RefAttention::none ? f : omega * f + f;
          agg[k * cin + ch] += corr * fp;
        }
      }
    }
    std::vector<double> hidden(N * half, 0.0);
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t o = 0; o < half; ++o) {
        double acc = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          if (layout.shell_of[k] != n) continue;
          for (std::size_t ch = 0; ch < cin; ++ch) {
            acc += agg[k * cin + ch] *
                   c.w1(static_cast<Eigen::Index>(k * cin + ch), static_cast<Eigen::Index>(o));
          }
        }
        hidden[n * half + o] = ref_act(c, acc);
      }
    }
    for (std::size_t j = 0; j < cout; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < N * half; ++i) {
        acc += hidden[i] * c.w2(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
      out(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(j)) = ref_act(c, acc);
    }
  }
  return out;
}

// Eq.-style single-kernel-set point convolution: sum_k sum_j corr(k, j) f_j W_k.
inline Matrix<double> ref_point_conv(const KernelLayout& layout, double query_radius,
                                     const std::vector<Vec3>& queries,
                                     const std::vector<Vec3>& supports, const Matrix<double>& x,
                                     const Matrix<double>& w) {
  const auto cin = static_cast<std::size_t>(x.cols());
  Matrix<double> out = Matrix<double>::Zero(static_cast<Eigen::Index>(queries.size()), w.cols());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    for (std::size_t s = 0; s < supports.size(); ++s) {
      const Vec3 off{supports[s][0] - queries[q][0], supports[s][1] - queries[q][1],
                     supports[s][2] - queries[q][2]};
      if (!(std::sqrt(off[0] * off[0] + off[1] * off[1] + off[2] * off[2]) < query_radius)) continue;
      for (std::size_t k = 0; k < layout.points.size(); ++k) {
        const double corr = ref_correlation(layout.points[k], off, layout.influence);
        for (Eigen::Index o = 0; o < w.cols(); ++o) {
          double acc = 0.0;
          for (std::size_t ch = 0; ch < cin; ++ch) {
            acc += x(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(ch)) *
                   w(static_cast<Eigen::Index>(k * cin + ch), o);
          }
          out(static_cast<Eigen::Index>(q), o) += corr * acc;
        }
      }
    }
  }
  return out;
}

}  // namespace spnet::test
