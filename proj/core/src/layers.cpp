#include "spnet/layers.hpp"

#include <cmath>

#include "spnet/errors.hpp"

namespace spnet {

namespace detail {
KinkProbe& kink_probe() {
  static KinkProbe probe;
  return probe;
}
}  // namespace detail

template <class T>
Linear<T>::Linear(const std::string& name, std::size_t in, std::size_t out,
                  std::mt19937_64& rng)
    : weight(name, static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out)) {
  std::normal_distribution<double> gauss(0.0, std::sqrt(2.0 / static_cast<double>(in)));
  for (Eigen::Index i = 0; i < weight.value.size(); ++i) {
    weight.value.data()[i] = static_cast<T>(gauss(rng));
  }
}

template <class T>
Matrix<T> Linear<T>::forward(const Matrix<T>& x) {
  if (static_cast<std::size_t>(x.cols()) != in_features()) {
    throw ShapeError(weight.name + ": expected " + std::to_string(in_features()) +
                     " input channels, got " + std::to_string(x.cols()));
  }
  input_ = x;
  cached_ = true;
  return x * weight.value;
}

template <class T>
Matrix<T> Linear<T>::backward(const Matrix<T>& dy) {
  if (!cached_) throw StateError(weight.name + ": backward called before forward");
  weight.grad.noalias() += input_.transpose() * dy;
  return dy * weight.value.transpose();
}

template <class T>
BatchNorm<T>::BatchNorm(const std::string& name, std::size_t channels, double momentum,
                        double eps)
    : gamma(name + ".gamma", 1, static_cast<Eigen::Index>(channels)),
      beta(name + ".beta", 1, static_cast<Eigen::Index>(channels)),
      running_mean(name + ".running_mean", 1, static_cast<Eigen::Index>(channels), false),
      running_var(name + ".running_var", 1, static_cast<Eigen::Index>(channels), false),
      momentum_(momentum),
      eps_(eps) {
  gamma.value.setOnes();
  running_var.value.setOnes();
}

template <class T>
void BatchNorm<T>::collect(ParameterList<T>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
  out.push_back(&running_mean);
  out.push_back(&running_var);
}

template <class T>
Matrix<T> BatchNorm<T>::forward(const Matrix<T>& x, NormMode mode) {
  mode_ = mode;
  cached_ = true;
  if (mode == NormMode::identity) return x;
  if (x.cols() != gamma.value.cols()) throw ShapeError(gamma.name + ": channel mismatch");

  const Eigen::Index n = x.rows(), c = x.cols();
  inv_std_.resize(c);
  Matrix<T> y(n, c);
  if (mode == NormMode::eval) {
    for (Eigen::Index j = 0; j < c; ++j) {
      inv_std_[j] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var.value(0, j)) + eps_));
    }
    xhat_ = (x.rowwise() - running_mean.value.row(0)).array().rowwise() * inv_std_.array();
  } else {
    if (n == 0) {
      xhat_.resize(0, c);
      return y;
    }
    Eigen::Matrix<double, 1, Eigen::Dynamic> mean = Eigen::Matrix<double, 1, Eigen::Dynamic>::Zero(c);
    Eigen::Matrix<double, 1, Eigen::Dynamic> var = Eigen::Matrix<double, 1, Eigen::Dynamic>::Zero(c);
    for (Eigen::Index i = 0; i < n; ++i) mean += x.row(i).template cast<double>();
    mean /= static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      var += (x.row(i).template cast<double>() - mean).array().square().matrix();
    }
    var /= static_cast<double>(n);
    xhat_.resize(n, c);
    for (Eigen::Index j = 0; j < c; ++j) {
      const double inv = 1.0 / std::sqrt(var[j] + eps_);
      inv_std_[j] = static_cast<T>(inv);
      const T mu = static_cast<T>(mean[j]);
      for (Eigen::Index i = 0; i < n; ++i) xhat_(i, j) = (x(i, j) - mu) * inv_std_[j];
      const double unbiased = n > 1 ? var[j] * static_cast<double>(n) / static_cast<double>(n - 1) : var[j];
      running_mean.value(0, j) = static_cast<T>((1.0 - momentum_) * static_cast<double>(running_mean.value(0, j)) + momentum_ * mean[j]);
      running_var.value(0, j) = static_cast<T>((1.0 - momentum_) * static_cast<double>(running_var.value(0, j)) + momentum_ * unbiased);
    }
  }
  y = (xhat_.array().rowwise() * gamma.value.row(0).array()).rowwise() + beta.value.row(0).array();
  return y;
}

template <class T>
Matrix<T> BatchNorm<T>::backward(const Matrix<T>& dy) {
  if (!cached_) throw StateError(gamma.name + ": backward called before forward");
  if (mode_ == NormMode::identity) return dy;
  const Eigen::Index n = dy.rows();
  const auto dbeta = dy.colwise().sum();
  const auto dgamma = (dy.array() * xhat_.array()).colwise().sum();
  gamma.grad.row(0) += dgamma.matrix();
  beta.grad.row(0) += dbeta;
  const auto scale = (gamma.value.row(0).array() * inv_std_.array()).eval();
  if (mode_ == NormMode::eval) {
    return (dy.array().rowwise() * scale).matrix();
  }
  if (n == 0) return dy;
  const T inv_n = T(1) / static_cast<T>(n);
  Matrix<T> dx = ((dy.array().rowwise() - dbeta.array() * inv_n) -
                  xhat_.array().rowwise() * (dgamma * inv_n))
                     .rowwise() *
                 scale;
  return dx;
}

template class Linear<float>;
template class Linear<double>;
template class BatchNorm<float>;
template class BatchNorm<double>;

}  // namespace spnet
