#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <string>
#include <vector>

namespace spnet {

// Row-major dense matrix; rows are points (or point pairs), columns channels.
template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A named tensor with its gradient. Non-trainable parameters (batch-norm
// running statistics) are serialised but skipped by optimisers and gradcheck.
template <class T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols, bool is_trainable = true)
      : name(std::move(n)),
        value(Matrix<T>::Zero(rows, cols)),
        grad(Matrix<T>::Zero(rows, cols)),
        trainable(is_trainable) {}

  std::size_t size() const { return static_cast<std::size_t>(value.size()); }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

template <class T>
using ParameterList = std::vector<Parameter<T>*>;

}  // namespace spnet
