#pragma once

#include <Eigen/Core>

namespace mottx {

// All learnable arrays and activations are row-major dense matrices. Vectors
// (biases, norm gains) are stored as 1 x n matrices so every parameter shares
// one type.
template <typename Scalar>
using Tensor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace mottx
