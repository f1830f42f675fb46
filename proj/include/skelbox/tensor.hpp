// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "skelbox/error.hpp"

namespace skelbox {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ']';
  return out.str();
}

inline Index shape_volume(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

/// Dense row-major n-dimensional array backed by an Eigen column vector.
/// Image-like tensors use [rows, cols, channels]; kernels use
/// [kernel_rows, kernel_cols, in_channels, out_channels].
template <typename Scalar>
class Tensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using MatrixMap = Eigen::Map<RowMatrix<Scalar>>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix<Scalar>>;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    for (Index extent : shape_) {
      if (extent <= 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape_));
    }
    data_ = Vector::Zero(shape_volume(shape_));
  }

  Tensor(Shape shape, Vector data) : Tensor(std::move(shape)) {
    if (data.size() != data_.size()) {
      throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                       shape_string(shape_));
    }
    data_ = std::move(data);
  }

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const noexcept { return shape_; }
  Index rank() const noexcept { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.size() == 0; }

  Vector& data() noexcept { return data_; }
  const Vector& data() const noexcept { return data_; }
  Scalar* ptr() noexcept { return data_.data(); }
  const Scalar* ptr() const noexcept { return data_.data(); }

  /// View as a row-major matrix whose column count is the last extent.
  MatrixMap matrix() { return MatrixMap(data_.data(), size() / shape_.back(), shape_.back()); }
  ConstMatrixMap matrix() const {
    return ConstMatrixMap(data_.data(), size() / shape_.back(), shape_.back());
  }

  Scalar& operator[](Index i) { return data_[i]; }
  const Scalar& operator[](Index i) const { return data_[i]; }

  Scalar& operator()(Index r, Index c, Index k) { return data_[(r * shape_[1] + c) * shape_[2] + k]; }
  const Scalar& operator()(Index r, Index c, Index k) const {
    return data_[(r * shape_[1] + c) * shape_[2] + k];
  }
  Scalar& operator()(Index a, Index b, Index c, Index d) {
    return data_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }
  const Scalar& operator()(Index a, Index b, Index c, Index d) const {
    return data_[((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }

  void set_zero() { data_.setZero(); }

  Tensor& operator+=(const Tensor& other) {
    require_same_shape(*this, other, "operator+=");
    data_ += other.data_;
    return *this;
  }
  Tensor& operator*=(Scalar s) {
    data_ *= s;
    return *this;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  static void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
    if (a.shape_ != b.shape_) {
      throw ShapeError(std::string(where) + ": shape mismatch " + shape_string(a.shape_) + " vs " +
                       shape_string(b.shape_));
    }
  }

 private:
  Shape shape_;
  Vector data_;
};

using TensorD = Tensor<double>;

}  // namespace skelbox
