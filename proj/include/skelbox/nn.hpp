// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <string>

#include "skelbox/tensor.hpp"

namespace skelbox {

struct Extent2 {
  Index rows = 1;
  Index cols = 1;
  friend bool operator==(const Extent2&, const Extent2&) = default;
};

inline Index conv_out_extent(Index in, Index kernel, Index stride, Index pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

namespace detail {

inline void require_rank(const Shape& s, Index rank, const char* what) {
  if (static_cast<Index>(s.size()) != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(s));
  }
}

inline void check_conv_shapes(const Shape& in, const Shape& kernel, Extent2 stride, Extent2 pad) {
  require_rank(in, 3, "conv2d input");
  require_rank(kernel, 4, "conv2d kernel");
  if (in[2] != kernel[2]) {
    throw ShapeError("conv2d: input " + shape_string(in) + " has " + std::to_string(in[2]) +
                     " channels but kernel " + shape_string(kernel) + " expects " +
                     std::to_string(kernel[2]));
  }
  if (in[0] + 2 * pad.rows < kernel[0] || in[1] + 2 * pad.cols < kernel[1]) {
    throw ShapeError("conv2d: padded input " + shape_string(in) + " smaller than kernel " +
                     shape_string(kernel));
  }
  if (stride.rows < 1 || stride.cols < 1 || pad.rows < 0 || pad.cols < 0) {
    throw ShapeError("conv2d: invalid stride or padding");
  }
}

/// Patch matrix: one row per output position, (kr, kc, cin) per column.
template <typename Scalar>
RowMatrix<Scalar> im2col(const Tensor<Scalar>& in, Index kh, Index kw, Extent2 stride, Extent2 pad,
                         Index out_h, Index out_w) {
  const Index h = in.dim(0), w = in.dim(1), cin = in.dim(2);
  RowMatrix<Scalar> cols = RowMatrix<Scalar>::Zero(out_h * out_w, kh * kw * cin);
  for (Index oy = 0; oy < out_h; ++oy) {
    for (Index ox = 0; ox < out_w; ++ox) {
      Scalar* row = cols.data() + (oy * out_w + ox) * cols.cols();
      for (Index i = 0; i < kh; ++i) {
        const Index y = oy * stride.rows - pad.rows + i;
        if (y < 0 || y >= h) continue;
        for (Index j = 0; j < kw; ++j) {
          const Index x = ox * stride.cols - pad.cols + j;
          if (x < 0 || x >= w) continue;
          std::copy_n(in.ptr() + (y * w + x) * cin, cin, row + (i * kw + j) * cin);
        }
      }
    }
  }
  return cols;
}

template <typename Scalar>
void col2im_add(const RowMatrix<Scalar>& cols, Tensor<Scalar>& grad_in, Index kh, Index kw,
                Extent2 stride, Extent2 pad, Index out_h, Index out_w) {
  const Index h = grad_in.dim(0), w = grad_in.dim(1), cin = grad_in.dim(2);
  for (Index oy = 0; oy < out_h; ++oy) {
    for (Index ox = 0; ox < out_w; ++ox) {
      const Scalar* row = cols.data() + (oy * out_w + ox) * cols.cols();
      for (Index i = 0; i < kh; ++i) {
        const Index y = oy * stride.rows - pad.rows + i;
        if (y < 0 || y >= h) continue;
        for (Index j = 0; j < kw; ++j) {
          const Index x = ox * stride.cols - pad.cols + j;
          if (x < 0 || x >= w) continue;
          Scalar* dst = grad_in.ptr() + (y * w + x) * cin;
          const Scalar* src = row + (i * kw + j) * cin;
          for (Index c = 0; c < cin; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

}  // namespace detail

/// Zero-padded cross-correlation. input [H, W, Cin], kernel [kh, kw, Cin, Cout].
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& kernel, Extent2 stride = {},
                      Extent2 pad = {0, 0}) {
  detail::check_conv_shapes(input.shape(), kernel.shape(), stride, pad);
  const Index kh = kernel.dim(0), kw = kernel.dim(1), cout = kernel.dim(3);
  const Index out_h = conv_out_extent(input.dim(0), kh, stride.rows, pad.rows);
  const Index out_w = conv_out_extent(input.dim(1), kw, stride.cols, pad.cols);
  Tensor<Scalar> out({out_h, out_w, cout});
  const auto k_mat = typename Tensor<Scalar>::ConstMatrixMap(kernel.ptr(), kh * kw * kernel.dim(2), cout);
  if (kh == 1 && kw == 1 && stride == Extent2{} && pad == Extent2{0, 0}) {
    out.matrix().noalias() = input.matrix() * k_mat;
  } else {
    out.matrix().noalias() = detail::im2col(input, kh, kw, stride, pad, out_h, out_w) * k_mat;
  }
  return out;
}

template <typename Scalar>
struct ConvGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> kernel;
};

/// Adjoint of conv2d with respect to both input and kernel.
template <typename Scalar>
ConvGrads<Scalar> conv2d_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& kernel,
                                  const Tensor<Scalar>& grad_out, Extent2 stride = {},
                                  Extent2 pad = {0, 0}) {
  detail::check_conv_shapes(input.shape(), kernel.shape(), stride, pad);
  const Index kh = kernel.dim(0), kw = kernel.dim(1), cin = kernel.dim(2), cout = kernel.dim(3);
  const Index out_h = conv_out_extent(input.dim(0), kh, stride.rows, pad.rows);
  const Index out_w = conv_out_extent(input.dim(1), kw, stride.cols, pad.cols);
  if (grad_out.shape() != Shape{out_h, out_w, cout}) {
    throw ShapeError("conv2d_backward: upstream gradient " + shape_string(grad_out.shape()) +
                     " does not match output " + shape_string({out_h, out_w, cout}));
  }
  ConvGrads<Scalar> grads{Tensor<Scalar>::zeros_like(input), Tensor<Scalar>::zeros_like(kernel)};
  const auto k_mat = typename Tensor<Scalar>::ConstMatrixMap(kernel.ptr(), kh * kw * cin, cout);
  auto dk_mat = typename Tensor<Scalar>::MatrixMap(grads.kernel.ptr(), kh * kw * cin, cout);
  const auto g = grad_out.matrix();
  if (kh == 1 && kw == 1 && stride == Extent2{} && pad == Extent2{0, 0}) {
    dk_mat.noalias() = input.matrix().transpose() * g;
    grads.input.matrix().noalias() = g * k_mat.transpose();
    return grads;
  }
  const RowMatrix<Scalar> cols = detail::im2col(input, kh, kw, stride, pad, out_h, out_w);
  dk_mat.noalias() = cols.transpose() * g;
  const RowMatrix<Scalar> dcols = g * k_mat.transpose();
  detail::col2im_add(dcols, grads.input, kh, kw, stride, pad, out_h, out_w);
  return grads;
}

/// Adds bias[c] to every position of channel c.
template <typename Scalar>
void add_bias(Tensor<Scalar>& t, const Tensor<Scalar>& bias) {
  if (bias.size() != t.shape().back()) {
    throw ShapeError("add_bias: bias " + shape_string(bias.shape()) + " vs tensor " +
                     shape_string(t.shape()));
  }
  t.matrix().rowwise() += bias.data().transpose();
}

template <typename Scalar>
Tensor<Scalar> bias_backward(const Tensor<Scalar>& grad_out) {
  Tensor<Scalar> g({grad_out.shape().back()});
  g.data() = grad_out.matrix().colwise().sum().transpose();
  return g;
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  Tensor<Scalar> y = x;
  y.data() = y.data().cwiseMax(Scalar(0));
  return y;
}

/// Passes gradient where the forward input was strictly positive.
template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& grad_out) {
  Tensor<Scalar>::require_same_shape(x, grad_out, "relu_backward");
  Tensor<Scalar> g = grad_out;
  g.data() = (x.data().array() > Scalar(0)).select(grad_out.data(), Scalar(0));
  return g;
}

/// Window max over [H, W, C]. Windows are not padded; the output extent is
/// floor((H - window) / stride) + 1 on each axis.
template <typename Scalar>
Tensor<Scalar> maxpool(const Tensor<Scalar>& x, Extent2 window, Extent2 stride) {
  detail::require_rank(x.shape(), 3, "maxpool");
  const Index h = x.dim(0), w = x.dim(1), c = x.dim(2);
  if (window.rows > h || window.cols > w) {
    throw ShapeError("maxpool: window larger than input " + shape_string(x.shape()));
  }
  const Index out_h = conv_out_extent(h, window.rows, stride.rows, 0);
  const Index out_w = conv_out_extent(w, window.cols, stride.cols, 0);
  Tensor<Scalar> y({out_h, out_w, c});
  for (Index oy = 0; oy < out_h; ++oy) {
    for (Index ox = 0; ox < out_w; ++ox) {
      for (Index k = 0; k < c; ++k) {
        Scalar best = x(oy * stride.rows, ox * stride.cols, k);
        for (Index i = 0; i < window.rows; ++i) {
          for (Index j = 0; j < window.cols; ++j) {
            best = std::max(best, x(oy * stride.rows + i, ox * stride.cols + j, k));
          }
        }
        y(oy, ox, k) = best;
      }
    }
  }
  return y;
}

/// Routes each output gradient to the first (row-major) maximizer of its window.
template <typename Scalar>
Tensor<Scalar> maxpool_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& grad_out, Extent2 window,
                                Extent2 stride) {
  detail::require_rank(x.shape(), 3, "maxpool_backward");
  const Index h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const Index out_h = conv_out_extent(h, window.rows, stride.rows, 0);
  const Index out_w = conv_out_extent(w, window.cols, stride.cols, 0);
  if (grad_out.shape() != Shape{out_h, out_w, c}) {
    throw ShapeError("maxpool_backward: upstream gradient " + shape_string(grad_out.shape()) +
                     " does not match output " + shape_string({out_h, out_w, c}));
  }
  Tensor<Scalar> g = Tensor<Scalar>::zeros_like(x);
  for (Index oy = 0; oy < out_h; ++oy) {
    for (Index ox = 0; ox < out_w; ++ox) {
      for (Index k = 0; k < c; ++k) {
        Index by = oy * stride.rows, bx = ox * stride.cols;
        for (Index i = 0; i < window.rows; ++i) {
          for (Index j = 0; j < window.cols; ++j) {
            const Index yy = oy * stride.rows + i, xx = ox * stride.cols + j;
            if (x(yy, xx, k) > x(by, bx, k)) {
              by = yy;
              bx = xx;
            }
          }
        }
        g(by, bx, k) += grad_out(oy, ox, k);
      }
    }
  }
  return g;
}

}  // namespace skelbox
