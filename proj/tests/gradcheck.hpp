// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
// Central finite-difference checks shared by the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "skelbox/rng.hpp"
#include "skelbox/tensor.hpp"

namespace skelbox::testing {

inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Largest element-wise relative error between `analytic` and the central
/// difference of `f` around `x` (x is restored afterwards).
template <typename Vec, typename Grad>
double max_fd_error(Vec&& x, const Grad& analytic, const std::function<double()>& f, double step = 1e-5) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = f();
    x[i] = saved - step;
    const double down = f();
    x[i] = saved;
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2 * step)));
  }
  return worst;
}

inline TensorD random_tensor(Rng& rng, Shape shape, double lo = -1, double hi = 1) {
  TensorD t(std::move(shape));
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

/// Entries are a shuffled grid with spacing 0.01, so a 1e-5 step never
/// changes which element of a window is largest.
inline TensorD distinct_tensor(Rng& rng, Shape shape) {
  TensorD t(std::move(shape));
  std::vector<double> values(static_cast<std::size_t>(t.size()));
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = 0.01 * double(i) - 0.005 * double(values.size()) + 0.0025;
  shuffle(values.begin(), values.end(), rng);
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = values[static_cast<std::size_t>(i)];
  return t;
}

inline double weighted_sum(const TensorD& y, const TensorD& w) { return y.data().dot(w.data()); }

}  // namespace skelbox::testing
