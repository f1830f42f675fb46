// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "skelbox/geometry.hpp"
#include "skelbox/tensor.hpp"

namespace skelbox {

template <typename Scalar>
struct ValueAndDerivative {
  Scalar value{};
  Scalar derivative{};
};

template <typename Scalar>
ValueAndDerivative<Scalar> smooth_l1(Scalar x) {
  using std::abs;
  if (abs(x) < Scalar(1)) return {Scalar(0.5) * x * x, x};
  return {abs(x) - Scalar(0.5), x > Scalar(0) ? Scalar(1) : Scalar(-1)};
}

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// log(sum(exp(logits))) with max subtraction.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& logits) {
  using std::exp;
  using std::log;
  const auto m = logits.maxCoeff();
  return m + log((logits.array() - m).exp().sum());
}

template <typename Scalar>
struct SoftmaxCE {
  Scalar value{};
  RowVector<Scalar> gradient;
};

/// -log softmax(logits)[label] and its gradient softmax - one_hot(label).
template <typename Derived>
SoftmaxCE<typename Derived::Scalar> softmax_ce(const Eigen::MatrixBase<Derived>& logits, Index label) {
  using Scalar = typename Derived::Scalar;
  if (label < 0 || label >= logits.size()) {
    throw ValidationError("softmax_ce: label " + std::to_string(label) + " outside [0, " +
                          std::to_string(logits.size() - 1) + "]");
  }
  const Scalar m = logits.maxCoeff();
  RowVector<Scalar> e(logits.size());
  for (Index i = 0; i < logits.size(); ++i) e(i) = std::exp(logits(i) - m);
  const Scalar z = e.sum();
  SoftmaxCE<Scalar> out;
  out.value = std::log(z) - (logits(label) - m);
  out.gradient = e / z;
  out.gradient(label) -= Scalar(1);
  return out;
}

struct LossReport {
  double total = 0.0;
  double conf = 0.0;
  double loc = 0.0;
  Index n_matched = 0;
  Index n_negatives = 0;
};

template <typename Scalar>
struct MultiboxLoss {
  LossReport report;
  RowMatrix<Scalar> grad_loc;   // num_priors x 4
  RowMatrix<Scalar> grad_conf;  // num_priors x (K + 1)
};

struct MultiboxOptions {
  double alpha = 1.0;
  double neg_ratio = 3.0;
};

/// Multibox objective (L_conf + alpha L_loc) / N over one image.
/// Ground truth class k occupies confidence slot k + 1; slot 0 is background.
/// Negatives are mined on background cross-entropy; the selection itself
/// carries no gradient.
template <typename Scalar>
MultiboxLoss<Scalar> multibox_loss(const RowMatrix<Scalar>& loc_pred, const RowMatrix<Scalar>& conf_pred,
                                   std::span<const Box<Scalar>> priors,
                                   std::span<const Box<Scalar>> gt_boxes, std::span<const int> gt_labels,
                                   const MatchResult<Scalar>& match, MultiboxOptions options = {}) {
  const Index num_priors = static_cast<Index>(priors.size());
  if (loc_pred.rows() != num_priors || conf_pred.rows() != num_priors || loc_pred.cols() != 4 ||
      static_cast<Index>(match.matches.size()) != num_priors) {
    throw ShapeError("multibox_loss: predictions loc " + std::to_string(loc_pred.rows()) + "x" +
                     std::to_string(loc_pred.cols()) + ", conf " + std::to_string(conf_pred.rows()) +
                     "x" + std::to_string(conf_pred.cols()) + " for " + std::to_string(num_priors) +
                     " priors");
  }
  if (gt_boxes.size() != gt_labels.size()) throw ShapeError("multibox_loss: gt boxes/labels differ");

  MultiboxLoss<Scalar> out;
  out.grad_loc = RowMatrix<Scalar>::Zero(num_priors, 4);
  out.grad_conf = RowMatrix<Scalar>::Zero(num_priors, conf_pred.cols());
  const Index n = match.num_matched();
  out.report.n_matched = n;
  if (n == 0) return out;

  std::vector<Scalar> background_ce(priors.size(), Scalar(0));
  for (Index p = 0; p < num_priors; ++p) {
    if (!match.matches[p].matched()) background_ce[p] = log_sum_exp(conf_pred.row(p)) - conf_pred(p, 0);
  }
  const std::vector<Index> negatives =
      hard_negative_mine<Scalar>(std::span<const Scalar>(background_ce), match, options.neg_ratio);
  out.report.n_negatives = static_cast<Index>(negatives.size());

  const Scalar inv_n = Scalar(1) / Scalar(n);
  const Scalar alpha = static_cast<Scalar>(options.alpha);
  Scalar loc_sum(0), conf_sum(0);
  for (Index p = 0; p < num_priors; ++p) {
    const auto& m = match.matches[p];
    if (!m.matched()) continue;
    const auto target = encode_offsets(priors[p], gt_boxes[m.gt]);
    const Scalar t[4] = {target.t_cx, target.t_cy, target.t_w, target.t_h};
    for (int k = 0; k < 4; ++k) {
      const auto s = smooth_l1(loc_pred(p, k) - t[k]);
      loc_sum += s.value;
      out.grad_loc(p, k) = alpha * s.derivative * inv_n;
    }
    const auto ce = softmax_ce(conf_pred.row(p), gt_labels[m.gt] + 1);
    conf_sum += ce.value;
    out.grad_conf.row(p) = ce.gradient * inv_n;
  }
  for (Index p : negatives) {
    const auto ce = softmax_ce(conf_pred.row(p), 0);
    conf_sum += ce.value;
    out.grad_conf.row(p) = ce.gradient * inv_n;
  }
  out.report.loc = static_cast<double>(loc_sum);
  out.report.conf = static_cast<double>(conf_sum);
  out.report.total = static_cast<double>((conf_sum + alpha * loc_sum) * inv_n);
  return out;
}

}  // namespace skelbox
