// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "skelbox/encoding.hpp"
#include "skelbox/error.hpp"
#include "skelbox/tensor.hpp"

namespace skelbox {

/// Center-size box in coordinates normalized by the image extent.
/// x runs along columns (time), y along rows (joints).
template <typename Scalar>
struct Box {
  Scalar cx{};
  Scalar cy{};
  Scalar w{};
  Scalar h{};

  Scalar xmin() const { return cx - w / 2; }
  Scalar xmax() const { return cx + w / 2; }
  Scalar ymin() const { return cy - h / 2; }
  Scalar ymax() const { return cy + h / 2; }
  Scalar area() const { return w * h; }
  friend bool operator==(const Box&, const Box&) = default;
};

template <typename Scalar>
struct BoxOffsets {
  Scalar t_cx{};
  Scalar t_cy{};
  Scalar t_w{};
  Scalar t_h{};

  friend bool operator==(const BoxOffsets&, const BoxOffsets&) = default;
};

using BoxD = Box<double>;
using BoxOffsetsD = BoxOffsets<double>;

template <typename Scalar>
Scalar overlap_1d(Scalar a_lo, Scalar a_hi, Scalar b_lo, Scalar b_hi) {
  return std::max(Scalar(0), std::min(a_hi, b_hi) - std::max(a_lo, b_lo));
}

template <typename Scalar>
Scalar iou_box(const Box<Scalar>& a, const Box<Scalar>& b) {
  const Scalar inter = overlap_1d(a.xmin(), a.xmax(), b.xmin(), b.xmax()) *
                       overlap_1d(a.ymin(), a.ymax(), b.ymin(), b.ymax());
  if (inter <= Scalar(0)) return Scalar(0);
  // Areas from the same corners as the overlap, so iou(a, a) is exactly 1.
  const Scalar area_a = (a.xmax() - a.xmin()) * (a.ymax() - a.ymin());
  const Scalar area_b = (b.xmax() - b.xmin()) * (b.ymax() - b.ymin());
  return inter / (area_a + area_b - inter);
}

/// |a ∩ b| / |a ∪ b| for half-open intervals given as (start, end).
template <typename Scalar>
Scalar iou_interval(std::pair<Scalar, Scalar> a, std::pair<Scalar, Scalar> b) {
  const Scalar inter = overlap_1d(a.first, a.second, b.first, b.second);
  if (inter <= Scalar(0)) return Scalar(0);
  const Scalar uni = (a.second - a.first) + (b.second - b.first) - inter;
  return inter / uni;
}

template <typename Scalar>
BoxOffsets<Scalar> encode_offsets(const Box<Scalar>& prior, const Box<Scalar>& gt) {
  using std::log;
  return {(gt.cx - prior.cx) / prior.w, (gt.cy - prior.cy) / prior.h, log(gt.w / prior.w),
          log(gt.h / prior.h)};
}

template <typename Scalar>
Box<Scalar> decode_offsets(const Box<Scalar>& prior, const BoxOffsets<Scalar>& t) {
  using std::exp;
  return {prior.cx + t.t_cx * prior.w, prior.cy + t.t_cy * prior.h, prior.w * exp(t.t_w),
          prior.h * exp(t.t_h)};
}

/// Clip the box extent to [0, 1] on both axes, returned in center-size form.
template <typename Scalar>
Box<Scalar> clip_unit(const Box<Scalar>& b) {
  const Scalar x0 = std::clamp(b.xmin(), Scalar(0), Scalar(1));
  const Scalar x1 = std::clamp(b.xmax(), Scalar(0), Scalar(1));
  const Scalar y0 = std::clamp(b.ymin(), Scalar(0), Scalar(1));
  const Scalar y1 = std::clamp(b.ymax(), Scalar(0), Scalar(1));
  return {(x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0};
}

// ---------------------------------------------------------------------------
// Default boxes

struct FeatureMapShape {
  Index rows = 0;
  Index cols = 0;
  friend bool operator==(const FeatureMapShape&, const FeatureMapShape&) = default;
};

/// Aspect ratio a = w / h.
struct PriorConfig {
  std::vector<double> aspect_ratios{1.0 / 7, 1.0 / 5, 1.0 / 3, 1.0 / 2, 1.0, 2.0, 3.0, 5.0, 7.0};
  std::vector<double> layer_scales{0.1, 0.2, 0.375, 0.55, 0.725, 0.9};
  std::vector<FeatureMapShape> feature_map_shapes;

  void validate() const {
    if (aspect_ratios.empty()) throw ConfigError("prior config: aspect_ratios is empty");
    for (double a : aspect_ratios) {
      if (!(a > 0)) throw ConfigError("prior config: aspect ratios must be positive");
    }
    if (layer_scales.size() != feature_map_shapes.size()) {
      throw ConfigError("prior config: " + std::to_string(layer_scales.size()) + " layer scales for " +
                        std::to_string(feature_map_shapes.size()) + " feature maps");
    }
    for (std::size_t i = 0; i < layer_scales.size(); ++i) {
      if (!(layer_scales[i] > 0 && layer_scales[i] <= 1)) {
        throw ConfigError("prior config: layer scales must lie in (0, 1]");
      }
      if (i > 0 && !(layer_scales[i] > layer_scales[i - 1])) {
        throw ConfigError("prior config: layer scales must be strictly increasing");
      }
    }
    for (const auto& s : feature_map_shapes) {
      if (s.rows <= 0 || s.cols <= 0) throw ConfigError("prior config: empty feature map");
    }
  }

  Index count() const {
    Index n = 0;
    for (const auto& s : feature_map_shapes) n += s.rows * s.cols;
    return n * static_cast<Index>(aspect_ratios.size());
  }
};

/// Where a prior came from; same order as generate_priors.
struct PriorInfo {
  int layer = 0;
  Index row = 0;
  Index col = 0;
  double ratio = 1.0;
};

/// Default boxes in layer-major, row-major, ratio-minor order.
template <typename Scalar = double>
std::vector<Box<Scalar>> generate_priors(const PriorConfig& config) {
  config.validate();
  std::vector<Box<Scalar>> priors;
  priors.reserve(static_cast<std::size_t>(config.count()));
  for (std::size_t layer = 0; layer < config.feature_map_shapes.size(); ++layer) {
    const auto [rows, cols] = config.feature_map_shapes[layer];
    const Scalar scale = static_cast<Scalar>(config.layer_scales[layer]);
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) {
        const Scalar cx = (Scalar(c) + Scalar(0.5)) / Scalar(cols);
        const Scalar cy = (Scalar(r) + Scalar(0.5)) / Scalar(rows);
        for (double a : config.aspect_ratios) {
          const Scalar root = std::sqrt(static_cast<Scalar>(a));
          priors.push_back({cx, cy, scale * root, scale / root});
        }
      }
    }
  }
  return priors;
}

std::vector<PriorInfo> prior_layout(const PriorConfig& config);

// ---------------------------------------------------------------------------
// Matching

template <typename Scalar>
struct PriorMatch {
  int gt = -1;  // -1 = unmatched
  Scalar iou{};
  bool matched() const { return gt >= 0; }
};

template <typename Scalar>
struct MatchResult {
  std::vector<PriorMatch<Scalar>> matches;
  std::vector<Index> best_prior;  // per gt, the prior claimed in stage 1

  Index num_matched() const {
    return std::count_if(matches.begin(), matches.end(), [](const auto& m) { return m.matched(); });
  }
};

/// Two-stage matching. Stage 1 walks the ground truths in order and gives
/// each its highest-IoU prior not yet claimed (lowest index on ties).
/// Stage 2 assigns every remaining prior to its best ground truth when that
/// IoU exceeds `threshold`.
template <typename Scalar>
MatchResult<Scalar> match_gt(std::span<const Box<Scalar>> priors, std::span<const Box<Scalar>> gts,
                             Scalar threshold) {
  const Index num_priors = static_cast<Index>(priors.size());
  const Index num_gts = static_cast<Index>(gts.size());
  MatchResult<Scalar> result;
  result.matches.assign(priors.size(), {});
  if (num_gts == 0) return result;

  RowMatrix<Scalar> iou(num_priors, num_gts);
  for (Index p = 0; p < num_priors; ++p) {
    for (Index g = 0; g < num_gts; ++g) iou(p, g) = iou_box(priors[p], gts[g]);
  }

  std::vector<bool> claimed(priors.size(), false);
  result.best_prior.assign(gts.size(), -1);
  for (Index g = 0; g < num_gts; ++g) {
    Index best = -1;
    for (Index p = 0; p < num_priors; ++p) {
      if (claimed[p]) continue;
      if (best < 0 || iou(p, g) > iou(best, g)) best = p;
    }
    if (best < 0) continue;
    claimed[best] = true;
    result.best_prior[g] = best;
    result.matches[best] = {static_cast<int>(g), iou(best, g)};
  }

  for (Index p = 0; p < num_priors; ++p) {
    if (claimed[p]) continue;
    Index g_best = 0;
    for (Index g = 1; g < num_gts; ++g) {
      if (iou(p, g) > iou(p, g_best)) g_best = g;
    }
    if (iou(p, g_best) > threshold) result.matches[p] = {static_cast<int>(g_best), iou(p, g_best)};
  }
  return result;
}

/// Unmatched priors with the largest confidence loss, at most
/// floor(ratio * num_matched) of them, ordered by loss (index on ties).
template <typename Scalar>
std::vector<Index> hard_negative_mine(std::span<const Scalar> conf_losses,
                                      const MatchResult<Scalar>& match, double ratio) {
  if (conf_losses.size() != match.matches.size()) {
    throw ShapeError("hard_negative_mine: " + std::to_string(conf_losses.size()) + " losses for " +
                     std::to_string(match.matches.size()) + " priors");
  }
  if (!(ratio > 0)) throw ValidationError("hard_negative_mine: ratio must be positive");
  const Index positives = match.num_matched();
  std::vector<Index> candidates;
  candidates.reserve(match.matches.size());
  for (std::size_t p = 0; p < match.matches.size(); ++p) {
    if (!match.matches[p].matched()) candidates.push_back(static_cast<Index>(p));
  }
  const auto quota = std::min<Index>(static_cast<Index>(std::floor(ratio * double(positives))),
                                     static_cast<Index>(candidates.size()));
  auto by_loss = [&](Index a, Index b) {
    if (conf_losses[a] != conf_losses[b]) return conf_losses[a] > conf_losses[b];
    return a < b;
  };
  std::partial_sort(candidates.begin(), candidates.begin() + quota, candidates.end(), by_loss);
  candidates.resize(static_cast<std::size_t>(quota));
  return candidates;
}

// ---------------------------------------------------------------------------
// Temporal segments <-> boxes

struct ImageMeta {
  Index width = 0;
  ColumnMap col_to_frame;
  std::int64_t source_len = 0;
};

inline ImageMeta meta_of(const ActionImage& img) {
  return {img.width, img.col_to_frame, img.source_len};
}

/// Full-height box (cy = 0.5, h = 1) covering the segment's columns.
BoxD gt_segment_to_box(const GroundTruthSegment& seg, const ImageMeta& meta);

/// Horizontal extent of a box as a continuous frame interval.
std::pair<double, double> box_to_frames(const BoxD& box, const ImageMeta& meta);

}  // namespace skelbox
