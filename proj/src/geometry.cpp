// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
#include "skelbox/geometry.hpp"

namespace skelbox {

std::vector<PriorInfo> prior_layout(const PriorConfig& config) {
  config.validate();
  std::vector<PriorInfo> out;
  out.reserve(static_cast<std::size_t>(config.count()));
  for (std::size_t layer = 0; layer < config.feature_map_shapes.size(); ++layer) {
    const auto [rows, cols] = config.feature_map_shapes[layer];
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) {
        for (double a : config.aspect_ratios) out.push_back({static_cast<int>(layer), r, c, a});
      }
    }
  }
  return out;
}

BoxD gt_segment_to_box(const GroundTruthSegment& seg, const ImageMeta& meta) {
  if (seg.start < 0 || seg.start >= seg.end || seg.end > meta.source_len) {
    throw ValidationError("segment [" + std::to_string(seg.start) + ", " + std::to_string(seg.end) +
                          ") outside sequence of length " + std::to_string(meta.source_len));
  }
  const double x0 = meta.col_to_frame.to_column(double(seg.start)) / double(meta.width);
  const double x1 = meta.col_to_frame.to_column(double(seg.end)) / double(meta.width);
  return {(x0 + x1) / 2, 0.5, x1 - x0, 1.0};
}

std::pair<double, double> box_to_frames(const BoxD& box, const ImageMeta& meta) {
  const double w = double(meta.width);
  return {meta.col_to_frame.to_frame(box.xmin() * w), meta.col_to_frame.to_frame(box.xmax() * w)};
}

}  // namespace skelbox
