// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "skelbox/skeleton.hpp"
#include "skelbox/tensor.hpp"

namespace skelbox {

/// Permutation of the 25 joints into five contiguous body parts, each part
/// listed along its kinematic chain.
struct JointOrder {
  std::array<int, kJointsPerPerson> permutation{};
  /// First row of each part plus a final sentinel (== 25).
  std::array<int, 6> part_begin{};

  /// Left arm, right arm, trunk, left leg, right leg (Kinect v2 chains):
  ///   left arm   ShoulderLeft ElbowLeft WristLeft HandLeft HandTipLeft ThumbLeft
  ///   right arm  ShoulderRight ElbowRight WristRight HandRight HandTipRight ThumbRight
  ///   trunk      Head Neck SpineShoulder SpineMid SpineBase
  ///   left leg   HipLeft KneeLeft AnkleLeft FootLeft
  ///   right leg  HipRight KneeRight AnkleRight FootRight
  static const JointOrder& kinect_v2();

  /// Throws ValidationError unless the permutation is a bijection on 0..24
  /// and the parts tile it.
  void validate() const;
};

/// Affine map from a continuous column coordinate (column c covers [c, c+1))
/// to a continuous frame coordinate (frame n covers [n, n+1)).
struct ColumnMap {
  double scale = 1.0;
  double offset = 0.0;

  double to_frame(double column) const { return scale * column + offset; }
  double to_column(double frame) const { return (frame - offset) / scale; }
  friend bool operator==(const ColumnMap&, const ColumnMap&) = default;
};

/// H x W x 3 8-bit image. Row = part-ordered joint (person 1 rows 0-24,
/// person 2 rows 25-49), column = frame, channels R G B = x y z.
struct ActionImage {
  Index height = 0;
  Index width = 0;
  std::vector<std::uint8_t> pixels;
  int rows_per_person = kJointsPerPerson;
  int persons_encoded = 1;
  ColumnMap col_to_frame;
  std::int64_t source_len = 0;

  ActionImage() = default;
  ActionImage(Index h, Index w) : height(h), width(w), pixels(static_cast<std::size_t>(h * w * 3), 0) {}

  std::uint8_t& at(Index row, Index col, int channel) {
    return pixels[static_cast<std::size_t>((row * width + col) * 3 + channel)];
  }
  std::uint8_t at(Index row, Index col, int channel) const {
    return pixels[static_cast<std::size_t>((row * width + col) * 3 + channel)];
  }
  friend bool operator==(const ActionImage&, const ActionImage&) = default;
};

struct DatasetStats {
  double c_min = 0.0;
  double c_max = 0.0;
};

/// Extrema over every coordinate of every present person.
DatasetStats compute_dataset_stats(std::span<const SkeletonSequence> sequences);

/// floor(255 (c - c_min) / (c_max - c_min)) clamped to [0, 255].
ActionImage encode_global(const SkeletonSequence& seq, const JointOrder& order,
                          const DatasetStats& stats);

/// Per person: subtract each channel's minimum over the sequence and divide
/// by the largest channel range, then floor(255 * .). A completely static
/// person encodes as zero rows and triggers a warning.
ActionImage encode_invariant(const SkeletonSequence& seq, const JointOrder& order);

/// Nearest-neighbour resampling of columns: output column c reads source
/// column floor((c + 0.5) W / target_w).
ActionImage resample_width(const ActionImage& img, Index target_w);

/// Columns [first, last) as a new image; col_to_frame follows the crop.
ActionImage crop_columns(const ActionImage& img, Index first, Index last);

/// Detector input: pixel / 255 as a [rows, width, 3] tensor, zero-padded
/// below the image when it has fewer than `rows` rows.
TensorD to_input_tensor(const ActionImage& img, Index rows);

/// Quantization shared by both mappings: floor(255 * ratio) clamped.
std::uint8_t quantize_unit(double ratio);

}  // namespace skelbox
