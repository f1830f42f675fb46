// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "skelbox/error.hpp"

namespace skelbox {

inline constexpr int kJointsPerPerson = 25;
inline constexpr int kPersonSlots = 2;
inline constexpr int kValuesPerLine = kPersonSlots * kJointsPerPerson * 3;

/// 25 joints, one row per joint, columns x y z (meters).
using Pose = Eigen::Matrix<double, kJointsPerPerson, 3, Eigen::RowMajor>;

/// Kinect v2 joint indices.
enum Joint : int {
  kSpineBase = 0,
  kSpineMid = 1,
  kNeck = 2,
  kHead = 3,
  kShoulderLeft = 4,
  kElbowLeft = 5,
  kWristLeft = 6,
  kHandLeft = 7,
  kShoulderRight = 8,
  kElbowRight = 9,
  kWristRight = 10,
  kHandRight = 11,
  kHipLeft = 12,
  kKneeLeft = 13,
  kAnkleLeft = 14,
  kFootLeft = 15,
  kHipRight = 16,
  kKneeRight = 17,
  kAnkleRight = 18,
  kFootRight = 19,
  kSpineShoulder = 20,
  kHandTipLeft = 21,
  kThumbLeft = 22,
  kHandTipRight = 23,
  kThumbRight = 24,
};

/// A person slot is either absent or a full pose. Absence is explicit;
/// the on-disk all-zero block never reaches the encoder as data.
struct Frame {
  std::array<std::optional<Pose>, kPersonSlots> persons;

  bool present(int slot) const { return persons[static_cast<std::size_t>(slot)].has_value(); }
  friend bool operator==(const Frame& a, const Frame& b) {
    for (std::size_t i = 0; i < a.persons.size(); ++i) {
      if (a.persons[i].has_value() != b.persons[i].has_value()) return false;
      if (a.persons[i] && *a.persons[i] != *b.persons[i]) return false;
    }
    return true;
  }
};

/// Frame n of `frames` has frame index n.
struct SkeletonSequence {
  std::vector<Frame> frames;
  double frame_rate = 30.0;
  std::string source_id;

  std::size_t length() const noexcept { return frames.size(); }
  bool any_present(int slot) const;
  friend bool operator==(const SkeletonSequence& a, const SkeletonSequence& b) {
    return a.frames == b.frames && a.source_id == b.source_id && a.frame_rate == b.frame_rate;
  }
};

/// Labeled temporal interval [start, end) in frames, label 0-based.
struct GroundTruthSegment {
  int label = 0;
  std::int64_t start = 0;
  std::int64_t end = 0;
  double confidence = 1.0;

  std::int64_t length() const noexcept { return end - start; }
  friend bool operator==(const GroundTruthSegment&, const GroundTruthSegment&) = default;
};

struct LabeledSequence {
  SkeletonSequence sequence;
  std::vector<GroundTruthSegment> segments;
};

struct SynthConfig {
  int num_classes = 3;
  int num_sequences = 200;
  std::pair<int, int> seq_len_range{96, 160};
  std::pair<int, int> segment_len_range{24, 56};
  double noise_amplitude = 0.01;
  std::uint64_t seed = 42;
  /// Index of the first generated sequence's substream. Lets a separate
  /// test split continue the same stream family without overlapping.
  std::uint64_t first_index = 0;

  void validate() const;
};

/// One frame per nonempty line, 150 numbers, person-major then joint-major,
/// x y z innermost. A person whose 75 values are all zero is Absent.
SkeletonSequence parse_skeleton_file(std::istream& text, std::string source_id = {});
/// Writes the same format with round-trip exact decimal digits.
void write_skeleton_file(std::ostream& out, const SkeletonSequence& seq);

/// "label,start,end,confidence" per nonempty line. Labels on disk are
/// 1-based; the returned segments are 0-based.
std::vector<GroundTruthSegment> parse_label_file(std::istream& text);
void write_label_file(std::ostream& out, const std::vector<GroundTruthSegment>& segments);

/// Throws ValidationError if any segment violates 0 <= start < end <= length.
void validate_segments(const std::vector<GroundTruthSegment>& segments, std::size_t length);

/// The fixed standing rest pose used by the synthetic generator.
const Pose& rest_pose();

/// Motion assigned to action class k in synthetic data.
struct ClassMotion {
  std::vector<int> joints;  // moved joints, the first one is the chain root
  int axis = 0;             // 0 = x, 1 = y, 2 = z
  double period_frames = 24.0;
  double phase = 0.0;
};
ClassMotion class_motion(int label);

/// Deterministic in `config`; sequence i draws only from substream
/// (seed, first_index + i).
std::vector<LabeledSequence> generate_synthetic(const SynthConfig& config);

}  // namespace skelbox
