// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
#include "skelbox/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "skelbox/error.hpp"

namespace skelbox {

const JointOrder& JointOrder::kinect_v2() {
  static const JointOrder order = [] {
    JointOrder o;
    o.permutation = {kShoulderLeft,  kElbowLeft,  kWristLeft,  kHandLeft,     kHandTipLeft,
                     kThumbLeft,     kShoulderRight, kElbowRight, kWristRight,  kHandRight,
                     kHandTipRight,  kThumbRight, kHead,       kNeck,         kSpineShoulder,
                     kSpineMid,      kSpineBase,  kHipLeft,    kKneeLeft,     kAnkleLeft,
                     kFootLeft,      kHipRight,   kKneeRight,  kAnkleRight,   kFootRight};
    o.part_begin = {0, 6, 12, 17, 21, 25};
    return o;
  }();
  return order;
}

void JointOrder::validate() const {
  std::array<bool, kJointsPerPerson> seen{};
  for (int j : permutation) {
    if (j < 0 || j >= kJointsPerPerson || seen[static_cast<std::size_t>(j)]) {
      throw ValidationError("joint order is not a permutation of 0..24");
    }
    seen[static_cast<std::size_t>(j)] = true;
  }
  if (part_begin.front() != 0 || part_begin.back() != kJointsPerPerson) {
    throw ValidationError("joint order parts must cover rows 0..24");
  }
  for (std::size_t i = 1; i < part_begin.size(); ++i) {
    if (part_begin[i] <= part_begin[i - 1]) throw ValidationError("joint order parts must be nonempty");
  }
}

std::uint8_t quantize_unit(double ratio) {
  const double v = std::floor(255.0 * ratio);
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

DatasetStats compute_dataset_stats(std::span<const SkeletonSequence> sequences) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& seq : sequences) {
    for (const auto& frame : seq.frames) {
      for (const auto& person : frame.persons) {
        if (!person) continue;
        lo = std::min(lo, person->minCoeff());
        hi = std::max(hi, person->maxCoeff());
      }
    }
  }
  if (!(lo <= hi)) throw ValidationError("dataset stats: no present joints in any sequence");
  return {lo, hi};
}

namespace {

int persons_to_encode(const SkeletonSequence& seq) { return seq.any_present(1) ? 2 : 1; }

ActionImage blank_image(const SkeletonSequence& seq) {
  const int persons = persons_to_encode(seq);
  ActionImage img(Index(kJointsPerPerson) * persons, static_cast<Index>(seq.length()));
  img.persons_encoded = persons;
  img.source_len = static_cast<std::int64_t>(seq.length());
  return img;
}

template <typename PixelFn>
void fill_person(ActionImage& img, const SkeletonSequence& seq, const JointOrder& order, int slot,
                 PixelFn&& pixel) {
  const Index row0 = Index(slot) * kJointsPerPerson;
  for (std::size_t n = 0; n < seq.frames.size(); ++n) {
    const auto& person = seq.frames[n].persons[static_cast<std::size_t>(slot)];
    if (!person) continue;
    for (int r = 0; r < kJointsPerPerson; ++r) {
      const int joint = order.permutation[static_cast<std::size_t>(r)];
      for (int k = 0; k < 3; ++k) {
        img.at(row0 + r, static_cast<Index>(n), k) = pixel((*person)(joint, k), k);
      }
    }
  }
}

}  // namespace

ActionImage encode_global(const SkeletonSequence& seq, const JointOrder& order, const DatasetStats& stats) {
  if (!(stats.c_max > stats.c_min)) {
    throw ValidationError("encode_global: degenerate dataset stats (c_max == c_min)");
  }
  ActionImage img = blank_image(seq);
  const double range = stats.c_max - stats.c_min;
  for (int slot = 0; slot < img.persons_encoded; ++slot) {
    fill_person(img, seq, order, slot, [&](double c, int) { return quantize_unit((c - stats.c_min) / range); });
  }
  return img;
}

ActionImage encode_invariant(const SkeletonSequence& seq, const JointOrder& order) {
  if (seq.frames.empty()) throw ValidationError("encode_invariant: empty sequence");
  ActionImage img = blank_image(seq);
  for (int slot = 0; slot < img.persons_encoded; ++slot) {
    Eigen::Array3d lo = Eigen::Array3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Array3d hi = -lo;
    for (const auto& frame : seq.frames) {
      const auto& person = frame.persons[static_cast<std::size_t>(slot)];
      if (!person) continue;
      lo = lo.min(person->colwise().minCoeff().transpose().array());
      hi = hi.max(person->colwise().maxCoeff().transpose().array());
    }
    if (!(lo(0) <= hi(0))) continue;  // person never present
    const double denom = (hi - lo).maxCoeff();
    if (!(denom > 0)) {
      warn("encode_invariant: person " + std::to_string(slot + 1) + " of '" + seq.source_id +
           "' is static; encoding zero rows");
      continue;
    }
    fill_person(img, seq, order, slot, [&](double c, int k) { return quantize_unit((c - lo(k)) / denom); });
  }
  return img;
}

ActionImage resample_width(const ActionImage& img, Index target_w) {
  if (target_w <= 0) throw ValidationError("resample_width: target width must be positive");
  if (img.width < 1) throw ValidationError("resample_width: source image has no columns");
  ActionImage out = img;
  out.width = target_w;
  out.pixels.assign(static_cast<std::size_t>(img.height * target_w * 3), 0);
  for (Index c = 0; c < target_w; ++c) {
    // floor((c + 0.5) W / target_w) in exact integer arithmetic
    const Index src = std::min(img.width - 1, ((2 * c + 1) * img.width) / (2 * target_w));
    for (Index r = 0; r < img.height; ++r) {
      for (int k = 0; k < 3; ++k) out.at(r, c, k) = img.at(r, src, k);
    }
  }
  const double ratio = double(img.width) / double(target_w);
  out.col_to_frame = {img.col_to_frame.scale * ratio, img.col_to_frame.offset};
  return out;
}

ActionImage crop_columns(const ActionImage& img, Index first, Index last) {
  if (first < 0 || last > img.width || first >= last) {
    throw ValidationError("crop_columns: invalid range [" + std::to_string(first) + ", " +
                          std::to_string(last) + ") for width " + std::to_string(img.width));
  }
  ActionImage out = img;
  out.width = last - first;
  out.pixels.assign(static_cast<std::size_t>(img.height * out.width * 3), 0);
  for (Index r = 0; r < img.height; ++r) {
    std::copy_n(img.pixels.begin() + (r * img.width + first) * 3, out.width * 3,
                out.pixels.begin() + r * out.width * 3);
  }
  out.col_to_frame = {img.col_to_frame.scale, img.col_to_frame.to_frame(double(first))};
  return out;
}

TensorD to_input_tensor(const ActionImage& img, Index rows) {
  if (img.height > rows) {
    throw ShapeError("to_input_tensor: image has " + std::to_string(img.height) + " rows, input takes " +
                     std::to_string(rows));
  }
  TensorD t({rows, img.width, 3});
  for (std::size_t i = 0; i < img.pixels.size(); ++i) t[static_cast<Index>(i)] = img.pixels[i] / 255.0;
  return t;
}

}  // namespace skelbox
