// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "doctest.h"
#include "skelbox/encoding.hpp"
#include "skelbox/rng.hpp"

using namespace skelbox;

namespace {

Pose uniform_pose(double x, double y, double z) {
  Pose p;
  p.col(0).setConstant(x);
  p.col(1).setConstant(y);
  p.col(2).setConstant(z);
  return p;
}

SkeletonSequence from_poses(const std::vector<Pose>& poses) {
  SkeletonSequence seq;
  for (const auto& p : poses) {
    Frame f;
    f.persons[0] = p;
    seq.frames.push_back(f);
  }
  return seq;
}

// Coordinates on a 2^-16 grid, like fixed-point sensor output, so that the
// shifts below are exact in double precision.
double quantize(double v) { return std::round(std::ldexp(v, 16)) / 65536.0; }

SkeletonSequence random_walk(Rng& rng, int frames) {
  std::vector<Pose> poses;
  Pose p;
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = quantize(rng.uniform(-1, 1));
  for (int f = 0; f < frames; ++f) {
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = quantize(p.data()[i] + rng.uniform(-0.05, 0.05));
    poses.push_back(p);
  }
  return from_poses(poses);
}

int max_pixel_diff(const ActionImage& a, const ActionImage& b) {
  REQUIRE(a.pixels.size() == b.pixels.size());
  int d = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) d = std::max(d, std::abs(int(a.pixels[i]) - int(b.pixels[i])));
  return d;
}

std::vector<std::string> g_warnings;
void capture(const std::string& m) { g_warnings.push_back(m); }

}  // namespace

TEST_CASE("kinect joint order is a part-wise permutation") {
  const auto& order = JointOrder::kinect_v2();
  CHECK_NOTHROW(order.validate());
  CHECK(order.permutation[0] == kShoulderLeft);
  CHECK(order.permutation[12] == kHead);
  CHECK(order.permutation[24] == kFootRight);
  JointOrder broken = order;
  broken.permutation[1] = broken.permutation[0];
  CHECK_THROWS_AS(broken.validate(), ValidationError);
}

TEST_CASE("dataset stats") {
  SUBCASE("constant zero") {
    const std::vector<SkeletonSequence> seqs{from_poses({uniform_pose(0, 0, 0)})};
    const auto s = compute_dataset_stats(seqs);
    CHECK(s.c_min == 0.0);
    CHECK(s.c_max == 0.0);
  }
  SUBCASE("extrema across sequences, order independent") {
    std::vector<SkeletonSequence> seqs{from_poses({uniform_pose(0, 0.5, 1)}),
                                       from_poses({uniform_pose(-1, 0, 0), uniform_pose(0, 2, 0)}),
                                       from_poses({uniform_pose(0.25, 0.25, 0.25)})};
    const auto s = compute_dataset_stats(seqs);
    CHECK(s.c_min == -1.0);
    CHECK(s.c_max == 2.0);
    std::reverse(seqs.begin(), seqs.end());
    const auto r = compute_dataset_stats(seqs);
    CHECK(r.c_min == s.c_min);
    CHECK(r.c_max == s.c_max);
  }
  SUBCASE("no present person") {
    std::vector<SkeletonSequence> seqs(1);
    seqs[0].frames.resize(3);
    CHECK_THROWS_AS(compute_dataset_stats(seqs), ValidationError);
  }
}

TEST_CASE("global mapping point values") {
  const auto& order = JointOrder::kinect_v2();
  const auto seq = from_poses({uniform_pose(-1, 0, 1), uniform_pose(-3, 5, 0.5)});
  const auto img = encode_global(seq, order, {-1, 1});
  CHECK(img.height == 25);
  CHECK(img.width == 2);
  CHECK(img.at(0, 0, 0) == 0);    // c = c_min
  CHECK(img.at(0, 0, 1) == 127);  // floor(255 * 0.5)
  CHECK(img.at(0, 0, 2) == 255);  // c = c_max
  CHECK(img.at(3, 1, 0) == 0);    // below range clamps
  CHECK(img.at(3, 1, 1) == 255);  // above range clamps
  CHECK(img.at(3, 1, 2) == 191);  // floor(255 * 0.75)
  CHECK_THROWS_AS(encode_global(seq, order, {1, 1}), ValidationError);
}

TEST_CASE("invariant mapping point values") {
  const auto seq = from_poses({uniform_pose(0, 0, 0), uniform_pose(1, 0.5, 0.25)});
  const auto img = encode_invariant(seq, JointOrder::kinect_v2());
  for (Index r = 0; r < 25; ++r) {
    CHECK(img.at(r, 0, 0) == 0);
    CHECK(img.at(r, 0, 1) == 0);
    CHECK(img.at(r, 0, 2) == 0);
    CHECK(img.at(r, 1, 0) == 255);
    CHECK(img.at(r, 1, 1) == 127);
    CHECK(img.at(r, 1, 2) == 63);
  }
  CHECK(img.persons_encoded == 1);
  CHECK(img.source_len == 2);
}

TEST_CASE("rows follow the joint order") {
  Pose p = uniform_pose(0, 0, 0);
  p(kHead, 0) = 1.0;
  const auto seq = from_poses({uniform_pose(0, 0, 0), p});
  const auto img = encode_invariant(seq, JointOrder::kinect_v2());
  for (Index r = 0; r < 25; ++r) CHECK(img.at(r, 1, 0) == (r == 12 ? 255 : 0));
}

TEST_CASE("shift and scale of the two-frame example") {
  const auto seq = from_poses({uniform_pose(0, 0, 0), uniform_pose(1, 0.5, 0.25)});
  const auto base = encode_invariant(seq, JointOrder::kinect_v2());
  SkeletonSequence shifted = seq;
  for (auto& f : shifted.frames) f.persons[0]->rowwise() += Eigen::RowVector3d(10, 20, 30);
  CHECK(encode_invariant(shifted, JointOrder::kinect_v2()).pixels == base.pixels);
  SkeletonSequence scaled = seq;
  for (auto& f : scaled.frames) *f.persons[0] *= 3.7;
  CHECK(max_pixel_diff(encode_invariant(scaled, JointOrder::kinect_v2()), base) <= 1);
}

TEST_CASE("invariance properties on random walks") {
  Rng rng(3);
  const auto& order = JointOrder::kinect_v2();
  for (int trial = 0; trial < 25; ++trial) {
    const auto seq = random_walk(rng, 20);
    const auto base = encode_invariant(seq, order);

    SkeletonSequence shifted = seq;
    const Eigen::RowVector3d shift(quantize(rng.uniform(-5, 5)), quantize(rng.uniform(-5, 5)),
                                   quantize(rng.uniform(-5, 5)));
    for (auto& f : shifted.frames) f.persons[0]->rowwise() += shift;
    CHECK(encode_invariant(shifted, order).pixels == base.pixels);

    const double pow2 = std::ldexp(1.0, static_cast<int>(rng.uniform_int(-8, 8)));
    SkeletonSequence scaled = seq;
    for (auto& f : scaled.frames) *f.persons[0] *= pow2;
    CHECK(encode_invariant(scaled, order).pixels == base.pixels);

    const double s = std::exp(rng.uniform(std::log(1e-3), std::log(1e3)));
    SkeletonSequence generic = seq;
    for (auto& f : generic.frames) *f.persons[0] *= s;
    CHECK(max_pixel_diff(encode_invariant(generic, order), base) <= 1);

    // The channel with the largest range reaches 255.
    CHECK(*std::max_element(base.pixels.begin(), base.pixels.end()) == 255);
  }
}

TEST_CASE("anisotropic scaling changes the image") {
  const auto seq = from_poses({uniform_pose(0, 0, 0), uniform_pose(1, 0.5, 0.25)});
  SkeletonSequence stretched = seq;
  for (auto& f : stretched.frames) f.persons[0]->col(1) *= 2.0;
  const auto a = encode_invariant(seq, JointOrder::kinect_v2());
  const auto b = encode_invariant(stretched, JointOrder::kinect_v2());
  CHECK(a.pixels != b.pixels);
  CHECK(b.at(0, 1, 1) == 255);
  CHECK(b.at(0, 1, 0) == 255);
}

TEST_CASE("global equals invariant only when channel ranges coincide") {
  const auto& order = JointOrder::kinect_v2();
  const auto equal = from_poses({uniform_pose(0, 0, 0), uniform_pose(1, 1, 1), uniform_pose(0.3, 0.6, 0.9)});
  const std::vector<SkeletonSequence> one{equal};
  CHECK(encode_global(equal, order, compute_dataset_stats(one)).pixels ==
        encode_invariant(equal, order).pixels);

  const auto unequal = from_poses({uniform_pose(0, 2, 0), uniform_pose(1, 2.5, 0.25)});
  const std::vector<SkeletonSequence> other{unequal};
  CHECK(encode_global(unequal, order, compute_dataset_stats(other)).pixels !=
        encode_invariant(unequal, order).pixels);
}

TEST_CASE("static person encodes to zero rows with a warning") {
  set_warning_sink(&capture);
  g_warnings.clear();
  const auto seq = from_poses({uniform_pose(0.2, 1.0, 3.0), uniform_pose(0.2, 1.0, 3.0)});
  const auto img = encode_invariant(seq, JointOrder::kinect_v2());
  CHECK(std::all_of(img.pixels.begin(), img.pixels.end(), [](auto p) { return p == 0; }));
  CHECK(g_warnings.size() == 1);
  set_warning_sink(nullptr);
  CHECK_THROWS_AS(encode_invariant(SkeletonSequence{}, JointOrder::kinect_v2()), ValidationError);
}

TEST_CASE("two persons stack vertically and normalize independently") {
  SkeletonSequence seq;
  for (int f = 0; f < 3; ++f) {
    Frame frame;
    frame.persons[0] = uniform_pose(f, 0, 0);
    if (f > 0) frame.persons[1] = uniform_pose(100, 50 + 10 * f, 0);
    seq.frames.push_back(frame);
  }
  const auto img = encode_invariant(seq, JointOrder::kinect_v2());
  REQUIRE(img.height == 50);
  CHECK(img.persons_encoded == 2);
  CHECK(img.at(0, 2, 0) == 255);
  CHECK(img.at(25, 0, 1) == 0);    // absent in frame 0
  CHECK(img.at(25, 1, 1) == 0);    // person minimum
  CHECK(img.at(25, 2, 1) == 255);  // person maximum
}

TEST_CASE("nearest-neighbour width resampling") {
  ActionImage img(2, 10);
  img.source_len = 10;
  for (Index c = 0; c < 10; ++c) {
    img.at(0, c, 0) = static_cast<std::uint8_t>(c);
    img.at(1, c, 2) = static_cast<std::uint8_t>(100 + c);
  }
  const auto same = resample_width(img, 10);
  CHECK(same == img);

  const auto half = resample_width(img, 5);
  REQUIRE(half.width == 5);
  for (Index c = 0; c < 5; ++c) {
    CHECK(half.at(0, c, 0) == 2 * c + 1);
    CHECK(half.at(1, c, 2) == 100 + 2 * c + 1);
  }
  CHECK(half.col_to_frame.scale == 2.0);

  for (Index w : {1, 3, 7, 10, 64, 512}) {
    const auto r = resample_width(img, w);
    CHECK(std::abs(r.col_to_frame.to_frame(0.0) - 0.0) <= 1.0);
    CHECK(std::abs(r.col_to_frame.to_frame(double(w)) - 10.0) <= 1.0);
  }
  CHECK_THROWS_AS(resample_width(img, 0), ValidationError);
}

TEST_CASE("column crops carry their frame offset") {
  ActionImage img(1, 8);
  img.source_len = 8;
  for (Index c = 0; c < 8; ++c) img.at(0, c, 1) = static_cast<std::uint8_t>(c * 10);
  const auto crop = crop_columns(img, 3, 6);
  CHECK(crop.width == 3);
  CHECK(crop.at(0, 0, 1) == 30);
  CHECK(crop.col_to_frame.to_frame(0) == 3.0);
  const auto wide = resample_width(crop, 6);
  CHECK(wide.col_to_frame.to_frame(6) == 6.0);
  CHECK_THROWS_AS(crop_columns(img, 5, 5), ValidationError);
}

TEST_CASE("input tensor letter-boxes to the network height") {
  ActionImage img(25, 4);
  img.at(24, 3, 2) = 255;
  const auto t = to_input_tensor(img, 50);
  CHECK(t.shape() == Shape{50, 4, 3});
  CHECK(t(24, 3, 2) == 1.0);
  CHECK(t(49, 3, 2) == 0.0);
  CHECK_THROWS_AS(to_input_tensor(img, 10), ShapeError);
}
