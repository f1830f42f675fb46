// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "skelbox/postprocess.hpp"

using namespace skelbox;
using namespace skelbox::testing;

namespace {

Detection det(int label, double score, std::int64_t s, std::int64_t e) { return {label, score, s, e}; }

Predictions background_only(Index n, Index classes) {
  Predictions p{RowMatrix<double>::Zero(n, 4), RowMatrix<double>::Constant(n, classes, -20.0)};
  p.conf.col(0).setConstant(20.0);
  return p;
}

}  // namespace

TEST_CASE("decoding detections") {
  const std::vector<BoxD> priors{{0.5, 0.5, 0.5, 1.0}, {0.2, 0.5, 0.2, 0.4}};
  const ImageMeta meta{100, {1.0, 0.0}, 100};
  auto pred = background_only(2, 3);
  CHECK(decode_detections(pred, priors, meta, 0.01, 200).empty());

  pred.conf(0, 2) = 25.0;
  const auto d = decode_detections(pred, priors, meta, 0.01, 200);
  REQUIRE(d.size() == 1);
  CHECK(d[0].label == 1);
  CHECK(d[0].start == 25);
  CHECK(d[0].end == 75);
  CHECK(d[0].score > 0.99);

  pred.conf(1, 1) = 25.0;
  const auto both = decode_detections(pred, priors, meta, 0.01, 200);
  REQUIRE(both.size() == 2);
  CHECK(both[0].start == 10);  // class 0 comes first; prior 1 spans [0.1, 0.3]
  CHECK(both[0].end == 30);

  // boxes leaving the image are clipped
  pred.loc(0, 2) = std::log(4.0);
  const auto clipped = decode_detections(pred, priors, meta, 0.01, 200);
  CHECK(clipped[1].start == 0);
  CHECK(clipped[1].end == 100);

  // top_k per class
  const std::vector<BoxD> many(10, BoxD{0.5, 0.5, 0.2, 1.0});
  Predictions flat{RowMatrix<double>::Zero(10, 4), RowMatrix<double>::Zero(10, 2)};
  for (Index i = 0; i < 10; ++i) flat.conf(i, 1) = 0.1 * double(i);
  const auto top = decode_detections(flat, many, meta, 0.01, 3);
  REQUIRE(top.size() == 3);
  CHECK(top[0].score > top[1].score);
  CHECK(top[1].score > top[2].score);
  CHECK_THROWS_AS(decode_detections(flat, priors, meta, 0.01, 3), ShapeError);
}

TEST_CASE("nms examples") {
  const std::vector<Detection> pair{det(0, 0.9, 0, 10), det(0, 0.8, 2, 12)};
  CHECK(iou_interval(pair[0].interval(), pair[1].interval()) == doctest::Approx(8.0 / 12));
  CHECK(nms(pair, 0.5) == std::vector<Detection>{pair[0]});
  CHECK(nms(pair, 0.7) == pair);
  const std::vector<Detection> one{det(1, 0.3, 4, 9)};
  CHECK(nms(one, 0.45) == one);
  const std::vector<Detection> disjoint{det(0, 0.2, 0, 5), det(0, 0.9, 10, 20), det(0, 0.5, 30, 31)};
  const auto kept = nms(disjoint, 0.1);
  CHECK(kept == std::vector<Detection>{disjoint[1], disjoint[2], disjoint[0]});
  // other classes never suppress
  const std::vector<Detection> cross{det(0, 0.9, 0, 10), det(1, 0.8, 0, 10)};
  CHECK(nms(cross, 0.5).size() == 2);
  CHECK_THROWS_AS(nms(cross, 1.0), ValidationError);
}

TEST_CASE("nms matches the reference on random inputs") {
  Rng rng(21);
  for (int t = 0; t < 100; ++t) {
    std::vector<Detection> dets(static_cast<std::size_t>(rng.uniform_int(0, 200)));
    for (auto& d : dets) {
      d.label = int(rng.uniform_int(0, 2));
      d.start = rng.uniform_int(0, 300);
      d.end = d.start + rng.uniform_int(1, 60);
      d.score = double(rng.uniform_int(0, 50)) / 50.0;
    }
    const double thresh = rng.uniform(0.1, 0.9);
    CHECK(nms(dets, thresh) == nms_ref(dets, thresh));
  }
}

TEST_CASE("precision and recall trace") {
  const std::vector<GroundTruthSegment> gts{{0, 0, 10, 1}, {0, 20, 30, 1}};
  const std::vector<Detection> dets{det(0, 0.9, 0, 10), det(0, 0.8, 50, 60), det(0, 0.7, 21, 30)};
  const auto pr = precision_recall(dets, gts, 0.5);
  REQUIRE(pr.size() == 3);
  CHECK(pr[0].precision == 1.0);
  CHECK(pr[1].precision == 0.5);
  CHECK(pr[2].precision == doctest::Approx(2.0 / 3));
  CHECK(pr[0].recall == 0.5);
  CHECK(pr[1].recall == 0.5);
  CHECK(pr[2].recall == 1.0);

  CHECK(interpolated_precision(pr, 0.5) == 1.0);
  CHECK(interpolated_precision(pr, 1.0) == doctest::Approx(2.0 / 3));
  CHECK(interpolated_precision(pr, 0.0) == 1.0);
  CHECK(interpolated_precision(pr, 1.01) == 0.0);
  CHECK(average_precision(pr, 2) == 5.0 / 6);
  CHECK(pr[2].true_positives == 2);
  CHECK(pr[2].rank == 3);
  // points without counts fall back to the stored precision
  const std::vector<PRPoint> bare{{0.5, 1.0}, {0.5, 0.5}, {1.0, 2.0 / 3}};
  CHECK(average_precision(bare, 2) == doctest::Approx(5.0 / 6).epsilon(1e-15));

  CHECK(precision_recall(std::vector<Detection>{}, gts, 0.5).empty());
  CHECK(average_precision(std::vector<PRPoint>{}, 2) == 0.0);

  const std::vector<Detection> dup{det(0, 0.9, 0, 10), det(0, 0.8, 0, 10)};
  const auto pd = precision_recall(dup, gts, 0.5);
  CHECK(pd[1].precision == 0.5);
  CHECK(pd[1].recall == 0.5);

  // strict comparison: IoU exactly 0.5 is not a match
  const std::vector<Detection> half{det(0, 0.9, 0, 5)};
  CHECK(precision_recall(half, gts, 0.5)[0].precision == 0.0);
  CHECK(precision_recall(half, gts, 0.49)[0].precision == 1.0);
}

TEST_CASE("evaluation tables") {
  EvalInput in;
  in.segments["a"] = {{0, 0, 10, 1}, {1, 20, 40, 1}};
  in.segments["b"] = {{0, 5, 15, 1}};
  in.detections["a"] = {det(0, 1, 0, 10), det(1, 1, 20, 40)};
  in.detections["b"] = {det(0, 1, 5, 15), det(2, 1, 0, 3)};  // class 2 has no ground truth
  const double thetas[] = {0.1, 0.5, 0.9};
  const auto table = evaluate(in, thetas);
  CHECK(table.classes == std::vector<int>{0, 1});
  for (double m : table.map) CHECK(m == 1.0);

  // a detection is only compared with ground truth of its own video
  EvalInput moved = in;
  moved.detections["a"] = {det(1, 1, 20, 40)};
  moved.detections["b"] = {det(0, 1, 0, 10)};
  const auto m = evaluate(moved, thetas);
  CHECK(m.map[0] == doctest::Approx(0.75));  // [0,10) vs b's [5,15): IoU 1/3
  CHECK(m.map[1] == doctest::Approx(0.5));
  EvalInput elsewhere = in;
  elsewhere.detections.erase("a");
  elsewhere.detections["b"].push_back(det(1, 1, 20, 40));
  CHECK(evaluate(elsewhere, thetas).class_ap[1][0] == 0.0);

  EvalInput none;
  none.segments["a"] = in.segments["a"];
  CHECK(evaluate(none, thetas).map[1] == 0.0);
  CHECK_THROWS_AS(evaluate(EvalInput{}, thetas), ValidationError);
}

TEST_CASE("mAP matches the reference and behaves under rescoring") {
  Rng rng(33);
  const double thetas[] = {0.1, 0.3, 0.5, 0.7};
  for (int t = 0; t < 200; ++t) {
    const auto e = random_eval(rng);
    EvalInput in{e.dets, e.gts};
    const auto table = evaluate(in, thetas);
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(std::abs(table.map[k] - map_ref(e.dets, e.gts, thetas[k])) <= 1e-12);
      if (k > 0) CHECK(table.map[k] <= table.map[k - 1] + 1e-12);
    }
    EvalInput rescored = in;
    for (auto& [_, v] : rescored.detections)
      for (auto& d : v) d.score = std::exp(3 * d.score) / 100.0;
    const auto again = evaluate(rescored, thetas);
    for (std::size_t k = 0; k < 4; ++k) CHECK(again.map[k] == table.map[k]);

    // interpolated precision never rises with recall
    const auto queries = build_class_queries(in);
    for (const auto& q : queries) {
      const auto pr = precision_recall(q, 0.5);
      double last = 2.0;
      for (double r = 0; r <= 1.0001; r += 0.05) {
        const double p = interpolated_precision(pr, r);
        CHECK(p <= last);
        last = p;
      }
    }
  }
}
