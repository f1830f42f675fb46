// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "skelbox/geometry.hpp"
#include "skelbox/network.hpp"
#include "skelbox/skeleton.hpp"

namespace skelbox {

/// Scored temporal detection over frames [start, end).
struct Detection {
  int label = 0;
  double score = 0.0;
  std::int64_t start = 0;
  std::int64_t end = 0;

  std::pair<double, double> interval() const { return {double(start), double(end)}; }
  friend bool operator==(const Detection&, const Detection&) = default;
};

struct InferenceConfig {
  double conf_threshold = 0.01;
  int top_k = 200;  // per class, before NMS
  double nms_iou = 0.45;
};

/// Softmax per prior; every (prior, action class) with probability above the
/// threshold becomes a detection whose decoded, clipped box is projected to
/// frames. Keeps the `top_k` best per class.
std::vector<Detection> decode_detections(const Predictions& pred, std::span<const BoxD> priors,
                                         const ImageMeta& meta, double conf_threshold, int top_k);

/// Per-class greedy suppression on interval IoU > iou_thresh. Candidates are
/// visited by score, then earlier start, then input index. Output is sorted
/// by score descending (same tie rule).
std::vector<Detection> nms(std::span<const Detection> dets, double iou_thresh);

/// Convenience: forward, decode, NMS.
std::vector<Detection> detect(const Network& net, std::span<const BoxD> priors, const ActionImage& image,
                              const InferenceConfig& cfg);

// ---------------------------------------------------------------------------
// Evaluation

struct PRPoint {
  double recall = 0.0;
  double precision = 0.0;
  // Counts behind `precision`; rank 0 means unknown (hand-built points).
  std::size_t true_positives = 0;
  std::size_t rank = 0;
};

/// Detections and ground truth of a single class, possibly pooled over
/// videos. `video` keys keep matches within one video.
struct ClassQuery {
  std::vector<std::pair<int, Detection>> detections;          // (video, detection)
  std::vector<std::pair<int, GroundTruthSegment>> segments;   // (video, segment)
};

/// Ranked PR curve. A detection is a true positive when its IoU with an
/// unclaimed ground truth of the same video exceeds theta; it claims the
/// best such ground truth. Ranking: score descending, input order on ties.
std::vector<PRPoint> precision_recall(const ClassQuery& query, double theta);

/// Single-video form.
std::vector<PRPoint> precision_recall(std::span<const Detection> dets,
                                      std::span<const GroundTruthSegment> gts, double theta);

/// Max precision over points with recall >= r; 0 when none.
double interpolated_precision(std::span<const PRPoint> pr, double r);

/// (1 / m) sum_{k=1..m} p_interp(k / m) for a class with m ground truths.
double average_precision(std::span<const PRPoint> pr, std::size_t num_gts);

/// Mean AP over the queries that have at least one ground truth.
double mean_average_precision(std::span<const ClassQuery> queries, double theta);

/// Detections and ground truth keyed by video id.
struct EvalInput {
  std::map<std::string, std::vector<Detection>> detections;
  std::map<std::string, std::vector<GroundTruthSegment>> segments;
};

/// One ClassQuery per class present in the ground truth (index = label);
/// detections of classes with no ground truth are dropped. Classes absent
/// from the ground truth get an empty query.
std::vector<ClassQuery> build_class_queries(const EvalInput& input);

struct EvalTable {
  std::vector<double> thetas;
  std::vector<int> classes;                     // classes with ground truth
  std::vector<std::vector<double>> class_ap;    // [class][theta]
  std::vector<double> map;                      // [theta]
};

EvalTable evaluate(const EvalInput& input, std::span<const double> thetas);

}  // namespace skelbox
