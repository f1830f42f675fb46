// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
// Slow reference implementations used to cross-check postprocessing and
// evaluation. Written independently of src/postprocess.cpp.
#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "skelbox/postprocess.hpp"
#include "skelbox/rng.hpp"

namespace skelbox::testing {

inline double interval_iou_ref(std::int64_t a0, std::int64_t a1, std::int64_t b0, std::int64_t b1) {
  const double inter = double(std::max<std::int64_t>(0, std::min(a1, b1) - std::max(a0, b0)));
  const double uni = double(a1 - a0) + double(b1 - b0) - inter;
  return inter == 0 ? 0.0 : inter / uni;
}

// Repeatedly take the best remaining candidate and strike out its overlaps.
inline std::vector<Detection> nms_ref(const std::vector<Detection>& dets, double thresh) {
  std::vector<bool> alive(dets.size(), true);
  std::vector<Detection> out;
  for (;;) {
    int best = -1;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (!alive[i]) continue;
      if (best < 0) {
        best = int(i);
        continue;
      }
      const auto& a = dets[i];
      const auto& b = dets[std::size_t(best)];
      if (a.score > b.score || (a.score == b.score && a.start < b.start)) best = int(i);
    }
    if (best < 0) break;
    const auto& keep = dets[std::size_t(best)];
    out.push_back(keep);
    alive[std::size_t(best)] = false;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (alive[i] && dets[i].label == keep.label &&
          interval_iou_ref(keep.start, keep.end, dets[i].start, dets[i].end) > thresh) {
        alive[i] = false;
      }
    }
  }
  return out;
}

// Interpolated mAP with the precision at each rank recomputed from scratch
// and p_interp found by exhaustive scan.
inline double map_ref(const std::map<std::string, std::vector<Detection>>& dets,
                      const std::map<std::string, std::vector<GroundTruthSegment>>& gts, double theta) {
  int num_classes = 0;
  for (const auto& [_, v] : gts)
    for (const auto& g : v) num_classes = std::max(num_classes, g.label + 1);
  double total = 0;
  int used = 0;
  for (int c = 0; c < num_classes; ++c) {
    struct Ranked {
      std::string video;
      Detection det;
      std::size_t order;
    };
    std::vector<Ranked> ranked;
    std::size_t order = 0;
    for (const auto& [video, v] : dets)
      for (const auto& d : v)
        if (d.label == c) ranked.push_back({video, d, order++});
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
      return a.det.score != b.det.score ? a.det.score > b.det.score : a.order < b.order;
    });
    std::vector<std::pair<std::string, GroundTruthSegment>> pool;
    for (const auto& [video, v] : gts)
      for (const auto& g : v)
        if (g.label == c) pool.emplace_back(video, g);
    if (pool.empty()) continue;
    const std::size_t m = pool.size();

    std::vector<double> precision, recall;
    for (std::size_t k = 1; k <= ranked.size(); ++k) {
      std::vector<bool> used_gt(m, false);
      std::size_t tp = 0;
      for (std::size_t i = 0; i < k; ++i) {
        int best = -1;
        double best_iou = 0;
        for (std::size_t g = 0; g < m; ++g) {
          if (used_gt[g] || pool[g].first != ranked[i].video) continue;
          const double iou = interval_iou_ref(ranked[i].det.start, ranked[i].det.end, pool[g].second.start,
                                              pool[g].second.end);
          if (iou > theta && (best < 0 || iou > best_iou)) best = int(g), best_iou = iou;
        }
        if (best >= 0) used_gt[std::size_t(best)] = true, ++tp;
      }
      precision.push_back(double(tp) / double(k));
      recall.push_back(double(tp) / double(m));
    }
    double ap = 0;
    for (std::size_t k = 1; k <= m; ++k) {
      const double r = double(k) / double(m);
      double p = 0;
      for (std::size_t i = 0; i < precision.size(); ++i)
        if (recall[i] >= r) p = std::max(p, precision[i]);
      ap += p;
    }
    total += ap / double(m);
    ++used;
  }
  return total / used;
}

struct RandomEval {
  std::map<std::string, std::vector<Detection>> dets;
  std::map<std::string, std::vector<GroundTruthSegment>> gts;
};

// Small scenes near ground truth so every outcome (TP, FP, duplicate, miss)
// occurs. Scores are drawn from a coarse grid so that ties happen.
inline RandomEval random_eval(Rng& rng, int classes = 3, int videos = 3) {
  RandomEval e;
  for (int v = 0; v < videos; ++v) {
    const std::string id = "v" + std::to_string(v);
    auto& gts = e.gts[id];
    const auto n = rng.uniform_int(0, 4);
    for (int i = 0; i < n; ++i) {
      const auto s = rng.uniform_int(0, 80);
      gts.push_back({int(rng.uniform_int(0, classes - 1)), s, s + rng.uniform_int(5, 30), 1.0});
    }
    auto& dets = e.dets[id];
    const auto k = rng.uniform_int(0, 6);
    for (int i = 0; i < k; ++i) {
      Detection d;
      if (!gts.empty() && rng.bernoulli(0.7)) {
        const auto& g = gts[std::size_t(rng.uniform_int(0, Index(gts.size()) - 1))];
        d.label = rng.bernoulli(0.85) ? g.label : int(rng.uniform_int(0, classes - 1));
        d.start = std::max<std::int64_t>(0, g.start + rng.uniform_int(-8, 8));
        d.end = std::max<std::int64_t>(d.start + 1, g.end + rng.uniform_int(-8, 8));
      } else {
        d.label = int(rng.uniform_int(0, classes - 1));
        d.start = rng.uniform_int(0, 90);
        d.end = d.start + rng.uniform_int(1, 30);
      }
      d.score = double(rng.uniform_int(1, 20)) / 20.0;
      dets.push_back(d);
    }
  }
  bool any = false;
  for (const auto& [_, v] : e.gts) any = any || !v.empty();
  if (!any) e.gts["v0"].push_back({0, 10, 20, 1.0});
  return e;
}

}  // namespace skelbox::testing
