// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
#include "skelbox/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace skelbox {

std::vector<Detection> decode_detections(const Predictions& pred, std::span<const BoxD> priors,
                                         const ImageMeta& meta, double conf_threshold, int top_k) {
  const Index n = static_cast<Index>(priors.size());
  if (pred.loc.rows() != n || pred.conf.rows() != n) {
    throw ShapeError("decode_detections: " + std::to_string(pred.loc.rows()) + " predictions for " +
                     std::to_string(n) + " priors");
  }
  const Index classes = pred.conf.cols();
  struct Candidate {
    Index prior;
    double score;
  };
  std::vector<std::vector<Candidate>> per_class(static_cast<std::size_t>(classes));
  for (Index p = 0; p < n; ++p) {
    const auto row = pred.conf.row(p);
    const double m = row.maxCoeff();
    const double z = (row.array() - m).exp().sum();
    for (Index c = 1; c < classes; ++c) {
      const double prob = std::exp(row(c) - m) / z;
      if (prob > conf_threshold) per_class[static_cast<std::size_t>(c)].push_back({p, prob});
    }
  }

  std::vector<Detection> out;
  for (Index c = 1; c < classes; ++c) {
    auto& cands = per_class[static_cast<std::size_t>(c)];
    const auto keep = std::min<std::size_t>(cands.size(), static_cast<std::size_t>(std::max(top_k, 0)));
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                        return a.score != b.score ? a.score > b.score : a.prior < b.prior;
                      });
    for (std::size_t i = 0; i < keep; ++i) {
      const Index p = cands[i].prior;
      const BoxOffsetsD t{pred.loc(p, 0), pred.loc(p, 1), pred.loc(p, 2), pred.loc(p, 3)};
      const BoxD box = clip_unit(decode_offsets(priors[static_cast<std::size_t>(p)], t));
      const auto [f0, f1] = box_to_frames(box, meta);
      Detection d;
      d.label = static_cast<int>(c - 1);
      d.score = cands[i].score;
      d.start = std::clamp<std::int64_t>(std::llround(f0), 0, meta.source_len);
      d.end = std::clamp<std::int64_t>(std::llround(f1), 0, meta.source_len);
      if (d.end <= d.start) {
        if (d.start >= meta.source_len) d.start = meta.source_len - 1;
        d.end = d.start + 1;
      }
      out.push_back(d);
    }
  }
  return out;
}

std::vector<Detection> nms(std::span<const Detection> dets, double iou_thresh) {
  if (!(iou_thresh > 0 && iou_thresh < 1)) throw ValidationError("nms: IoU threshold must lie in (0, 1)");
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto before = [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    if (dets[a].start != dets[b].start) return dets[a].start < dets[b].start;
    return a < b;
  };
  std::sort(order.begin(), order.end(), before);
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (dets[k].label == dets[i].label &&
          iou_interval(dets[k].interval(), dets[i].interval()) > iou_thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(i);
  }
  std::vector<Detection> out;
  out.reserve(kept.size());
  for (std::size_t k : kept) out.push_back(dets[k]);
  return out;
}

std::vector<Detection> detect(const Network& net, std::span<const BoxD> priors, const ActionImage& image,
                              const InferenceConfig& cfg) {
  const auto& nc = net.config();
  const ActionImage resized = resample_width(image, nc.input_cols);
  const TensorD input = to_input_tensor(resized, nc.input_rows);
  const Predictions pred = flatten(net.forward(input), nc.num_classes);
  const auto raw = decode_detections(pred, priors, meta_of(resized), cfg.conf_threshold, cfg.top_k);
  return nms(raw, cfg.nms_iou);
}

std::vector<PRPoint> precision_recall(const ClassQuery& query, double theta) {
  const auto& dets = query.detections;
  const auto& gts = query.segments;
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].second.score > dets[b].second.score; });
  std::vector<bool> claimed(gts.size(), false);
  std::vector<PRPoint> pr;
  pr.reserve(dets.size());
  const double m = double(gts.size());
  std::size_t tp = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const auto& [video, det] = dets[order[rank]];
    std::size_t best = gts.size();
    double best_iou = theta;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (claimed[g] || gts[g].first != video || gts[g].second.label != det.label) continue;
      const auto& seg = gts[g].second;
      const double iou = iou_interval(det.interval(), {double(seg.start), double(seg.end)});
      if (iou > best_iou) {
        best_iou = iou;
        best = g;
      }
    }
    if (best < gts.size()) {
      claimed[best] = true;
      ++tp;
    }
    pr.push_back({gts.empty() ? 0.0 : double(tp) / m, double(tp) / double(rank + 1), tp, rank + 1});
  }
  return pr;
}

std::vector<PRPoint> precision_recall(std::span<const Detection> dets, std::span<const GroundTruthSegment> gts,
                                      double theta) {
  ClassQuery q;
  for (const auto& d : dets) q.detections.emplace_back(0, d);
  for (const auto& g : gts) q.segments.emplace_back(0, g);
  return precision_recall(q, theta);
}

double interpolated_precision(std::span<const PRPoint> pr, double r) {
  double best = 0.0;
  for (const auto& p : pr) {
    if (p.recall >= r) best = std::max(best, p.precision);
  }
  return best;
}

double average_precision(std::span<const PRPoint> pr, std::size_t num_gts) {
  if (num_gts == 0) throw ValidationError("average_precision: class has no ground truth");
  // Suffix argmax of precision makes each p_interp lookup a scan-free step.
  std::vector<std::size_t> suffix_best(pr.size() + 1, pr.size());
  for (std::size_t i = pr.size(); i-- > 0;) {
    const std::size_t b = suffix_best[i + 1];
    suffix_best[i] = b < pr.size() && pr[b].precision > pr[i].precision ? b : i;
  }
  // Sum the exact ratios in extended precision so that rational results
  // such as 5/6 round once, at the end.
  auto precision_of = [&](std::size_t i) -> long double {
    if (i == pr.size()) return 0.0L;
    if (pr[i].rank == 0) return pr[i].precision;
    return static_cast<long double>(pr[i].true_positives) / static_cast<long double>(pr[i].rank);
  };
  const double m = double(num_gts);
  long double sum = 0.0L;
  std::size_t first = 0;
  for (std::size_t k = 1; k <= num_gts; ++k) {
    const double r = double(k) / m;
    while (first < pr.size() && pr[first].recall < r) ++first;
    sum += precision_of(suffix_best[first]);
  }
  return static_cast<double>(sum / static_cast<long double>(num_gts));
}

double mean_average_precision(std::span<const ClassQuery> queries, double theta) {
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& q : queries) {
    if (q.segments.empty()) continue;
    sum += average_precision(precision_recall(q, theta), q.segments.size());
    ++used;
  }
  if (used == 0) throw ValidationError("mean_average_precision: no class has ground truth");
  return sum / double(used);
}

std::vector<ClassQuery> build_class_queries(const EvalInput& input) {
  int classes = 0;
  for (const auto& [_, segs] : input.segments) {
    for (const auto& s : segs) classes = std::max(classes, s.label + 1);
  }
  std::vector<ClassQuery> queries(static_cast<std::size_t>(classes));
  std::map<std::string, int> video_ids;
  auto id_of = [&](const std::string& v) {
    return video_ids.emplace(v, static_cast<int>(video_ids.size())).first->second;
  };
  for (const auto& [video, segs] : input.segments) {
    const int id = id_of(video);
    for (const auto& s : segs) queries[static_cast<std::size_t>(s.label)].segments.emplace_back(id, s);
  }
  for (const auto& [video, dets] : input.detections) {
    const int id = id_of(video);
    for (const auto& d : dets) {
      if (d.label < 0 || d.label >= classes) continue;
      queries[static_cast<std::size_t>(d.label)].detections.emplace_back(id, d);
    }
  }
  return queries;
}

EvalTable evaluate(const EvalInput& input, std::span<const double> thetas) {
  const auto queries = build_class_queries(input);
  EvalTable table;
  table.thetas.assign(thetas.begin(), thetas.end());
  for (std::size_t c = 0; c < queries.size(); ++c) {
    if (!queries[c].segments.empty()) table.classes.push_back(static_cast<int>(c));
  }
  if (table.classes.empty()) throw ValidationError("evaluate: no ground truth segments");
  table.class_ap.assign(table.classes.size(), std::vector<double>(thetas.size(), 0.0));
  table.map.assign(thetas.size(), 0.0);
  for (std::size_t t = 0; t < thetas.size(); ++t) {
    for (std::size_t i = 0; i < table.classes.size(); ++i) {
      const auto& q = queries[static_cast<std::size_t>(table.classes[i])];
      table.class_ap[i][t] = average_precision(precision_recall(q, thetas[t]), q.segments.size());
      table.map[t] += table.class_ap[i][t];
    }
    table.map[t] /= double(table.classes.size());
  }
  return table;
}

}  // namespace skelbox
