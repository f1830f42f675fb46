// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
#include "skelbox/network.hpp"

#include <cmath>
#include <numeric>
#include <thread>

namespace skelbox {

std::vector<Shape> NetConfig::layer_shapes() const {
  std::vector<Shape> shapes;
  Shape current{input_rows, input_cols, input_channels};
  for (std::size_t i = 0; i < backbone.size(); ++i) {
    const auto& layer = backbone[i];
    const auto where = "layer " + std::to_string(i) + ": ";
    if (layer.kind == LayerKind::kConv) {
      if (layer.channels <= 0) throw ConfigError(where + "conv needs positive channels");
      if (current[0] + 2 * layer.pad.rows < layer.kernel.rows ||
          current[1] + 2 * layer.pad.cols < layer.kernel.cols) {
        throw ConfigError(where + "kernel larger than padded input " + shape_string(current));
      }
      current = {conv_out_extent(current[0], layer.kernel.rows, layer.stride.rows, layer.pad.rows),
                 conv_out_extent(current[1], layer.kernel.cols, layer.stride.cols, layer.pad.cols),
                 layer.channels};
    } else {
      if (current[0] < layer.kernel.rows || current[1] < layer.kernel.cols) {
        throw ConfigError(where + "pool window larger than input " + shape_string(current));
      }
      current = {conv_out_extent(current[0], layer.kernel.rows, layer.stride.rows, 0),
                 conv_out_extent(current[1], layer.kernel.cols, layer.stride.cols, 0), current[2]};
    }
    if (layer.stride.rows < 1 || layer.stride.cols < 1) throw ConfigError(where + "stride must be >= 1");
    shapes.push_back(current);
  }
  return shapes;
}

std::vector<FeatureMapShape> NetConfig::head_shapes() const {
  const auto shapes = layer_shapes();
  std::vector<FeatureMapShape> out;
  for (int idx : head_layers) {
    if (idx < 0 || idx >= static_cast<int>(shapes.size())) {
      throw ConfigError("head layer index " + std::to_string(idx) + " out of range");
    }
    const auto& s = shapes[static_cast<std::size_t>(idx)];
    out.push_back({s[0], s[1]});
  }
  return out;
}

void NetConfig::validate() const {
  if (input_rows <= 0 || input_cols <= 0 || input_channels <= 0) {
    throw ConfigError("net: input extents must be positive");
  }
  if (num_classes < 2) throw ConfigError("net: need at least one action class plus background");
  if (anchors_per_cell < 1) throw ConfigError("net: anchors_per_cell must be >= 1");
  if (head_layers.empty()) throw ConfigError("net: no head layers");
  if (!(detection_kernel == Extent2{5, 1})) throw ConfigError("net: detection kernel must be 5x1");
  const auto heads = head_shapes();
  for (std::size_t i = 1; i < heads.size(); ++i) {
    if (heads[i].cols >= heads[i - 1].cols) {
      throw ConfigError("net: head feature maps must have strictly decreasing column counts");
    }
  }
  for (std::size_t i = 0; i < backbone.size(); ++i) {
    if (backbone[i].kind == LayerKind::kMaxPool) {
      for (int h : head_layers) {
        if (h == static_cast<int>(i)) throw ConfigError("net: heads must follow a conv layer");
      }
    }
  }
}

NetConfig tiny_skeleton_net(Index num_action_classes, Index anchors_per_cell, Index input_cols,
                            std::vector<Index> widths) {
  if (widths.size() != 5) throw ConfigError("tiny_skeleton_net: expected 5 block widths");
  NetConfig cfg;
  cfg.input_cols = input_cols;
  cfg.num_classes = num_action_classes + 1;
  cfg.anchors_per_cell = anchors_per_cell;
  const LayerSpec pool = LayerSpec::pool({1, 2}, {1, 2});
  cfg.backbone = {
      LayerSpec::conv(widths[0]),  // 0
      LayerSpec::conv(widths[1]),  // 1
      pool,                        // 2
      LayerSpec::conv(widths[2]),  // 3  head
      pool,                        // 4
      LayerSpec::conv(widths[3]),  // 5  head
      pool,                        // 6
      LayerSpec::conv(widths[4]),  // 7  head
      LayerSpec::conv(widths[4], {3, 3}, {2, 2}, {1, 1}),  // 8  head
      LayerSpec::conv(widths[4], {3, 3}, {2, 2}, {1, 1}),  // 9  head
  };
  cfg.head_layers = {3, 5, 7, 8, 9};
  return cfg;
}

NetConfig vgg16_skeleton_net(Index num_action_classes, Index anchors_per_cell, Index input_cols) {
  NetConfig cfg;
  cfg.input_cols = input_cols;
  cfg.num_classes = num_action_classes + 1;
  cfg.anchors_per_cell = anchors_per_cell;
  const LayerSpec pool = LayerSpec::pool({1, 2}, {1, 2});
  auto& b = cfg.backbone;
  auto block = [&](Index ch, int n) {
    for (int i = 0; i < n; ++i) b.push_back(LayerSpec::conv(ch));
  };
  block(64, 2);
  b.push_back(pool);
  block(128, 2);
  b.push_back(pool);
  block(256, 3);
  b.push_back(pool);
  block(512, 3);  // conv4_3 is index 12
  cfg.head_layers.push_back(static_cast<int>(b.size()) - 1);
  b.push_back(pool);
  block(512, 3);
  b.push_back(LayerSpec::conv(1024));                     // fc6
  b.push_back(LayerSpec::conv(1024, {1, 1}, {1, 1}, {0, 0}));  // fc7
  cfg.head_layers.push_back(static_cast<int>(b.size()) - 1);
  for (int i = 0; i < 4; ++i) {  // conv8 .. conv11
    b.push_back(LayerSpec::conv(i < 1 ? 512 : 256, {3, 3}, {2, 2}, {1, 1}));
    cfg.head_layers.push_back(static_cast<int>(b.size()) - 1);
  }
  return cfg;
}

DetectorConfig DetectorConfig::resolved() const {
  DetectorConfig out = *this;
  out.net.validate();
  out.prior.feature_map_shapes = net.head_shapes();
  if (static_cast<Index>(out.prior.aspect_ratios.size()) != net.anchors_per_cell) {
    throw ConfigError("detector: " + std::to_string(out.prior.aspect_ratios.size()) +
                      " aspect ratios but net has " + std::to_string(net.anchors_per_cell) +
                      " anchors per cell");
  }
  out.prior.validate();
  return out;
}

Predictions flatten(std::span<const HeadOutput> heads, Index num_classes) {
  Index total = 0;
  for (const auto& h : heads) total += h.loc.size() / 4;
  Predictions p{RowMatrix<double>(total, 4), RowMatrix<double>(total, num_classes)};
  Index row = 0;
  for (const auto& h : heads) {
    const Index n = h.loc.size() / 4;
    if (h.conf.size() != n * num_classes) throw ShapeError("flatten: loc/conf head sizes disagree");
    p.loc.middleRows(row, n) = Eigen::Map<const RowMatrix<double>>(h.loc.ptr(), n, 4);
    p.conf.middleRows(row, n) = Eigen::Map<const RowMatrix<double>>(h.conf.ptr(), n, num_classes);
    row += n;
  }
  return p;
}

Network::Network(NetConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto shapes = config_.layer_shapes();
  Index channels = config_.input_channels;
  for (std::size_t i = 0; i < config_.backbone.size(); ++i) {
    const auto& layer = config_.backbone[i];
    if (layer.kind == LayerKind::kConv) {
      params_.emplace_back(Shape{layer.kernel.rows, layer.kernel.cols, channels, layer.channels});
      params_.emplace_back(Shape{layer.channels});
    }
    channels = shapes[i][2];
  }
  const auto k = config_.detection_kernel;
  for (int idx : config_.head_layers) {
    const Index cin = shapes[static_cast<std::size_t>(idx)][2];
    params_.emplace_back(Shape{k.rows, k.cols, cin, config_.anchors_per_cell * 4});
    params_.emplace_back(Shape{config_.anchors_per_cell * 4});
    params_.emplace_back(Shape{k.rows, k.cols, cin, config_.anchors_per_cell * config_.num_classes});
    params_.emplace_back(Shape{config_.anchors_per_cell * config_.num_classes});
  }
  build_slots();
}

void Network::build_slots() {
  layer_slots_.clear();
  head_slots_.clear();
  int next = 0;
  for (const auto& layer : config_.backbone) {
    if (layer.kind == LayerKind::kConv) {
      layer_slots_.push_back({next, next + 1});
      next += 2;
    } else {
      layer_slots_.push_back({});
    }
  }
  for (std::size_t h = 0; h < config_.head_layers.size(); ++h) {
    head_slots_.push_back({next, next + 1, next + 2, next + 3});
    next += 4;
  }
}

Network Network::initialize(NetConfig config, std::uint64_t seed) {
  Network net(std::move(config));
  Rng rng(seed);
  for (std::size_t i = 0; i < net.layer_slots_.size(); ++i) {
    const auto slot = net.layer_slots_[i];
    if (slot.weight < 0) continue;
    auto& w = net.params_[static_cast<std::size_t>(slot.weight)];
    const double fan_in = double(w.dim(0) * w.dim(1) * w.dim(2));
    const double limit = std::sqrt(6.0 / fan_in);
    for (Index j = 0; j < w.size(); ++j) w[j] = rng.uniform(-limit, limit);
  }
  for (const auto& head : net.head_slots_) {
    auto& bias = net.params_[static_cast<std::size_t>(head.conf_b)];
    for (Index a = 0; a < net.config_.anchors_per_cell; ++a) bias[a * net.config_.num_classes] = 2.0;
  }
  return net;
}

void Network::check_input(const TensorD& input) const {
  const Shape expected{config_.input_rows, config_.input_cols, config_.input_channels};
  if (input.shape() != expected) {
    throw ShapeError("network input " + shape_string(input.shape()) + ", expected " +
                     shape_string(expected));
  }
}

Network::Trace Network::forward_trace(const TensorD& input) const {
  check_input(input);
  Trace trace;
  trace.activations.reserve(config_.backbone.size() + 1);
  trace.activations.push_back(input);
  for (std::size_t i = 0; i < config_.backbone.size(); ++i) {
    const auto& layer = config_.backbone[i];
    const TensorD& x = trace.activations.back();
    TensorD y;
    if (layer.kind == LayerKind::kConv) {
      const auto slot = layer_slots_[i];
      y = conv2d(x, params_[static_cast<std::size_t>(slot.weight)], layer.stride, layer.pad);
      add_bias(y, params_[static_cast<std::size_t>(slot.bias)]);
      if (layer.relu) y.data() = y.data().cwiseMax(0.0);
    } else {
      y = maxpool(x, layer.kernel, layer.stride);
    }
    trace.activations.push_back(std::move(y));
  }
  const Extent2 pad = config_.detection_pad();
  for (std::size_t h = 0; h < config_.head_layers.size(); ++h) {
    const TensorD& feat = trace.activations[static_cast<std::size_t>(config_.head_layers[h]) + 1];
    const auto& s = head_slots_[h];
    HeadOutput out;
    out.loc = conv2d(feat, params_[static_cast<std::size_t>(s.loc_w)], {}, pad);
    add_bias(out.loc, params_[static_cast<std::size_t>(s.loc_b)]);
    out.conf = conv2d(feat, params_[static_cast<std::size_t>(s.conf_w)], {}, pad);
    add_bias(out.conf, params_[static_cast<std::size_t>(s.conf_b)]);
    trace.heads.push_back(std::move(out));
  }
  return trace;
}

std::vector<HeadOutput> Network::forward(const TensorD& input) const {
  return forward_trace(input).heads;
}

std::vector<TensorD> Network::backward(const Trace& trace, const RowMatrix<double>& grad_loc,
                                       const RowMatrix<double>& grad_conf) const {
  std::vector<TensorD> grads;
  grads.reserve(params_.size());
  for (const auto& p : params_) grads.push_back(TensorD::zeros_like(p));

  // Upstream gradient on each backbone output, accumulated from heads and the next layer.
  std::vector<TensorD> g_act(trace.activations.size());
  const Extent2 pad = config_.detection_pad();
  Index row = 0;
  for (std::size_t h = 0; h < config_.head_layers.size(); ++h) {
    const auto& s = head_slots_[h];
    const auto& head = trace.heads[h];
    const Index n = head.loc.size() / 4;
    if (row + n > grad_loc.rows()) throw ShapeError("backward: gradient has too few priors");
    TensorD g_loc(head.loc.shape());
    TensorD g_conf(head.conf.shape());
    Eigen::Map<RowMatrix<double>>(g_loc.ptr(), n, 4) = grad_loc.middleRows(row, n);
    Eigen::Map<RowMatrix<double>>(g_conf.ptr(), n, config_.num_classes) = grad_conf.middleRows(row, n);
    row += n;

    const auto idx = static_cast<std::size_t>(config_.head_layers[h]) + 1;
    const TensorD& feat = trace.activations[idx];
    auto cl = conv2d_backward(feat, params_[static_cast<std::size_t>(s.loc_w)], g_loc, {}, pad);
    auto cc = conv2d_backward(feat, params_[static_cast<std::size_t>(s.conf_w)], g_conf, {}, pad);
    grads[static_cast<std::size_t>(s.loc_w)] = std::move(cl.kernel);
    grads[static_cast<std::size_t>(s.loc_b)] = bias_backward(g_loc);
    grads[static_cast<std::size_t>(s.conf_w)] = std::move(cc.kernel);
    grads[static_cast<std::size_t>(s.conf_b)] = bias_backward(g_conf);
    cl.input += cc.input;
    if (g_act[idx].empty()) {
      g_act[idx] = std::move(cl.input);
    } else {
      g_act[idx] += cl.input;
    }
  }
  if (row != grad_loc.rows() || grad_loc.rows() != grad_conf.rows()) {
    throw ShapeError("backward: gradient rows do not match the prediction count");
  }

  for (std::size_t i = config_.backbone.size(); i-- > 0;) {
    TensorD& g = g_act[i + 1];
    if (g.empty()) continue;  // nothing downstream
    const auto& layer = config_.backbone[i];
    const TensorD& x = trace.activations[i];
    TensorD g_in;
    if (layer.kind == LayerKind::kConv) {
      const auto slot = layer_slots_[i];
      if (layer.relu) g = relu_backward(trace.activations[i + 1], g);
      auto cg = conv2d_backward(x, params_[static_cast<std::size_t>(slot.weight)], g, layer.stride,
                                layer.pad);
      grads[static_cast<std::size_t>(slot.weight)] = std::move(cg.kernel);
      grads[static_cast<std::size_t>(slot.bias)] = bias_backward(g);
      g_in = std::move(cg.input);
    } else {
      g_in = maxpool_backward(x, g, layer.kernel, layer.stride);
    }
    if (i == 0) break;  // input gradient not needed
    if (g_act[i].empty()) {
      g_act[i] = std::move(g_in);
    } else {
      g_act[i] += g_in;
    }
  }
  return grads;
}

void TrainConfig::validate() const {
  if (!(lr > 0)) throw ConfigError("train: lr must be positive");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("train: momentum must lie in [0, 1)");
  if (weight_decay < 0) throw ConfigError("train: weight_decay must be >= 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(lr_drop_factor >= 1)) throw ConfigError("train: lr_drop_factor must be >= 1");
  if (lr_drops_max < 0 || plateau_patience < 1) throw ConfigError("train: invalid plateau schedule");
  if (max_epochs < 0) throw ConfigError("train: max_epochs must be >= 0");
  if (!(augment_prob >= 0 && augment_prob <= 1)) throw ConfigError("train: augment_prob must lie in [0, 1]");
  if (!(match_threshold > 0 && match_threshold < 1)) throw ConfigError("train: match_threshold must lie in (0, 1)");
  if (!(neg_ratio > 0)) throw ConfigError("train: neg_ratio must be positive");
  if (jobs < 1) throw ConfigError("train: jobs must be >= 1");
}

void sgd_step(std::vector<TensorD>& params, const std::vector<TensorD>& grads,
              std::vector<TensorD>& velocity, const TrainConfig& cfg, double current_lr) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw ShapeError("sgd_step: parameter, gradient and velocity counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    TensorD::require_same_shape(params[i], grads[i], "sgd_step");
    TensorD::require_same_shape(params[i], velocity[i], "sgd_step");
    auto& v = velocity[i].data();
    auto& p = params[i].data();
    v = cfg.momentum * v - current_lr * (grads[i].data() + cfg.weight_decay * p);
    p += v;
  }
}

void PlateauSchedule::end_epoch(double loss) {
  if (!has_best_ || loss < best_) {
    best_ = loss;
    has_best_ = true;
    stale_ = 0;
    return;
  }
  if (++stale_ >= patience_) {
    stale_ = 0;
    if (drops_ < max_drops_) {
      lr_ /= factor_;
      ++drops_;
    }
  }
}

void PlateauSchedule::restore(double lr, int drops, double best, int stale, bool has_best) {
  lr_ = lr;
  drops_ = drops;
  best_ = best;
  stale_ = stale;
  has_best_ = has_best;
}

PreparedSample prepare_sample(const TrainingSample& sample, const NetConfig& net, Rng* rng,
                              double augment_prob) {
  const ActionImage* img = &sample.image;
  ActionImage cropped;
  std::vector<GroundTruthSegment> segments = sample.segments;
  validate_segments(segments, static_cast<std::size_t>(sample.image.source_len));
  if (rng != nullptr && !segments.empty() && rng->bernoulli(augment_prob)) {
    // Crop in native columns (one per frame before resampling).
    const ImageMeta meta = meta_of(sample.image);
    const Index w = sample.image.width;
    const Index min_len = std::max<Index>(1, w / 2);
    const Index len = rng->uniform_int(min_len, w);
    const auto& anchor = segments[static_cast<std::size_t>(rng->uniform_int(0, Index(segments.size()) - 1))];
    const double center_col = meta.col_to_frame.to_column(0.5 * double(anchor.start + anchor.end));
    const Index c = std::clamp<Index>(static_cast<Index>(std::floor(center_col)), 0, w - 1);
    const Index lo = std::max<Index>(0, c - len + 1);
    const Index hi = std::min<Index>(c, w - len);
    const Index first = rng->uniform_int(lo, hi);
    cropped = crop_columns(sample.image, first, first + len);
    const double f0 = cropped.col_to_frame.to_frame(0.0);
    const double f1 = cropped.col_to_frame.to_frame(double(len));
    std::vector<GroundTruthSegment> kept;
    for (auto seg : segments) {
      const double center = 0.5 * double(seg.start + seg.end);
      if (center < f0 || center >= f1) continue;
      seg.start = std::max<std::int64_t>(seg.start, static_cast<std::int64_t>(std::ceil(f0)));
      seg.end = std::min<std::int64_t>(seg.end, static_cast<std::int64_t>(std::floor(f1)));
      if (seg.start < seg.end) kept.push_back(seg);
    }
    segments = std::move(kept);
    img = &cropped;
  }
  const ActionImage resized = resample_width(*img, net.input_cols);
  PreparedSample out;
  out.input = to_input_tensor(resized, net.input_rows);
  out.meta = meta_of(resized);
  for (const auto& seg : segments) {
    out.boxes.push_back(gt_segment_to_box(seg, out.meta));
    out.labels.push_back(seg.label);
    if (seg.label < 0 || seg.label + 1 >= net.num_classes) {
      throw ValidationError("segment label " + std::to_string(seg.label) + " outside the network's " +
                            std::to_string(net.num_classes - 1) + " action classes");
    }
  }
  return out;
}

namespace {

struct SampleResult {
  LossReport report;
  std::vector<TensorD> grads;
};

SampleResult sample_loss(const Network& net, std::span<const BoxD> priors, const PreparedSample& s,
                         const TrainConfig& cfg) {
  const auto trace = net.forward_trace(s.input);
  const Predictions pred = flatten(trace.heads, net.config().num_classes);
  const auto match = match_gt<double>(priors, s.boxes, cfg.match_threshold);
  const auto loss = multibox_loss<double>(pred.loc, pred.conf, priors, s.boxes, s.labels, match,
                                          {cfg.alpha, cfg.neg_ratio});
  SampleResult r;
  r.report = loss.report;
  if (loss.report.n_matched > 0) r.grads = net.backward(trace, loss.grad_loc, loss.grad_conf);
  return r;
}

}  // namespace

BatchLoss batch_loss(const Network& net, std::span<const BoxD> priors,
                     std::span<const PreparedSample> batch, const TrainConfig& cfg) {
  std::vector<SampleResult> results(batch.size());
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), batch.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) results[i] = sample_loss(net, priors, batch[i], cfg);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < batch.size(); i += workers) {
            results[i] = sample_loss(net, priors, batch[i], cfg);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  BatchLoss out;
  for (const auto& p : net.parameters()) out.grads.push_back(TensorD::zeros_like(p));
  const double inv_b = 1.0 / double(batch.size());
  for (const auto& r : results) {
    out.total += r.report.total * inv_b;
    if (r.report.n_matched > 0) {
      out.conf += r.report.conf / double(r.report.n_matched) * inv_b;
      out.loc += r.report.loc / double(r.report.n_matched) * inv_b;
      for (std::size_t k = 0; k < out.grads.size(); ++k) out.grads[k].data() += inv_b * r.grads[k].data();
    }
  }
  return out;
}

TrainerState train(std::span<const TrainingSample> samples, const DetectorConfig& detector,
                   const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (samples.empty()) throw ValidationError("train: empty dataset");
  cfg.validate();
  const DetectorConfig resolved = detector.resolved();
  const auto priors = generate_priors<double>(resolved.prior);

  TrainerState state{Network::initialize(resolved.net, cfg.seed), {},
                     PlateauSchedule(cfg.lr, cfg.lr_drop_factor, cfg.plateau_patience, cfg.lr_drops_max),
                     0, {}};
  for (const auto& p : state.net.parameters()) state.velocity.push_back(TensorD::zeros_like(p));

  std::vector<std::size_t> order(samples.size());
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = Rng::substream(cfg.seed, static_cast<std::uint64_t>(epoch));
    shuffle(order.begin(), order.end(), rng);

    EpochLog log;
    log.epoch = epoch;
    log.lr = state.schedule.lr();
    int batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      std::vector<PreparedSample> batch;
      for (std::size_t i = begin; i < end; ++i) {
        batch.push_back(prepare_sample(samples[order[i]], resolved.net, &rng, cfg.augment_prob));
      }
      BatchLoss bl = batch_loss(state.net, priors, batch, cfg);
      if (!std::isfinite(bl.total)) {
        throw TrainingError(epoch, batches + 1, "non-finite loss");
      }
      sgd_step(state.net.parameters(), bl.grads, state.velocity, cfg, state.schedule.lr());
      log.loss += bl.total;
      log.conf += bl.conf;
      log.loc += bl.loc;
      ++batches;
    }
    log.loss /= batches;
    log.conf /= batches;
    log.loc /= batches;
    state.schedule.end_epoch(log.loss);
    state.epoch = epoch;
    state.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return state;
}

}  // namespace skelbox
