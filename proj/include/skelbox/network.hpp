// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "skelbox/encoding.hpp"
#include "skelbox/geometry.hpp"
#include "skelbox/loss.hpp"
#include "skelbox/nn.hpp"
#include "skelbox/rng.hpp"
#include "skelbox/skeleton.hpp"
#include "skelbox/tensor.hpp"

namespace skelbox {

enum class LayerKind { kConv, kMaxPool };

struct LayerSpec {
  LayerKind kind = LayerKind::kConv;
  Extent2 kernel{3, 3};
  Index channels = 0;  // conv output channels
  Extent2 stride{1, 1};
  Extent2 pad{1, 1};
  bool relu = true;

  static LayerSpec conv(Index channels, Extent2 kernel = {3, 3}, Extent2 stride = {1, 1},
                        Extent2 pad = {1, 1}) {
    return {LayerKind::kConv, kernel, channels, stride, pad, true};
  }
  static LayerSpec pool(Extent2 window, Extent2 stride) {
    return {LayerKind::kMaxPool, window, 0, stride, {0, 0}, false};
  }
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetConfig {
  Index input_rows = 50;
  Index input_cols = 512;
  Index input_channels = 3;
  std::vector<LayerSpec> backbone;
  /// Backbone layer indices whose (post-activation) outputs feed a head.
  std::vector<int> head_layers;
  /// Action classes + 1 background slot.
  Index num_classes = 4;
  Index anchors_per_cell = 9;
  Extent2 detection_kernel{5, 1};

  /// Output shape [rows, cols, channels] of every backbone layer.
  std::vector<Shape> layer_shapes() const;
  std::vector<FeatureMapShape> head_shapes() const;
  Extent2 detection_pad() const { return {detection_kernel.rows / 2, detection_kernel.cols / 2}; }
  void validate() const;
  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// Five 3x3 conv + relu blocks; 1x2 column pooling after blocks 2, 3 and 4;
/// two extra stride-2 convs. Heads sit on blocks 3, 4, 5 and both extras.
NetConfig tiny_skeleton_net(Index num_action_classes, Index anchors_per_cell, Index input_cols = 512,
                            std::vector<Index> widths = {16, 32, 64, 64, 64});

/// VGG-16 through conv4_3, fc6/fc7 as convs, conv8-conv11. Column-only
/// pooling to preserve joint rows. Provided for reference, far beyond CPU scale.
NetConfig vgg16_skeleton_net(Index num_action_classes, Index anchors_per_cell, Index input_cols = 512);

/// Network + default boxes. prior.feature_map_shapes is derived from the
/// network by `resolved()`.
struct DetectorConfig {
  NetConfig net;
  PriorConfig prior;

  DetectorConfig resolved() const;
};

/// Per-head prediction maps.
struct HeadOutput {
  TensorD loc;   // [rows, cols, anchors * 4]
  TensorD conf;  // [rows, cols, anchors * num_classes]
};

/// Head predictions concatenated in prior order.
struct Predictions {
  RowMatrix<double> loc;   // num_priors x 4
  RowMatrix<double> conf;  // num_priors x num_classes
};

Predictions flatten(std::span<const HeadOutput> heads, Index num_classes);

class Network {
 public:
  /// All parameters zero.
  explicit Network(NetConfig config);
  /// He-uniform backbone weights from `seed`; loc heads zero; conf heads zero
  /// with background bias +2.
  static Network initialize(NetConfig config, std::uint64_t seed);

  const NetConfig& config() const noexcept { return config_; }
  std::vector<TensorD>& parameters() noexcept { return params_; }
  const std::vector<TensorD>& parameters() const noexcept { return params_; }

  struct Trace {
    std::vector<TensorD> activations;  // [0] = input, [i + 1] = output of backbone layer i
    std::vector<HeadOutput> heads;
  };

  std::vector<HeadOutput> forward(const TensorD& input) const;
  Trace forward_trace(const TensorD& input) const;
  /// Gradients for every parameter, given gradients on the flattened predictions.
  std::vector<TensorD> backward(const Trace& trace, const RowMatrix<double>& grad_loc,
                                const RowMatrix<double>& grad_conf) const;

  friend bool operator==(const Network& a, const Network& b) {
    return a.config_ == b.config_ && a.params_ == b.params_;
  }

 private:
  struct ParamSlots {
    int weight = -1;
    int bias = -1;
  };
  struct HeadSlots {
    int loc_w, loc_b, conf_w, conf_b;
  };
  void build_slots();
  void check_input(const TensorD& input) const;

  NetConfig config_;
  std::vector<TensorD> params_;
  std::vector<ParamSlots> layer_slots_;
  std::vector<HeadSlots> head_slots_;
};

struct TrainConfig {
  double lr = 4e-6;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  int batch_size = 4;
  double lr_drop_factor = 10.0;
  int lr_drops_max = 3;
  int plateau_patience = 1;
  int max_epochs = 30;
  std::uint64_t seed = 42;
  double augment_prob = 0.5;
  double match_threshold = 0.5;
  double neg_ratio = 3.0;
  double alpha = 1.0;
  int jobs = 1;

  void validate() const;
};

/// v <- momentum v - lr (grad + weight_decay param); param <- param + v.
void sgd_step(std::vector<TensorD>& params, const std::vector<TensorD>& grads,
              std::vector<TensorD>& velocity, const TrainConfig& cfg, double current_lr);

/// Divides the learning rate by `factor` whenever the epoch loss has not
/// improved on the best loss for `patience` consecutive epochs, at most
/// `max_drops` times.
class PlateauSchedule {
 public:
  PlateauSchedule(double initial_lr, double factor, int patience, int max_drops)
      : lr_(initial_lr), factor_(factor), patience_(patience), max_drops_(max_drops) {}

  double lr() const noexcept { return lr_; }
  int drops() const noexcept { return drops_; }
  double best() const noexcept { return best_; }
  int stale_epochs() const noexcept { return stale_; }

  void end_epoch(double loss);
  void restore(double lr, int drops, double best, int stale, bool has_best);
  bool has_best() const noexcept { return has_best_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  int max_drops_;
  int drops_ = 0;
  double best_ = 0.0;
  bool has_best_ = false;
  int stale_ = 0;
};

/// One encoded sequence at native width plus its segments.
struct TrainingSample {
  ActionImage image;
  std::vector<GroundTruthSegment> segments;
};

/// Network input and matched-ready targets for one sample.
struct PreparedSample {
  TensorD input;
  std::vector<BoxD> boxes;
  std::vector<int> labels;
  ImageMeta meta;
};

/// Resample to the network width, letter-box to its rows, map segments to
/// boxes. With `rng` and probability `augment_prob`, first crops a random
/// window containing at least one segment center; segments whose center
/// leaves the window are dropped, the rest are clipped.
PreparedSample prepare_sample(const TrainingSample& sample, const NetConfig& net, Rng* rng = nullptr,
                              double augment_prob = 0.0);

struct EpochLog {
  int epoch = 0;  // 1-based
  double lr = 0.0;
  double loss = 0.0;
  double conf = 0.0;
  double loc = 0.0;
};

struct TrainerState {
  Network net;
  std::vector<TensorD> velocity;
  PlateauSchedule schedule;
  int epoch = 0;  // completed epochs
  std::vector<EpochLog> log;
};

struct BatchLoss {
  double total = 0.0;
  double conf = 0.0;
  double loc = 0.0;
  std::vector<TensorD> grads;
};

/// Mean per-image loss and gradients over a batch. Per-sample work may run on
/// `jobs` threads; the reduction is always in sample order.
BatchLoss batch_loss(const Network& net, std::span<const BoxD> priors,
                     std::span<const PreparedSample> batch, const TrainConfig& cfg);

using EpochCallback = std::function<void(const EpochLog&)>;

/// SGD with momentum, weight decay, plateau schedule, seeded shuffling and
/// random-patch augmentation. Pure in (samples, configs).
TrainerState train(std::span<const TrainingSample> samples, const DetectorConfig& detector,
                   const TrainConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace skelbox
