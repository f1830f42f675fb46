// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
#include "skelbox/config.hpp"

#include <set>

namespace skelbox {

using nlohmann::json;

namespace {

/// Reads keys from one JSON object and rejects any it was not asked for.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config " + name_ + "." + key + ": " + e.what());
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& at(const char* key) {
    used_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!used_.count(key)) throw ConfigError("unknown config key '" + name_ + "." + key + "'");
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> used_;
};

json extent_json(Extent2 e) { return json::array({e.rows, e.cols}); }

Extent2 extent_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(where + " must be a [rows, cols] pair");
  return {j[0].get<Index>(), j[1].get<Index>()};
}

}  // namespace

std::string encode_mode_name(EncodeMode mode) { return mode == EncodeMode::kGlobal ? "global" : "invariant"; }

EncodeMode parse_encode_mode(const std::string& name) {
  if (name == "invariant") return EncodeMode::kInvariant;
  if (name == "global") return EncodeMode::kGlobal;
  throw ConfigError("unknown encode mode '" + name + "' (expected invariant or global)");
}

json net_config_to_json(const NetConfig& cfg) {
  json layers = json::array();
  for (const auto& l : cfg.backbone) {
    json layer;
    layer["kind"] = l.kind == LayerKind::kConv ? "conv" : "maxpool";
    layer["kernel"] = extent_json(l.kernel);
    layer["stride"] = extent_json(l.stride);
    if (l.kind == LayerKind::kConv) {
      layer["channels"] = l.channels;
      layer["pad"] = extent_json(l.pad);
      layer["relu"] = l.relu;
    }
    layers.push_back(layer);
  }
  return {{"input_rows", cfg.input_rows},
          {"input_cols", cfg.input_cols},
          {"input_channels", cfg.input_channels},
          {"num_classes", cfg.num_classes},
          {"anchors_per_cell", cfg.anchors_per_cell},
          {"detection_kernel", extent_json(cfg.detection_kernel)},
          {"backbone", layers},
          {"head_layers", cfg.head_layers}};
}

NetConfig net_config_from_json(const json& j, Index anchors_per_cell) {
  Section s(j, "net");
  NetConfig cfg;
  if (s.has("preset")) {
    std::string preset;
    Index input_cols = 512;
    Index action_classes = 3;
    std::vector<Index> widths{16, 32, 64, 64, 64};
    s.read("preset", preset);
    s.read("input_cols", input_cols);
    s.read("num_action_classes", action_classes);
    if (preset == "tiny") {
      s.read("widths", widths);
      cfg = tiny_skeleton_net(action_classes, anchors_per_cell, input_cols, widths);
    } else if (preset == "vgg16") {
      cfg = vgg16_skeleton_net(action_classes, anchors_per_cell, input_cols);
    } else {
      throw ConfigError("unknown net preset '" + preset + "'");
    }
    s.finish();
    cfg.validate();
    return cfg;
  }
  cfg = tiny_skeleton_net(3, anchors_per_cell);
  s.read("input_rows", cfg.input_rows);
  s.read("input_cols", cfg.input_cols);
  s.read("input_channels", cfg.input_channels);
  s.read("num_classes", cfg.num_classes);
  s.read("anchors_per_cell", cfg.anchors_per_cell);
  if (s.has("detection_kernel")) cfg.detection_kernel = extent_from(s.at("detection_kernel"), "net.detection_kernel");
  s.read("head_layers", cfg.head_layers);
  if (s.has("backbone")) {
    cfg.backbone.clear();
    for (const auto& lj : s.at("backbone")) {
      Section ls(lj, "net.backbone[]");
      std::string kind = "conv";
      ls.read("kind", kind);
      LayerSpec layer;
      if (kind == "conv") {
        layer.kind = LayerKind::kConv;
      } else if (kind == "maxpool") {
        layer = LayerSpec::pool({1, 2}, {1, 2});
      } else {
        throw ConfigError("unknown layer kind '" + kind + "'");
      }
      if (ls.has("kernel")) layer.kernel = extent_from(ls.at("kernel"), "layer kernel");
      if (ls.has("stride")) layer.stride = extent_from(ls.at("stride"), "layer stride");
      if (layer.kind == LayerKind::kConv) {
        if (ls.has("pad")) layer.pad = extent_from(ls.at("pad"), "layer pad");
        ls.read("channels", layer.channels);
        ls.read("relu", layer.relu);
      }
      ls.finish();
      cfg.backbone.push_back(layer);
    }
  }
  s.finish();
  cfg.validate();
  return cfg;
}

json prior_config_to_json(const PriorConfig& cfg) {
  return {{"aspect_ratios", cfg.aspect_ratios}, {"layer_scales", cfg.layer_scales}};
}

PriorConfig prior_config_from_json(const json& j, PriorConfig cfg) {
  Section s(j, "prior");
  s.read("aspect_ratios", cfg.aspect_ratios);
  s.read("layer_scales", cfg.layer_scales);
  s.finish();
  return cfg;
}

json train_config_to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"momentum", c.momentum},
          {"weight_decay", c.weight_decay},
          {"batch_size", c.batch_size},
          {"lr_drop_factor", c.lr_drop_factor},
          {"lr_drops_max", c.lr_drops_max},
          {"plateau_patience", c.plateau_patience},
          {"max_epochs", c.max_epochs},
          {"seed", c.seed},
          {"augment_prob", c.augment_prob},
          {"match_threshold", c.match_threshold},
          {"neg_ratio", c.neg_ratio},
          {"alpha", c.alpha},
          {"jobs", c.jobs}};
}

TrainConfig train_config_from_json(const json& j) {
  Section s(j, "train");
  TrainConfig c;
  s.read("lr", c.lr);
  s.read("momentum", c.momentum);
  s.read("weight_decay", c.weight_decay);
  s.read("batch_size", c.batch_size);
  s.read("lr_drop_factor", c.lr_drop_factor);
  s.read("lr_drops_max", c.lr_drops_max);
  s.read("plateau_patience", c.plateau_patience);
  s.read("max_epochs", c.max_epochs);
  s.read("seed", c.seed);
  s.read("augment_prob", c.augment_prob);
  s.read("match_threshold", c.match_threshold);
  s.read("neg_ratio", c.neg_ratio);
  s.read("alpha", c.alpha);
  s.read("jobs", c.jobs);
  s.finish();
  c.validate();
  return c;
}

RunConfig::RunConfig() {
  detector.net = tiny_skeleton_net(synth.num_classes, static_cast<Index>(detector.prior.aspect_ratios.size()));
  // Five heads; the 0.1 scale is dropped since full-height segment boxes
  // cannot reach the matching threshold against priors that short.
  detector.prior.layer_scales = {0.2, 0.375, 0.55, 0.725, 0.9};
}

json to_json(const RunConfig& cfg) {
  const auto& sy = cfg.synth;
  json j;
  j["synth"] = {{"num_classes", sy.num_classes},
                {"num_sequences", sy.num_sequences},
                {"num_test_sequences", cfg.num_test_sequences},
                {"seq_len_range", {sy.seq_len_range.first, sy.seq_len_range.second}},
                {"segment_len_range", {sy.segment_len_range.first, sy.segment_len_range.second}},
                {"noise_amplitude", sy.noise_amplitude},
                {"seed", sy.seed}};
  j["encode"] = {{"mode", encode_mode_name(cfg.encode.mode)}, {"width", cfg.encode.width}};
  j["prior"] = prior_config_to_json(cfg.detector.prior);
  j["net"] = net_config_to_json(cfg.detector.net);
  j["train"] = train_config_to_json(cfg.train);
  j["inference"] = {{"conf_threshold", cfg.inference.conf_threshold},
                    {"top_k", cfg.inference.top_k},
                    {"nms_iou", cfg.inference.nms_iou}};
  return j;
}

std::string dump_run_config(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  Section root(j, "<root>");
  if (root.has("synth")) {
    Section s(root.at("synth"), "synth");
    s.read("num_classes", cfg.synth.num_classes);
    s.read("num_sequences", cfg.synth.num_sequences);
    s.read("num_test_sequences", cfg.num_test_sequences);
    s.read("seq_len_range", cfg.synth.seq_len_range);
    s.read("segment_len_range", cfg.synth.segment_len_range);
    s.read("noise_amplitude", cfg.synth.noise_amplitude);
    s.read("seed", cfg.synth.seed);
    s.finish();
    cfg.synth.validate();
    if (cfg.num_test_sequences < 0) throw ConfigError("synth.num_test_sequences must be >= 0");
  }
  if (root.has("encode")) {
    Section s(root.at("encode"), "encode");
    std::string mode = encode_mode_name(cfg.encode.mode);
    s.read("mode", mode);
    cfg.encode.mode = parse_encode_mode(mode);
    s.read("width", cfg.encode.width);
    s.finish();
    if (cfg.encode.width < 0) throw ConfigError("encode.width must be >= 0");
  }
  if (root.has("prior")) cfg.detector.prior = prior_config_from_json(root.at("prior"), cfg.detector.prior);
  const auto anchors = static_cast<Index>(cfg.detector.prior.aspect_ratios.size());
  if (root.has("net")) {
    cfg.detector.net = net_config_from_json(root.at("net"), anchors);
  } else {
    cfg.detector.net = tiny_skeleton_net(cfg.synth.num_classes, anchors);
  }
  if (root.has("train")) cfg.train = train_config_from_json(root.at("train"));
  if (root.has("inference")) {
    Section s(root.at("inference"), "inference");
    s.read("conf_threshold", cfg.inference.conf_threshold);
    s.read("top_k", cfg.inference.top_k);
    s.read("nms_iou", cfg.inference.nms_iou);
    s.finish();
  }
  root.finish();
  cfg.detector.resolved();  // validates net/prior consistency
  return cfg;
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace skelbox
