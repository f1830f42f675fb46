// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "json.hpp"

#include "skelbox/io.hpp"
#include "skelbox/network.hpp"
#include "skelbox/postprocess.hpp"
#include "skelbox/skeleton.hpp"

namespace skelbox {

struct EncodeConfig {
  EncodeMode mode = EncodeMode::kInvariant;
  /// Output width for the `encode` command; 0 keeps one column per frame.
  Index width = 512;
};

/// Everything a run needs, loadable from one JSON document with sections
/// "synth", "encode", "prior", "net", "train", "inference".
struct RunConfig {
  SynthConfig synth;
  int num_test_sequences = 0;
  EncodeConfig encode;
  DetectorConfig detector;
  TrainConfig train;
  InferenceConfig inference;

  RunConfig();
};

/// Unknown keys are rejected with ConfigError. Missing keys keep defaults.
/// The "net" section is either a full layer list or {"preset": "tiny" |
/// "vgg16", "input_cols", "widths", "num_action_classes"}.
RunConfig parse_run_config(const std::string& json_text);
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);
std::string dump_run_config(const RunConfig& cfg);

nlohmann::json net_config_to_json(const NetConfig& cfg);
NetConfig net_config_from_json(const nlohmann::json& j, Index anchors_per_cell);
nlohmann::json prior_config_to_json(const PriorConfig& cfg);
PriorConfig prior_config_from_json(const nlohmann::json& j, PriorConfig base = {});
nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

std::string encode_mode_name(EncodeMode mode);
EncodeMode parse_encode_mode(const std::string& name);

}  // namespace skelbox
