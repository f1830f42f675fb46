// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "skelbox/encoding.hpp"
#include "skelbox/network.hpp"
#include "skelbox/postprocess.hpp"

namespace skelbox {

/// 8-bit RGB PNG, no ancillary chunks (output depends only on pixels).
void write_png(const std::filesystem::path& path, const ActionImage& img);
/// Pixels only; metadata fields are left at their defaults beyond height/width.
ActionImage read_png(const std::filesystem::path& path);

/// Sidecar for an encoded image: col_to_frame, persons_encoded, source_len.
std::string image_sidecar_json(const ActionImage& img);

/// Whole-file helpers throwing IoError.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// "video_id,label,start_frame,end_frame,score" with a header line. Labels are
/// 1-based on disk, like label files.
void write_detections_csv(std::ostream& out, const std::map<std::string, std::vector<Detection>>& dets);
std::map<std::string, std::vector<Detection>> parse_detections_csv(std::istream& in);

void write_loss_log_csv(std::ostream& out, const std::vector<EpochLog>& log);

enum class EncodeMode { kInvariant, kGlobal };

struct Checkpoint {
  DetectorConfig detector;
  TrainConfig train;
  EncodeMode encode_mode = EncodeMode::kInvariant;
  std::optional<DatasetStats> stats;  // required for kGlobal
  TrainerState state;
};

/// Binary container: magic "SKBXCKPT", u32 version, u64 header length, JSON
/// header (configs, schedule, epoch, log, tensor shapes), then every parameter
/// followed by every velocity tensor as little-endian IEEE-754 doubles.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace skelbox
