// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
#include "skelbox/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>

namespace skelbox {

namespace {

std::vector<fs::path> sorted_txt_files(const fs::path& dir) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  if (ec) throw IoError("cannot list '" + dir.string() + "': " + ec.message());
  std::sort(files.begin(), files.end());
  return files;
}

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::vector<LabeledSequence> load_dataset(const fs::path& dir, bool require_labels) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory '" + dir.string() + "' does not exist");
  const fs::path skel_dir = fs::is_directory(dir / "skeleton") ? dir / "skeleton" : dir;
  const fs::path label_dir = dir / "label";
  std::vector<LabeledSequence> out;
  for (const auto& file : sorted_txt_files(skel_dir)) {
    LabeledSequence item;
    const std::string id = file.stem().string();
    std::istringstream text(read_text_file(file));
    item.sequence = parse_skeleton_file(text, id);
    const fs::path label_file = label_dir / file.filename();
    if (fs::exists(label_file)) {
      std::istringstream labels(read_text_file(label_file));
      item.segments = parse_label_file(labels);
      validate_segments(item.segments, item.sequence.length());
    } else if (require_labels) {
      throw IoError("missing label file '" + label_file.string() + "'");
    }
    out.push_back(std::move(item));
  }
  if (out.empty()) throw IoError("no skeleton files in '" + skel_dir.string() + "'");
  return out;
}

void write_dataset(const fs::path& dir, std::span<const LabeledSequence> data) {
  std::error_code ec;
  fs::create_directories(dir / "skeleton", ec);
  fs::create_directories(dir / "label", ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  for (const auto& item : data) {
    std::ostringstream skel, labels;
    write_skeleton_file(skel, item.sequence);
    write_label_file(labels, item.segments);
    write_text_file(dir / "skeleton" / (item.sequence.source_id + ".txt"), skel.str());
    write_text_file(dir / "label" / (item.sequence.source_id + ".txt"), labels.str());
  }
}

std::map<std::string, std::vector<GroundTruthSegment>> load_labels(const fs::path& dir) {
  const fs::path label_dir = fs::is_directory(dir / "label") ? dir / "label" : dir;
  if (!fs::is_directory(label_dir)) throw IoError("label directory '" + dir.string() + "' does not exist");
  std::map<std::string, std::vector<GroundTruthSegment>> out;
  for (const auto& file : sorted_txt_files(label_dir)) {
    std::istringstream text(read_text_file(file));
    out[file.stem().string()] = parse_label_file(text);
  }
  return out;
}

ActionImage encode_sequence(const SkeletonSequence& seq, EncodeMode mode, const std::optional<DatasetStats>& stats) {
  const auto& order = JointOrder::kinect_v2();
  if (mode == EncodeMode::kInvariant) return encode_invariant(seq, order);
  if (!stats) throw ValidationError("global encoding needs dataset statistics");
  return encode_global(seq, order, *stats);
}

void run_synth(const RunConfig& cfg, const fs::path& out) {
  SynthConfig train = cfg.synth;
  write_dataset(out / "train", generate_synthetic(train));
  if (cfg.num_test_sequences > 0) {
    SynthConfig test = cfg.synth;
    test.num_sequences = cfg.num_test_sequences;
    test.first_index = static_cast<std::uint64_t>(cfg.synth.num_sequences);
    write_dataset(out / "test", generate_synthetic(test));
  }
}

namespace {

std::optional<DatasetStats> stats_for(std::span<const LabeledSequence> data, EncodeMode mode,
                                      std::optional<DatasetStats> given) {
  if (mode != EncodeMode::kGlobal || given) return given;
  std::vector<SkeletonSequence> seqs;
  for (const auto& d : data) seqs.push_back(d.sequence);
  return compute_dataset_stats(seqs);
}

}  // namespace

void run_encode(std::span<const LabeledSequence> data, const fs::path& out, const RunConfig& cfg,
                std::optional<DatasetStats> stats, int jobs) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create '" + out.string() + "': " + ec.message());
  stats = stats_for(data, cfg.encode.mode, stats);
  parallel_for(data.size(), jobs, [&](std::size_t i) {
    const auto& seq = data[i].sequence;
    ActionImage img = encode_sequence(seq, cfg.encode.mode, stats);
    if (cfg.encode.width > 0) img = resample_width(img, cfg.encode.width);
    write_png(out / (seq.source_id + ".png"), img);
    write_text_file(out / (seq.source_id + ".json"), image_sidecar_json(img));
  });
}

Checkpoint run_train(std::span<const LabeledSequence> data, const RunConfig& cfg, const EpochCallback& on_epoch) {
  const auto stats = stats_for(data, cfg.encode.mode, std::nullopt);
  std::vector<TrainingSample> samples(data.size());
  parallel_for(data.size(), cfg.train.jobs, [&](std::size_t i) {
    samples[i] = {encode_sequence(data[i].sequence, cfg.encode.mode, stats), data[i].segments};
  });
  TrainerState state = train(samples, cfg.detector, cfg.train, on_epoch);
  return Checkpoint{cfg.detector, cfg.train, cfg.encode.mode, stats, std::move(state)};
}

std::map<std::string, std::vector<Detection>> run_detect(const Checkpoint& ckpt, std::span<const LabeledSequence> data,
                                                         const InferenceConfig& inference, int jobs) {
  const auto resolved = ckpt.detector.resolved();
  const auto priors = generate_priors<double>(resolved.prior);
  std::vector<std::vector<Detection>> results(data.size());
  parallel_for(data.size(), jobs, [&](std::size_t i) {
    const ActionImage img = encode_sequence(data[i].sequence, ckpt.encode_mode, ckpt.stats);
    results[i] = detect(ckpt.state.net, priors, img, inference);
  });
  std::map<std::string, std::vector<Detection>> out;
  for (std::size_t i = 0; i < data.size(); ++i) out[data[i].sequence.source_id] = std::move(results[i]);
  return out;
}

std::string format_eval_csv(const EvalTable& table) {
  std::ostringstream out;
  out << "class";
  for (double t : table.thetas) out << ",ap@" << shortest(t);
  out << '\n';
  for (std::size_t i = 0; i < table.classes.size(); ++i) {
    out << table.classes[i] + 1;
    for (double ap : table.class_ap[i]) out << ',' << shortest(ap);
    out << '\n';
  }
  out << "mAP";
  for (double m : table.map) out << ',' << shortest(m);
  out << '\n';
  return out.str();
}

std::string format_eval_text(const EvalTable& table) {
  std::ostringstream out;
  char buf[64];
  out << "class ";
  for (double t : table.thetas) {
    std::snprintf(buf, sizeof(buf), " %9s", ("AP@" + shortest(t)).c_str());
    out << buf;
  }
  out << '\n';
  for (std::size_t i = 0; i < table.classes.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%-6d", table.classes[i] + 1);
    out << buf;
    for (double ap : table.class_ap[i]) {
      std::snprintf(buf, sizeof(buf), " %8.4f", ap);
      out << buf;
    }
    out << '\n';
  }
  out << "mAP   ";
  for (double m : table.map) {
    std::snprintf(buf, sizeof(buf), " %8.4f", m);
    out << buf;
  }
  out << '\n';
  return out.str();
}

}  // namespace skelbox
