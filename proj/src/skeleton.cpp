// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
#include "skelbox/skeleton.hpp"

#include <charconv>
#include <cstdio>
#include <cmath>
#include <numbers>
#include <string_view>

#include "skelbox/error.hpp"
#include "skelbox/rng.hpp"

namespace skelbox {

bool SkeletonSequence::any_present(int slot) const {
  for (const auto& f : frames) {
    if (f.present(slot)) return true;
  }
  return false;
}

namespace {

bool is_blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_number(std::string_view token, T& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && first != last;
}

void append_number(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

SkeletonSequence parse_skeleton_file(std::istream& text, std::string source_id) {
  SkeletonSequence seq;
  seq.source_id = std::move(source_id);
  std::string line;
  std::size_t line_no = 0;
  std::array<double, kValuesPerLine> values{};
  while (std::getline(text, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    std::size_t count = 0;
    std::size_t pos = 0;
    const std::string_view view(line);
    while (true) {
      pos = view.find_first_not_of(" \t\r", pos);
      if (pos == std::string_view::npos) break;
      const auto end = std::min(view.find_first_of(" \t\r", pos), view.size());
      const auto token = view.substr(pos, end - pos);
      if (count >= values.size()) {
        throw ParseError(line_no, "expected " + std::to_string(kValuesPerLine) + " values, found more");
      }
      if (!parse_number(token, values[count]) || !std::isfinite(values[count])) {
        throw ParseError(line_no, "non-numeric token '" + std::string(token) + "'");
      }
      ++count;
      pos = end;
    }
    if (count != values.size()) {
      throw ParseError(line_no, "expected " + std::to_string(kValuesPerLine) + " values, found " +
                                    std::to_string(count));
    }
    Frame frame;
    for (int p = 0; p < kPersonSlots; ++p) {
      const double* block = values.data() + p * kJointsPerPerson * 3;
      bool all_zero = true;
      for (int i = 0; i < kJointsPerPerson * 3; ++i) all_zero = all_zero && block[i] == 0.0;
      if (all_zero) continue;
      frame.persons[static_cast<std::size_t>(p)] = Eigen::Map<const Pose>(block);
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

void write_skeleton_file(std::ostream& out, const SkeletonSequence& seq) {
  std::string line;
  for (const auto& frame : seq.frames) {
    line.clear();
    for (int p = 0; p < kPersonSlots; ++p) {
      const auto& person = frame.persons[static_cast<std::size_t>(p)];
      for (int j = 0; j < kJointsPerPerson; ++j) {
        for (int k = 0; k < 3; ++k) {
          if (!line.empty()) line.push_back(' ');
          append_number(line, person ? (*person)(j, k) : 0.0);
        }
      }
    }
    line.push_back('\n');
    out << line;
  }
}

std::vector<GroundTruthSegment> parse_label_file(std::istream& text) {
  std::vector<GroundTruthSegment> segments;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(text, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    std::array<std::string_view, 4> fields;
    std::size_t n = 0;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      if (n >= fields.size()) throw ParseError(line_no, "expected 4 comma-separated fields");
      fields[n++] = trim(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (n != 4) throw ParseError(line_no, "expected 4 comma-separated fields, found " + std::to_string(n));
    GroundTruthSegment seg;
    int label = 0;
    if (!parse_number(fields[0], label) || !parse_number(fields[1], seg.start) ||
        !parse_number(fields[2], seg.end) || !parse_number(fields[3], seg.confidence)) {
      throw ParseError(line_no, "non-numeric field in '" + line + "'");
    }
    if (label < 1) throw ParseError(line_no, "class labels are 1-based, got " + std::to_string(label));
    seg.label = label - 1;
    if (seg.start < 0 || seg.start >= seg.end) {
      throw ParseError(line_no, "segment start " + std::to_string(seg.start) + " must be >= 0 and < end " +
                                    std::to_string(seg.end));
    }
    segments.push_back(seg);
  }
  return segments;
}

void write_label_file(std::ostream& out, const std::vector<GroundTruthSegment>& segments) {
  for (const auto& s : segments) {
    std::string line = std::to_string(s.label + 1) + "," + std::to_string(s.start) + "," +
                       std::to_string(s.end) + ",";
    append_number(line, s.confidence);
    out << line << '\n';
  }
}

void validate_segments(const std::vector<GroundTruthSegment>& segments, std::size_t length) {
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (s.start < 0 || s.start >= s.end || s.end > static_cast<std::int64_t>(length)) {
      throw ValidationError("segment " + std::to_string(i) + " [" + std::to_string(s.start) + ", " +
                            std::to_string(s.end) + ") outside sequence of length " + std::to_string(length));
    }
  }
}

void SynthConfig::validate() const {
  if (num_classes < 1) throw ConfigError("synth: num_classes must be positive");
  if (num_sequences < 0) throw ConfigError("synth: num_sequences must be >= 0");
  if (seq_len_range.first < 1 || seq_len_range.first > seq_len_range.second) {
    throw ConfigError("synth: invalid seq_len_range");
  }
  if (segment_len_range.first < 1 || segment_len_range.first > segment_len_range.second) {
    throw ConfigError("synth: invalid segment_len_range");
  }
  if (segment_len_range.second > seq_len_range.first) {
    throw ConfigError("synth: segment_len_range max exceeds seq_len_range min");
  }
  if (!(noise_amplitude >= 0)) throw ConfigError("synth: noise_amplitude must be >= 0");
}

const Pose& rest_pose() {
  // Standing, arms at the sides, meters; y up, person facing -z.
  static const Pose pose = [] {
    Pose p;
    auto set = [&p](int j, double x, double y, double z) { p.row(j) << x, y, z; };
    set(kSpineBase, 0.00, 0.95, 0.00);
    set(kSpineMid, 0.00, 1.20, 0.00);
    set(kNeck, 0.00, 1.50, 0.00);
    set(kHead, 0.00, 1.65, 0.00);
    set(kShoulderLeft, -0.18, 1.42, 0.00);
    set(kElbowLeft, -0.25, 1.15, 0.00);
    set(kWristLeft, -0.28, 0.92, 0.00);
    set(kHandLeft, -0.29, 0.85, 0.00);
    set(kShoulderRight, 0.18, 1.42, 0.00);
    set(kElbowRight, 0.25, 1.15, 0.00);
    set(kWristRight, 0.28, 0.92, 0.00);
    set(kHandRight, 0.29, 0.85, 0.00);
    set(kHipLeft, -0.10, 0.92, 0.00);
    set(kKneeLeft, -0.11, 0.52, 0.02);
    set(kAnkleLeft, -0.12, 0.10, 0.00);
    set(kFootLeft, -0.12, 0.04, -0.10);
    set(kHipRight, 0.10, 0.92, 0.00);
    set(kKneeRight, 0.11, 0.52, 0.02);
    set(kAnkleRight, 0.12, 0.10, 0.00);
    set(kFootRight, 0.12, 0.04, -0.10);
    set(kSpineShoulder, 0.00, 1.42, 0.00);
    set(kHandTipLeft, -0.30, 0.78, 0.00);
    set(kThumbLeft, -0.26, 0.84, -0.03);
    set(kHandTipRight, 0.30, 0.78, 0.00);
    set(kThumbRight, 0.26, 0.84, -0.03);
    return p;
  }();
  return pose;
}

ClassMotion class_motion(int label) {
  // Every class moves the right leg (so it shows near the vertical center of
  // a letter-boxed image) plus one more chain; axis and period vary by class.
  static const std::vector<int> kRightLeg = {kHipRight, kKneeRight, kAnkleRight, kFootRight};
  static const std::array<std::vector<int>, 4> kExtra = {
      std::vector<int>{kShoulderLeft, kElbowLeft, kWristLeft, kHandLeft, kHandTipLeft, kThumbLeft},
      std::vector<int>{kShoulderRight, kElbowRight, kWristRight, kHandRight, kHandTipRight, kThumbRight},
      std::vector<int>{kHipLeft, kKneeLeft, kAnkleLeft, kFootLeft},
      std::vector<int>{kSpineMid, kSpineShoulder, kNeck, kHead},
  };
  ClassMotion m;
  m.joints = kRightLeg;
  const auto& extra = kExtra[static_cast<std::size_t>(label % 4)];
  m.joints.insert(m.joints.end(), extra.begin(), extra.end());
  m.axis = label % 3;
  m.period_frames = 16.0 + 8.0 * (label % 5);
  m.phase = (label / 12) * 0.5 * std::numbers::pi;
  return m;
}

namespace {

constexpr double kMotionAmplitude = 0.2;

void apply_motion(Pose& pose, const ClassMotion& motion, std::int64_t t, double scale) {
  const double angle = 2.0 * std::numbers::pi * double(t) / motion.period_frames + motion.phase;
  const double s = std::sin(angle);
  // Joints of a chain move more the further they are from its root.
  std::size_t chain_pos = 0;
  for (std::size_t i = 0; i < motion.joints.size(); ++i) {
    chain_pos = i < 4 ? i : i - 4;
    const double weight = 0.4 + 0.6 * double(chain_pos + 1) / 6.0;
    pose(motion.joints[i], motion.axis) += scale * kMotionAmplitude * weight * s;
  }
}

LabeledSequence generate_one(const SynthConfig& cfg, std::uint64_t index) {
  Rng rng = Rng::substream(cfg.seed, index);
  LabeledSequence out;
  const auto len = rng.uniform_int(cfg.seq_len_range.first, cfg.seq_len_range.second);

  const auto count = rng.uniform_int(1, 3);
  std::vector<std::int64_t> lengths;
  std::int64_t total = 0;
  for (std::int64_t i = 0; i < count; ++i) {
    const auto l = rng.uniform_int(cfg.segment_len_range.first, cfg.segment_len_range.second);
    if (total + l > len) break;
    lengths.push_back(l);
    total += l;
  }
  std::vector<std::int64_t> cuts;
  for (std::size_t i = 0; i < lengths.size(); ++i) cuts.push_back(rng.uniform_int(0, len - total));
  std::sort(cuts.begin(), cuts.end());
  std::int64_t cursor = 0;
  std::int64_t prev_cut = 0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    cursor += cuts[i] - prev_cut;
    prev_cut = cuts[i];
    GroundTruthSegment seg;
    seg.label = static_cast<int>(rng.uniform_int(0, cfg.num_classes - 1));
    seg.start = cursor;
    seg.end = cursor + lengths[i];
    seg.confidence = 1.0;
    out.segments.push_back(seg);
    cursor = seg.end;
  }

  const double scale = rng.uniform(0.85, 1.15);
  const Eigen::RowVector3d shift(rng.uniform(-1.0, 1.0), rng.uniform(-1.2, -0.6), rng.uniform(2.0, 4.0));
  char id[32];
  std::snprintf(id, sizeof(id), "synth%05llu", static_cast<unsigned long long>(index));
  out.sequence.source_id = id;
  out.sequence.frames.resize(static_cast<std::size_t>(len));
  std::size_t next_seg = 0;
  for (std::int64_t t = 0; t < len; ++t) {
    Pose pose = rest_pose();
    while (next_seg < out.segments.size() && out.segments[next_seg].end <= t) ++next_seg;
    if (next_seg < out.segments.size() && out.segments[next_seg].start <= t) {
      const auto& seg = out.segments[next_seg];
      apply_motion(pose, class_motion(seg.label), t - seg.start, 1.0);
    }
    pose *= scale;
    pose.rowwise() += shift;
    for (Eigen::Index i = 0; i < pose.size(); ++i) {
      pose.data()[i] += rng.uniform(-cfg.noise_amplitude, cfg.noise_amplitude);
    }
    out.sequence.frames[static_cast<std::size_t>(t)].persons[0] = pose;
  }
  return out;
}

}  // namespace

std::vector<LabeledSequence> generate_synthetic(const SynthConfig& config) {
  config.validate();
  std::vector<LabeledSequence> out;
  out.reserve(static_cast<std::size_t>(config.num_sequences));
  for (int i = 0; i < config.num_sequences; ++i) {
    out.push_back(generate_one(config, config.first_index + static_cast<std::uint64_t>(i)));
  }
  return out;
}

}  // namespace skelbox
