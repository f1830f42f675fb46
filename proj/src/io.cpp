// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
#include "skelbox/io.hpp"

#include <png.h>

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "skelbox/config.hpp"

namespace skelbox {

using nlohmann::json;

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open '" + path.string() + "': " + std::strerror(errno));
  return f;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

void write_png(const std::filesystem::path& path, const ActionImage& img) {
  if (img.height <= 0 || img.width <= 0) throw ValidationError("write_png: empty image");
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("write_png: libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("write_png: failed writing '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (Index r = 0; r < img.height; ++r) {
    png_write_row(png, const_cast<png_bytep>(img.pixels.data() + r * img.width * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ActionImage read_png(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("read_png: libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("read_png: failed reading '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_RGB || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("read_png: '" + path.string() + "' is not 8-bit RGB");
  }
  ActionImage img(png_get_image_height(png, info), png_get_image_width(png, info));
  for (Index r = 0; r < img.height; ++r) png_read_row(png, img.pixels.data() + r * img.width * 3, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

std::string image_sidecar_json(const ActionImage& img) {
  json j;
  j["col_to_frame"] = {{"scale", img.col_to_frame.scale}, {"offset", img.col_to_frame.offset}};
  j["persons_encoded"] = img.persons_encoded;
  j["rows_per_person"] = img.rows_per_person;
  j["source_len"] = img.source_len;
  j["height"] = img.height;
  j["width"] = img.width;
  return j.dump(2) + "\n";
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_detections_csv(std::ostream& out, const std::map<std::string, std::vector<Detection>>& dets) {
  out << "video_id,label,start_frame,end_frame,score\n";
  for (const auto& [video, list] : dets) {
    for (const auto& d : list) {
      out << video << ',' << d.label + 1 << ',' << d.start << ',' << d.end << ',' << format_double(d.score) << '\n';
    }
  }
}

std::map<std::string, std::vector<Detection>> parse_detections_csv(std::istream& in) {
  std::map<std::string, std::vector<Detection>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line_no == 1 && line.rfind("video_id", 0) == 0) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 5) throw ParseError(line_no, "expected 5 fields in detections CSV");
    Detection d;
    try {
      std::size_t used = 0;
      d.label = std::stoi(fields[1], &used);
      if (used != fields[1].size()) throw std::invalid_argument("label");
      d.start = std::stoll(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument("start");
      d.end = std::stoll(fields[3], &used);
      if (used != fields[3].size()) throw std::invalid_argument("end");
      d.score = std::stod(fields[4], &used);
      if (used != fields[4].size()) throw std::invalid_argument("score");
    } catch (const std::logic_error&) {
      throw ParseError(line_no, "non-numeric field in detections CSV");
    }
    if (d.label < 1) throw ParseError(line_no, "class labels are 1-based, got " + std::to_string(d.label));
    --d.label;
    if (d.start >= d.end) throw ParseError(line_no, "detection start must be < end");
    if (!(d.score >= 0 && d.score <= 1)) throw ParseError(line_no, "detection score outside [0, 1]");
    out[fields[0]].push_back(d);
  }
  return out;
}

void write_loss_log_csv(std::ostream& out, const std::vector<EpochLog>& log) {
  out << "epoch,lr,loss,conf,loc\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << format_double(e.lr) << ',' << format_double(e.loss) << ','
        << format_double(e.conf) << ',' << format_double(e.loc) << '\n';
  }
}

namespace {

constexpr char kMagic[8] = {'S', 'K', 'B', 'X', 'C', 'K', 'P', 'T'};

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw IoError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

void put_tensor(std::ostream& out, const TensorD& t) {
  for (Index i = 0; i < t.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(t[i]));
}

TensorD get_tensor(std::istream& in, const Shape& shape) {
  TensorD t(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = std::bit_cast<double>(get_u64(in));
  return t;
}

}  // namespace

Checkpoint checkpoint_from_header(const nlohmann::json& header, std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json header;
  header["net"] = net_config_to_json(ckpt.detector.net);
  header["prior"] = prior_config_to_json(ckpt.detector.prior);
  header["train"] = train_config_to_json(ckpt.train);
  header["encode_mode"] = encode_mode_name(ckpt.encode_mode);
  if (ckpt.stats) header["stats"] = {{"c_min", ckpt.stats->c_min}, {"c_max", ckpt.stats->c_max}};
  const auto& s = ckpt.state.schedule;
  header["epoch"] = ckpt.state.epoch;
  header["schedule"] = {{"lr", s.lr()}, {"drops", s.drops()}, {"best", s.best()},
                        {"stale", s.stale_epochs()}, {"has_best", s.has_best()}};
  json log = json::array();
  for (const auto& e : ckpt.state.log) {
    log.push_back({{"epoch", e.epoch}, {"lr", e.lr}, {"loss", e.loss}, {"conf", e.conf}, {"loc", e.loc}});
  }
  header["log"] = log;
  json shapes = json::array();
  for (const auto& p : ckpt.state.net.parameters()) shapes.push_back(p.shape());
  header["tensors"] = shapes;
  const std::string text = header.dump();

  std::ostringstream out(std::ios::binary);
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t version = kCheckpointVersion;
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((version >> (8 * i)) & 0xFF));
  put_u64(out, text.size());
  out << text;
  for (const auto& p : ckpt.state.net.parameters()) put_tensor(out, p);
  for (const auto& v : ckpt.state.velocity) put_tensor(out, v);
  write_text_file(path, out.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path), std::ios::binary);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw IoError("'" + path.string() + "' is not a checkpoint");
  unsigned char vb[4];
  in.read(reinterpret_cast<char*>(vb), 4);
  const std::uint32_t version = vb[0] | (vb[1] << 8) | (vb[2] << 16) | (std::uint32_t(vb[3]) << 24);
  if (!in || version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto len = get_u64(in);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError("checkpoint truncated");
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }

  try {
    return checkpoint_from_header(header, in);
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed checkpoint header: ") + e.what());
  }
}

Checkpoint checkpoint_from_header(const nlohmann::json& header, std::istream& in) {
  PriorConfig prior = prior_config_from_json(header.at("prior"));
  NetConfig net = net_config_from_json(header.at("net"), static_cast<Index>(prior.aspect_ratios.size()));
  Checkpoint ckpt{DetectorConfig{net, prior}, train_config_from_json(header.at("train")),
                  parse_encode_mode(header.at("encode_mode").get<std::string>()),
                  std::nullopt,
                  TrainerState{Network(net), {}, PlateauSchedule(1, 10, 1, 0), 0, {}}};
  if (header.contains("stats")) {
    ckpt.stats = DatasetStats{header["stats"].at("c_min").get<double>(), header["stats"].at("c_max").get<double>()};
  }
  auto& state = ckpt.state;
  state.epoch = header.at("epoch").get<int>();
  const auto& s = header.at("schedule");
  state.schedule = PlateauSchedule(ckpt.train.lr, ckpt.train.lr_drop_factor, ckpt.train.plateau_patience,
                                   ckpt.train.lr_drops_max);
  state.schedule.restore(s.at("lr").get<double>(), s.at("drops").get<int>(), s.at("best").get<double>(),
                         s.at("stale").get<int>(), s.at("has_best").get<bool>());
  for (const auto& e : header.at("log")) {
    state.log.push_back({e.at("epoch").get<int>(), e.at("lr").get<double>(), e.at("loss").get<double>(),
                         e.at("conf").get<double>(), e.at("loc").get<double>()});
  }
  const auto shapes = header.at("tensors").get<std::vector<Shape>>();
  auto& params = state.net.parameters();
  if (shapes.size() != params.size()) throw IoError("checkpoint tensor count does not match its net config");
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (shapes[i] != params[i].shape()) throw IoError("checkpoint tensor shape does not match its net config");
    params[i] = get_tensor(in, shapes[i]);
  }
  for (const auto& shape : shapes) state.velocity.push_back(get_tensor(in, shape));
  if (in.peek() != std::char_traits<char>::eof()) throw IoError("checkpoint has trailing bytes");
  return ckpt;
}

}  // namespace skelbox
