// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
// Drives the skelbox executable end to end on tiny inputs.
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "skelbox/io.hpp"
#include "skelbox/pipeline.hpp"

using namespace skelbox;
namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "skelbox_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args, const std::string& stdout_file = "") {
  std::string cmd = std::string(SKELBOX_CLI) + " " + args;
  cmd += stdout_file.empty() ? " > /dev/null" : " > '" + (work_dir() / stdout_file).string() + "'";
  cmd += " 2> '" + (work_dir() / "stderr.txt").string() + "'";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string path(const std::string& name) { return "'" + (work_dir() / name).string() + "'"; }
std::string slurp(const std::string& name) { return read_text_file(work_dir() / name); }

void ensure_dataset() {
  static bool done = false;
  if (done) return;
  REQUIRE(run("synth -o " + path("data") + " --num-classes 3 --num-sequences 6 --num-test 3 --seed 4") == 0);
  done = true;
}

}  // namespace

TEST_CASE("synth writes train and test splits") {
  ensure_dataset();
  CHECK(fs::exists(work_dir() / "data/train/skeleton/synth00000.txt"));
  CHECK(fs::exists(work_dir() / "data/train/label/synth00005.txt"));
  CHECK(fs::exists(work_dir() / "data/test/skeleton/synth00006.txt"));
  CHECK_FALSE(fs::exists(work_dir() / "data/train/skeleton/synth00006.txt"));
  CHECK(load_dataset(work_dir() / "data/train", true).size() == 6);
}

TEST_CASE("eval scores ground truth as perfect") {
  ensure_dataset();
  std::map<std::string, std::vector<Detection>> dets;
  for (const auto& [id, segs] : load_labels(work_dir() / "data/test")) {
    for (const auto& s : segs) dets[id].push_back({s.label, 1.0, s.start, s.end});
  }
  std::ofstream(work_dir() / "gt.csv") << [&] {
    std::ostringstream o;
    write_detections_csv(o, dets);
    return o.str();
  }();
  REQUIRE(run("eval --detections " + path("gt.csv") + " -l " + path("data/test") +
                  " --theta 0.1,0.5,0.9 -o " + path("ap.csv"),
              "ap.txt") == 0);
  const auto csv = slurp("ap.csv");
  CHECK(csv.rfind("class,ap@0.1,ap@0.5,ap@0.9\n", 0) == 0);
  CHECK(csv.find("\nmAP,1,1,1\n") != std::string::npos);
  CHECK(slurp("ap.txt").find("mAP      1.0000   1.0000   1.0000") != std::string::npos);
}

TEST_CASE("encode is byte-for-byte reproducible") {
  ensure_dataset();
  REQUIRE(run("encode -i " + path("data/train") + " -o " + path("enc1") + " --width 64") == 0);
  REQUIRE(run("encode -i " + path("data/train") + " -o " + path("enc2") + " --width 64 -j 2") == 0);
  for (const char* f : {"synth00000.png", "synth00000.json", "synth00003.png"}) {
    CHECK(slurp(std::string("enc1/") + f) == slurp(std::string("enc2/") + f));
  }
  const auto img = read_png(work_dir() / "enc1/synth00000.png");
  CHECK(img.width == 64);
  CHECK(img.height == 25);
  REQUIRE(run("encode -i " + path("data/train/skeleton/synth00001.txt") + " -o " + path("enc3") +
              " --mode global --width 0") == 0);
  CHECK(fs::exists(work_dir() / "enc3/synth00001.png"));
}

TEST_CASE("config dump round trips") {
  REQUIRE(run("train -d x -o y --dump-config --epochs 3", "cfg1.json") == 0);
  REQUIRE(run("train -d x -o y --dump-config -c " + path("cfg1.json"), "cfg2.json") == 0);
  CHECK(slurp("cfg1.json") == slurp("cfg2.json"));
  CHECK(slurp("cfg1.json").find("\"max_epochs\": 3") != std::string::npos);
}

TEST_CASE("priors CSV") {
  REQUIRE(run("priors", "priors.csv") == 0);
  std::istringstream in(slurp("priors.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line == "layer,row,col,ratio,cx,cy,w,h");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  DetectorConfig d = RunConfig{}.detector.resolved();
  CHECK(rows == static_cast<std::size_t>(d.prior.count()));
}

TEST_CASE("train and detect on a tiny config") {
  ensure_dataset();
  std::ofstream(work_dir() / "tiny.json")
      << R"({"net": {"preset": "tiny", "input_cols": 32, "widths": [4, 4, 4, 4, 4]},
             "train": {"lr": 0.01, "max_epochs": 2, "batch_size": 2}})";
  REQUIRE(run("train -c " + path("tiny.json") + " -d " + path("data/train") + " -o " + path("m.ckpt") +
                  " --loss-log " + path("loss.csv")) == 0);
  CHECK(slurp("loss.csv").rfind("epoch,lr,loss,conf,loc\n1,0.01,", 0) == 0);
  REQUIRE(run("detect -m " + path("m.ckpt") + " -d " + path("data/test") + " -o " + path("dets.csv")) == 0);
  std::istringstream in(slurp("dets.csv"));
  CHECK_NOTHROW(parse_detections_csv(in));
}

TEST_CASE("exit codes") {
  std::ofstream(work_dir() / "bad.json") << R"({"train": {"momentun": 0.9}})";
  CHECK(run("train -d x -o y --dump-config -c " + path("bad.json")) == 1);
  CHECK(run("detect -m " + path("missing.ckpt") + " -d " + path("data/test")) == 2);
  CHECK(run("frobnicate") == 1);
  CHECK(run("synth") == 1);
  std::ofstream(work_dir() / "broken.txt") << "1 2 3\n";
  CHECK(run("encode -i " + path("broken.txt") + " -o " + path("enc_bad")) == 1);
  CHECK(slurp("stderr.txt").find("line 1") != std::string::npos);
  CHECK(run("eval --detections " + path("missing.csv") + " -l " + path("data/test")) == 2);
}
