// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
//
// skelbox: synth | encode | priors | train | detect | eval
// Exit codes: 0 success, 1 validation error, 2 I/O error.
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "skelbox/pipeline.hpp"

using namespace skelbox;

namespace {

struct Common {
  std::string config_path;
  bool dump_config = false;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

void add_common(CLI::App* cmd, Common& c, bool with_seed) {
  cmd->add_option("-c,--config", c.config_path, "JSON run config")->check(CLI::ExistingFile);
  cmd->add_flag("--dump-config", c.dump_config, "Print the effective config and exit");
  if (with_seed) cmd->add_option("--seed", c.seed, "Override the seed");
  cmd->add_option("-j,--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

RunConfig load_config(const Common& c) {
  if (c.config_path.empty()) return RunConfig{};
  return parse_run_config(read_text_file(c.config_path));
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_text_file(path, text);
  }
}

std::vector<LabeledSequence> load_input(const std::string& path, bool require_labels) {
  if (fs::is_regular_file(path)) {
    std::istringstream text(read_text_file(path));
    LabeledSequence item;
    item.sequence = parse_skeleton_file(text, fs::path(path).stem().string());
    return {std::move(item)};
  }
  return load_dataset(path, require_labels);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Skeleton action detection with single-shot default boxes"};
  app.require_subcommand(1);
  Common common;

  // synth
  std::string synth_out;
  std::optional<int> synth_classes, synth_count, synth_test;
  auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic skeleton dataset");
  add_common(synth, common, true);
  synth->add_option("-o,--out", synth_out, "Output dataset directory")->required();
  synth->add_option("--num-classes", synth_classes);
  synth->add_option("--num-sequences", synth_count, "Training sequences");
  synth->add_option("--num-test", synth_test, "Test sequences");

  // encode
  std::string encode_in, encode_out, encode_mode, stats_from;
  std::optional<Index> encode_width;
  auto* encode = app.add_subcommand("encode", "Encode skeleton sequences as PNG action images");
  add_common(encode, common, false);
  encode->add_option("-i,--input", encode_in, "Skeleton file or dataset directory")->required();
  encode->add_option("-o,--out", encode_out, "Output directory")->required();
  encode->add_option("--mode", encode_mode, "invariant | global");
  encode->add_option("--width", encode_width, "Resample to this many columns (0 = native)");
  encode->add_option("--stats-from", stats_from, "Dataset whose extrema drive global encoding");

  // priors
  std::string priors_out;
  auto* priors = app.add_subcommand("priors", "Dump the default boxes as CSV");
  add_common(priors, common, false);
  priors->add_option("-o,--out", priors_out, "Output CSV (default stdout)");

  // train
  std::string train_data, train_out, loss_log;
  std::optional<int> train_epochs;
  auto* train_cmd = app.add_subcommand("train", "Train the detector");
  add_common(train_cmd, common, true);
  train_cmd->add_option("-d,--data", train_data, "Training dataset directory")->required();
  train_cmd->add_option("-o,--out", train_out, "Checkpoint path")->required();
  train_cmd->add_option("--loss-log", loss_log, "Per-epoch loss CSV (default stdout)");
  train_cmd->add_option("--epochs", train_epochs);

  // detect
  std::string ckpt_path, detect_data, detect_out;
  std::optional<double> conf_threshold, nms_iou;
  std::optional<int> top_k;
  auto* detect_cmd = app.add_subcommand("detect", "Run a trained detector over a dataset");
  add_common(detect_cmd, common, false);
  detect_cmd->add_option("-m,--checkpoint", ckpt_path, "Checkpoint from train")->required();
  detect_cmd->add_option("-d,--data", detect_data, "Dataset directory or skeleton file")->required();
  detect_cmd->add_option("-o,--out", detect_out, "Detections CSV (default stdout)");
  detect_cmd->add_option("--conf-threshold", conf_threshold);
  detect_cmd->add_option("--top-k", top_k);
  detect_cmd->add_option("--nms-iou", nms_iou);

  // eval
  std::string dets_path, labels_dir, eval_out;
  std::vector<double> thetas{0.1, 0.5};
  auto* eval = app.add_subcommand("eval", "Score detections with interval-IoU mAP");
  add_common(eval, common, false);
  eval->add_option("--detections", dets_path, "Detections CSV")->required();
  eval->add_option("-l,--labels", labels_dir, "Label directory or dataset directory")->required();
  eval->add_option("--theta", thetas, "IoU thresholds")->delimiter(',');
  eval->add_option("-o,--out", eval_out, "AP table CSV (the text table goes to stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    RunConfig cfg = load_config(common);
    if (*synth) {
      if (common.seed) cfg.synth.seed = *common.seed;
      if (synth_classes) cfg.synth.num_classes = *synth_classes;
      if (synth_count) cfg.synth.num_sequences = *synth_count;
      if (synth_test) cfg.num_test_sequences = *synth_test;
      cfg.synth.validate();
    } else if (*encode) {
      if (!encode_mode.empty()) cfg.encode.mode = parse_encode_mode(encode_mode);
      if (encode_width) cfg.encode.width = *encode_width;
    } else if (*train_cmd) {
      if (common.seed) cfg.train.seed = *common.seed;
      if (train_epochs) cfg.train.max_epochs = *train_epochs;
      cfg.train.jobs = common.jobs;
      cfg.train.validate();
    } else if (*detect_cmd) {
      if (conf_threshold) cfg.inference.conf_threshold = *conf_threshold;
      if (top_k) cfg.inference.top_k = *top_k;
      if (nms_iou) cfg.inference.nms_iou = *nms_iou;
    }
    if (common.dump_config) {
      std::cout << dump_run_config(cfg);
      return 0;
    }

    if (*synth) {
      run_synth(cfg, synth_out);
    } else if (*encode) {
      std::optional<DatasetStats> stats;
      if (!stats_from.empty()) {
        std::vector<SkeletonSequence> seqs;
        for (auto& d : load_input(stats_from, false)) seqs.push_back(std::move(d.sequence));
        stats = compute_dataset_stats(seqs);
      }
      run_encode(load_input(encode_in, false), encode_out, cfg, stats, common.jobs);
    } else if (*priors) {
      const auto resolved = cfg.detector.resolved();
      const auto layout = prior_layout(resolved.prior);
      const auto boxes = generate_priors<double>(resolved.prior);
      std::ostringstream out;
      out << "layer,row,col,ratio,cx,cy,w,h\n";
      out.precision(17);
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        const auto& p = layout[i];
        const auto& b = boxes[i];
        out << p.layer << ',' << p.row << ',' << p.col << ',' << p.ratio << ',' << b.cx << ',' << b.cy << ','
            << b.w << ',' << b.h << '\n';
      }
      write_output(priors_out, out.str());
    } else if (*train_cmd) {
      const auto data = load_dataset(train_data, true);
      Checkpoint ckpt = run_train(data, cfg, [](const EpochLog& e) {
        std::fprintf(stderr, "epoch %3d  lr %.3g  loss %.5f  (conf %.5f, loc %.5f)\n", e.epoch, e.lr, e.loss,
                     e.conf, e.loc);
      });
      save_checkpoint(train_out, ckpt);
      std::ostringstream log;
      write_loss_log_csv(log, ckpt.state.log);
      write_output(loss_log, log.str());
    } else if (*detect_cmd) {
      const Checkpoint ckpt = load_checkpoint(ckpt_path);
      const auto dets = run_detect(ckpt, load_input(detect_data, false), cfg.inference, common.jobs);
      std::ostringstream out;
      write_detections_csv(out, dets);
      write_output(detect_out, out.str());
    } else if (*eval) {
      std::istringstream text(read_text_file(dets_path));
      EvalInput input{parse_detections_csv(text), load_labels(labels_dir)};
      const EvalTable table = evaluate(input, thetas);
      if (!eval_out.empty()) write_text_file(eval_out, format_eval_csv(table));
      std::cout << format_eval_text(table);
    }
    return 0;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
