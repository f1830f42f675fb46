// Copyright 2026 The skelbox Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "skelbox/config.hpp"
#include "skelbox/io.hpp"
#include "skelbox/postprocess.hpp"

namespace skelbox {

namespace fs = std::filesystem;

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results must be
/// written by index; the first exception (lowest i) is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Dataset directory: skeleton/<id>.txt (+ label/<id>.txt), ids sorted.
/// A directory of bare skeleton files (no skeleton/ subdirectory) is also
/// accepted. Labels are loaded when a label file exists; `require_labels`
/// turns a missing one into an IoError.
std::vector<LabeledSequence> load_dataset(const fs::path& dir, bool require_labels);
void write_dataset(const fs::path& dir, std::span<const LabeledSequence> data);

/// Label files keyed by id, from a label directory or a dataset directory.
std::map<std::string, std::vector<GroundTruthSegment>> load_labels(const fs::path& dir);

ActionImage encode_sequence(const SkeletonSequence& seq, EncodeMode mode,
                            const std::optional<DatasetStats>& stats);

/// Writes <out>/train and, when num_test_sequences > 0, <out>/test.
void run_synth(const RunConfig& cfg, const fs::path& out);

/// Encodes each sequence to <out>/<id>.png and <out>/<id>.json. Global mode
/// takes `stats`, or computes them from the inputs when absent.
void run_encode(std::span<const LabeledSequence> data, const fs::path& out, const RunConfig& cfg,
                std::optional<DatasetStats> stats, int jobs);

Checkpoint run_train(std::span<const LabeledSequence> data, const RunConfig& cfg,
                     const EpochCallback& on_epoch = {});

std::map<std::string, std::vector<Detection>> run_detect(const Checkpoint& ckpt,
                                                         std::span<const LabeledSequence> data,
                                                         const InferenceConfig& inference, int jobs);

std::string format_eval_csv(const EvalTable& table);
std::string format_eval_text(const EvalTable& table);

}  // namespace skelbox
