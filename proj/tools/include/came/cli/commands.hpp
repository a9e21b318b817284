#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "came/cli/config.hpp"
#include "came/eval/metrics.hpp"
#include "came/ranked_list.hpp"
#include "came/synthgen/synthgen.hpp"
#include "came/trainer/train.hpp"

namespace came::cli {

// Artifact layout under paths.output_dir.
std::filesystem::path expert_run_path(const RunConfig& config, ExpertId expert, std::string_view split = "eval");
std::filesystem::path fused_run_path(const RunConfig& config);

/// Generates, checks and writes a dataset. Violations of the construction
/// constraints abort before anything is written.
void cmd_datagen(const synthgen::GenSpec& spec, const std::filesystem::path& out_dir);

/// Trains on the training queries with BM25 bootstrap negatives and writes the
/// checkpoint, train_log.csv and final_weights.csv. `progress` receives one
/// line per logged step when non-null.
trainer::TrainResult cmd_train(const RunConfig& config, std::ostream* progress = nullptr);

/// Encodes the corpus with the checkpoint and writes the three expert indexes.
void cmd_index(const RunConfig& config);

/// Per-expert run files (with K-th-score and exact-score sidecars) for the
/// evaluation queries, plus the dev queries when the fusion is learned.
void cmd_retrieve(const RunConfig& config);

/// Fuses the three expert runs into run.fused.txt.
void cmd_fuse(const RunConfig& config);

/// Scores a run file with the configured metrics; writes metrics.<run stem>.csv.
std::vector<eval::MetricReport> cmd_eval(const RunConfig& config, const std::filesystem::path& run);

/// train -> index -> retrieve -> fuse without touching the filesystem beyond
/// reading the inputs. Returns the fused run of the evaluation queries in
/// run-file form, byte-comparable with run.fused.txt.
std::string run_in_process(const RunConfig& config);

/// Metric reports of `run` for the configured metrics.
std::vector<eval::MetricReport> evaluate_run(const RunConfig& config, const std::vector<RankedList>& run);

}  // namespace came::cli
