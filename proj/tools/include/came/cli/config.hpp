#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "came/encoder/model.hpp"
#include "came/retrieval/fusion.hpp"
#include "came/trainer/schedule.hpp"

namespace came::cli {

struct Paths {
  /// Dataset directory written by datagen; fills in any file path left empty.
  std::filesystem::path data;
  std::filesystem::path corpus, train_queries, dev_queries, eval_queries, qrels, answers;
  std::filesystem::path checkpoint, index_dir, output_dir;
};

/// One metric to report, e.g. "mrr@10", "recall@100", "ndcg@10", "top@20".
struct MetricSpec {
  std::string name;
  std::size_t cutoff = 0;

  std::string label() const { return name + "@" + std::to_string(cutoff); }
  friend bool operator==(const MetricSpec&, const MetricSpec&) = default;
};
MetricSpec parse_metric(std::string_view text);

struct RunConfig {
  Paths paths;
  encoder::ModelConfig model;  // vocab_size comes from the data
  trainer::TrainSchedule schedule;
  std::size_t k = 100;
  retrieval::FusionMethod fusion = retrieval::FusionMethod::kSum;
  std::vector<MetricSpec> metrics;
  std::uint64_t seed = 42;

  /// Desk-scale defaults (the settings the specialization study uses).
  RunConfig();

  /// Fills empty file paths from `paths.data`, copies the seed into the
  /// schedule and checks every block. Throws std::invalid_argument.
  void finalize();
};

/// Sections [paths], [model], [train], [retrieval], [eval] plus a top-level
/// `seed`; `key = value` lines, `#` comments, optional double quotes.
/// Unknown sections and keys are rejected with the line number.
void apply_config_text(RunConfig& config, std::string_view text, std::string_view source = "config");
/// `section.key=value` override, as given on the command line.
void apply_override(RunConfig& config, std::string_view assignment);
RunConfig load_run_config(const std::filesystem::path& path);

/// Replaces the seed when CAME_SEED is set; rejects a malformed value.
void apply_seed_env(RunConfig& config);

/// The config as text that apply_config_text reads back to the same values.
std::string format_run_config(const RunConfig& config);

}  // namespace came::cli
