#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "came/diff/optimizer.hpp"
#include "came/encoder/model.hpp"
#include "came/encoder/vocab.hpp"
#include "came/trainer/schedule.hpp"

namespace came::trainer {

/// Everything needed to score with, or resume, a training run.
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  encoder::ModelParams params;
  encoder::Vocab vocab;
  TrainSchedule schedule;
  diff::AdamWConfig optimizer_config;
  diff::AdamWState optimizer_state;
  std::uint64_t seed = 0;
  std::uint64_t steps_done = 0;
  std::uint64_t total_steps = 0;

  /// "CAME1" magic, version, config, schedule, vocab, named parameter blocks,
  /// optimizer block, schedule position and seed; little-endian.
  std::string serialize() const;
  static Checkpoint deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

}  // namespace came::trainer
