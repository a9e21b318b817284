#pragma once

#include <cstddef>
#include <cstdint>

namespace came::trainer {

struct TrainSchedule {
  double tau = 0.5;
  /// Fraction of phase-A steps trained with the standardized (equal-weight) loss.
  double standardized_ratio = 0.2;
  /// When false every step uses the standardized loss, phase B included.
  bool specialized = true;
  std::size_t epochs_bootstrap = 2;  // phase A, bootstrap negatives
  std::size_t epochs_hard = 1;       // phase B, mined negatives
  std::size_t batch_size = 8;
  std::size_t negatives = 7;
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  double flops_weight = 0.01;
  std::size_t mine_depth = 20;
  /// Draw fresh negatives from the pool every epoch instead of fixing them once.
  bool resample_negatives = true;
  std::uint64_t seed = 42;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  friend bool operator==(const TrainSchedule&, const TrainSchedule&) = default;
};

}  // namespace came::trainer
