#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "came/diff/graph.hpp"

namespace came::diff {

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  /// Learning rate reached at the end of the schedule, as a fraction of the base.
  double final_lr_fraction = 0.1;
  /// Optimizer steps over which the rate decays linearly; 0 disables decay.
  std::int64_t total_steps = 0;
};

struct AdamWState {
  std::vector<NumArray> first_moment;
  std::vector<NumArray> second_moment;
  std::int64_t step = 0;
};

enum class StepOutcome { kApplied, kSkippedNonFinite };

/// Adam with decoupled weight decay and a linear learning-rate decay measured
/// in optimizer steps.
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  const AdamWConfig& config() const { return config_; }
  AdamWConfig& config() { return config_; }
  const AdamWState& state() const { return state_; }
  AdamWState& state() { return state_; }

  /// Rate used for the update taken after `completed_steps` earlier updates.
  double effective_lr(std::int64_t completed_steps) const;

  /// Applies one update from the parameters' accumulated gradients. Returns
  /// kSkippedNonFinite (and leaves everything untouched) when any gradient is
  /// NaN or infinite.
  StepOutcome step(std::span<Parameter* const> params);

 private:
  AdamWConfig config_;
  AdamWState state_;
};

}  // namespace came::diff
