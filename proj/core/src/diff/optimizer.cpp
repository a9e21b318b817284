#include "came/diff/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace came::diff {

double AdamW::effective_lr(std::int64_t completed_steps) const {
  if (config_.total_steps <= 0) return config_.learning_rate;
  const double progress =
      std::clamp(static_cast<double>(completed_steps) / static_cast<double>(config_.total_steps), 0.0, 1.0);
  return config_.learning_rate * (1.0 - (1.0 - config_.final_lr_fraction) * progress);
}

StepOutcome AdamW::step(std::span<Parameter* const> params) {
  for (const Parameter* p : params) {
    if (!p->grad.all_finite()) return StepOutcome::kSkippedNonFinite;
  }
  if (state_.first_moment.size() != params.size()) {
    state_.first_moment.clear();
    state_.second_moment.clear();
    for (const Parameter* p : params) {
      state_.first_moment.emplace_back(p->value.shape());
      state_.second_moment.emplace_back(p->value.shape());
    }
  }
  const double lr = effective_lr(state_.step);
  ++state_.step;
  const double t = static_cast<double>(state_.step);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    NumArray& m = state_.first_moment[i];
    NumArray& v = state_.second_moment[i];
    if (m.shape() != p.value.shape()) throw ShapeError("AdamW::step", m.shape(), p.value.shape());
    const bool has_grad = p.grad.size() == p.value.size();
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double gj = has_grad ? p.grad[j] : 0.0;
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * gj;
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * gj * gj;
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p.value[j] -= lr * (mhat / (std::sqrt(vhat) + config_.epsilon) + config_.weight_decay * p.value[j]);
    }
  }
  return StepOutcome::kApplied;
}

}  // namespace came::diff
