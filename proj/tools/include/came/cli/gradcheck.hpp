#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "came/diff/grad_check.hpp"

namespace came::cli {

struct GradCheckSetup {
  std::uint64_t seed = 1;
  std::size_t d_model = 8;
  std::size_t vocab_words = 47;  // plus PAD, CLS, UNK: V = 50
  std::size_t instances = 2;
  std::size_t negatives = 2;
  double tau = 0.5;
  double flops_weight = 0.01;
  /// Weights are redrawn at this scale (biases and gains perturbed around
  /// their init) so no gradient sits near the noise floor of the difference.
  double init_scale = 0.5;
  double h = 1e-5;
  double tol = 1e-3;
};

struct GradCheckOutcome {
  diff::GradCheckReport standardized;
  diff::GradCheckReport specialized;
  std::vector<std::string> notes;
  bool pass() const { return standardized.pass && specialized.pass; }
};

/// Both training losses of a tiny random model checked against central differences.
GradCheckOutcome run_gradcheck(const GradCheckSetup& setup);

}  // namespace came::cli
