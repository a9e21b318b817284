#pragma once

#include <functional>
#include <span>
#include <string>

#include "came/diff/graph.hpp"

namespace came::diff {

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = false;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

/// Builds a scalar loss node on the given graph from the current parameter values.
using LossBuilder = std::function<Var(Graph&)>;

/// Compares analytic gradients with central differences (f(x+h) - f(x-h)) / 2h
/// for every element of every parameter. Relative error uses the denominator
/// max(|analytic|, |numeric|, 1e-8). Throws std::runtime_error on a non-finite loss.
/// Parameter gradients are reset before the analytic pass and hold the
/// analytic gradient afterwards.
GradCheckReport grad_check(const LossBuilder& loss_builder, std::span<Parameter* const> params, double h, double tol);

/// Same check, but with an externally supplied analytic gradient per parameter
/// (used to validate the checker against corrupted gradients).
GradCheckReport grad_check_against(const LossBuilder& loss_builder, std::span<Parameter* const> params,
                                   std::span<const NumArray> analytic, double h, double tol);

}  // namespace came::diff
