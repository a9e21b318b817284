#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "came/cli/config.hpp"
#include "came/cli/pipeline.hpp"

namespace came::cli {

struct SweepRow {
  std::string variant;
  std::uint64_t seed = 0;
  ExperimentOutcome outcome;
};

/// Names accepted by run_sweep.
const std::vector<std::string>& sweep_names();

/// One training run per variant of the named sweep, evaluated on the test
/// queries:
///   tau            tau in {0.2, 0.5, 1, 2}
///   ratio          standardized ratio in {0, 0.1, 0.2, 0.5, 1}
///   shared-layers  1, 2 or 3 shared layers
///   ablation       full, no-specialized, no-standardized
/// Every variant is repeated for `seeds` consecutive seeds from config.seed.
std::vector<SweepRow> run_sweep(std::string_view name, const RunConfig& config, const synthgen::Dataset& data,
                                std::size_t seeds = 1, std::ostream* progress = nullptr);

/// Columns: variant, seed, fused and per-expert MRR@10, per-family matched and
/// all weights, RBO pairs, seconds.
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

/// The full specialization protocol: tau picked by dev fused MRR@10, then the
/// picked setting and the no-specialized ablation trained on `seeds` seeds.
struct SpecializationStudy {
  std::vector<double> taus;
  std::vector<double> dev_fused_mrr;  // per tau, first seed
  double chosen_tau = 0.0;
  /// First seed at the chosen tau, on the test queries, with its final-epoch weights.
  ExperimentOutcome primary;
  std::vector<std::uint64_t> seeds;
  std::vector<double> full_fused_mrr;      // per seed, test
  std::vector<double> ablation_fused_mrr;  // per seed, test
  double seconds = 0.0;
};
SpecializationStudy run_specialization_study(const RunConfig& config, const synthgen::Dataset& data,
                                             std::size_t seeds = 5, std::ostream* progress = nullptr);

ExperimentSetup setup_from(const RunConfig& config);

}  // namespace came::cli
