#pragma once

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "came/encoder/model.hpp"
#include "came/encoder/vocab.hpp"
#include "came/eval/qrels.hpp"
#include "came/retrieval/corpus.hpp"
#include "came/trainer/checkpoint.hpp"
#include "came/trainer/objective.hpp"
#include "came/trainer/schedule.hpp"

namespace came::trainer {

/// query id -> candidate negative doc ids
using NegativePools = std::map<std::string, std::vector<std::string>>;

struct TrainingData {
  const retrieval::Corpus* corpus = nullptr;
  std::vector<retrieval::Query> queries;
  eval::Qrels qrels;
  NegativePools bootstrap;
};

/// Union of each expert's top-`depth` documents minus the query's relevant ones.
/// Queries whose pool comes out empty are left out and reported in `warnings`.
NegativePools mine_hard_negatives(const encoder::ModelParams& params, const encoder::Vocab& vocab,
                                  const retrieval::Corpus& corpus, const std::vector<retrieval::Query>& queries,
                                  const eval::Qrels& qrels, std::size_t depth, std::vector<std::string>* warnings);

struct StepLog {
  std::size_t step = 0;
  char phase = 'A';
  bool standardized = true;
  std::array<double, kNumExperts> loss{};
  std::array<double, kNumExperts> mean_weight{};
  double flops = 0.0;
  double total = 0.0;
};

struct InstanceWeights {
  std::string query_id;
  CompetitiveWeights weights;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepLog> log;
  /// Competitive weights of every instance seen in the last epoch.
  std::vector<InstanceWeights> final_epoch_weights;
  std::vector<std::string> warnings;
  bool aborted = false;
  std::string abort_reason;
};

/// Steps in one epoch over `instances` items.
std::size_t steps_per_epoch(std::size_t instances, std::size_t batch_size);
/// Standardized steps at the start of a phase of `phase_steps` steps.
std::size_t standardized_steps(double ratio, std::size_t phase_steps);

using ProgressFn = std::function<void(const StepLog&)>;

/// Phase A on bootstrap negatives (standardized for the first ceil(ratio * S)
/// steps, specialized afterwards), hard-negative mining, then phase B on mined
/// negatives with the specialized loss.
TrainResult train(const encoder::ModelConfig& config, const TrainSchedule& schedule, const encoder::Vocab& vocab,
                  const TrainingData& data, const ProgressFn& progress = {});

/// CSV with header step,stage,L_lex,L_loc,L_glob,w_lex,w_loc,w_glob,phase,flops,total.
std::string format_step_log(const std::vector<StepLog>& log);
/// CSV with header qid,w_lex,w_loc,w_glob.
std::string format_instance_weights(const std::vector<InstanceWeights>& weights);

}  // namespace came::trainer
