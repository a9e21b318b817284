#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "came/encoder/model.hpp"
#include "came/encoder/vocab.hpp"
#include "came/eval/metrics.hpp"
#include "came/retrieval/fusion.hpp"
#include "came/retrieval/index.hpp"
#include "came/synthgen/synthgen.hpp"
#include "came/trainer/train.hpp"

namespace came::cli {

/// Vocabulary over the corpus and the training queries.
encoder::Vocab build_vocab(const retrieval::Corpus& corpus, std::span<const retrieval::Query> queries);

/// Top-`depth` BM25 documents per query minus the relevant ones.
trainer::NegativePools bm25_negatives(const retrieval::Corpus& corpus, const std::vector<retrieval::Query>& queries,
                                      const eval::Qrels& qrels, std::size_t depth);

/// Per-expert top-k lists for every query, in query order.
std::vector<retrieval::ExpertLists> retrieve(const encoder::ModelParams& params, const encoder::Vocab& vocab,
                                             const std::array<retrieval::ExpertIndex, kNumExperts>& indexes,
                                             const std::vector<retrieval::Query>& queries, std::size_t k);

/// Everything the specialization experiments report for one trained model.
struct ExperimentOutcome {
  std::array<double, kNumExperts> expert_mrr{};
  double fused_mrr = 0.0;
  /// family -> mean competitive weight per expert over the final epoch.
  std::map<synthgen::Family, std::array<double, kNumExperts>> family_weights;
  /// family -> fused and per-expert MRR@10 on that family's test queries.
  std::map<synthgen::Family, std::array<double, kNumExperts + 1>> family_mrr;
  /// Mean pairwise RBO of the per-expert top-100 lists: lex-loc, lex-glob, loc-glob.
  std::array<double, 3> rbo{};
  std::vector<std::string> warnings;
  double seconds = 0.0;
};

struct ExperimentSetup {
  encoder::ModelConfig model;
  trainer::TrainSchedule schedule;
  std::size_t k = 100;
  retrieval::FusionMethod fusion = retrieval::FusionMethod::kSum;
};

/// Retrieval quality of a trained model on `queries` (weights left empty).
ExperimentOutcome evaluate_model(const encoder::ModelParams& params, const encoder::Vocab& vocab,
                                 const synthgen::Dataset& data, const std::vector<retrieval::Query>& queries,
                                 std::size_t k, retrieval::FusionMethod fusion);

/// Train on `data.train`, index the corpus and evaluate on `eval_queries`.
/// `trained` receives the result when non-null.
ExperimentOutcome run_experiment(const synthgen::Dataset& data, const std::vector<retrieval::Query>& eval_queries,
                                 const ExperimentSetup& setup, trainer::TrainResult* trained = nullptr);

}  // namespace came::cli
