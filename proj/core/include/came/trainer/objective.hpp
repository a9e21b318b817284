#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "came/diff/ops.hpp"
#include "came/encoder/encoder.hpp"
#include "came/encoder/vocab.hpp"
#include "came/expert_id.hpp"
#include "came/retrieval/corpus.hpp"

namespace came::trainer {

/// A query with one positive document and a fixed-size set of negatives.
struct TrainingInstance {
  std::string query_id;
  std::string query_text;
  std::string positive;
  std::vector<std::string> negatives;
};

/// Per-expert loss coefficients of one instance, summing to 1.
struct CompetitiveWeights {
  std::array<double, kNumExperts> w{1.0 / 3, 1.0 / 3, 1.0 / 3};

  double operator[](ExpertId e) const { return w[index_of(e)]; }
  double sum() const { return w[0] + w[1] + w[2]; }
};

/// Candidate documents shared by the whole batch: every instance's positive and
/// negatives, deduplicated in order of first appearance.
struct CandidateSet {
  std::vector<std::string> docs;
  std::vector<std::size_t> positive;  // per instance, index into docs

  /// The candidate doc ids seen by instance i (the same pool for every instance).
  const std::vector<std::string>& for_instance(std::size_t) const { return docs; }
};

CandidateSet in_batch_candidates(std::span<const TrainingInstance> batch);

/// Softmax over candidate scores (rank-1 node).
diff::Var candidate_probs(diff::Var scores);
/// -log P(positive); computed through log-softmax for stability.
diff::Var contrastive_loss(diff::Var scores, std::size_t pos_index);

/// 1 + number of candidates scoring strictly above the positive.
std::size_t rank_of_positive(std::span<const double> scores, std::size_t pos_index);
/// softmax over experts of (1 / rank) / tau. Throws for tau <= 0 or rank 0.
CompetitiveWeights competitive_weights(const std::array<std::size_t, kNumExperts>& ranks, double tau);

/// Sum over vocabulary columns of the squared column mean (rows are texts).
diff::Var flops_penalty(diff::Var lexical_reps);

/// Forward pass of one batch: the three (instances x candidates) score
/// matrices, the per-instance contrastive losses, and the FLOPS penalty
/// averaged over the query and document sides.
struct BatchForward {
  CandidateSet candidates;
  std::array<diff::Var, kNumExperts> scores;                    // B x U each
  std::vector<std::array<diff::Var, kNumExperts>> losses;       // per instance
  diff::Var flops;
  std::vector<std::array<std::size_t, kNumExperts>> ranks;      // per instance

  std::array<double, kNumExperts> mean_losses() const;
};

BatchForward forward_batch(encoder::ModelGraph& mg, const encoder::Vocab& vocab, const retrieval::Corpus& corpus,
                           std::span<const TrainingInstance> batch);

/// Mean over instances of the unweighted expert-loss sum, plus flops_weight * FLOPS.
diff::Var standardized_loss(const BatchForward& fwd, double flops_weight);
/// Mean over instances of sum_e w_e L_e, plus flops_weight * FLOPS. Weights come
/// from the batch's ranks at `tau` unless given explicitly; they are constants.
diff::Var specialized_loss(const BatchForward& fwd, double tau, double flops_weight,
                           const std::optional<std::vector<CompetitiveWeights>>& weights = std::nullopt);
std::vector<CompetitiveWeights> batch_weights(const BatchForward& fwd, double tau);

}  // namespace came::trainer
