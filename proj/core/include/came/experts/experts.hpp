#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "came/diff/ops.hpp"
#include "came/encoder/encoder.hpp"
#include "came/expert_id.hpp"

namespace came::experts {

using encoder::TokenId;

/// Nonnegative term weights keyed by token id, stored sorted by id with zero
/// weights dropped.
class LexicalVec {
 public:
  LexicalVec() = default;
  /// Entries must be strictly increasing in id with weights > 0.
  LexicalVec(std::vector<std::pair<TokenId, double>> entries, std::size_t vocab_size);
  /// Keeps the positive components of a dense vector.
  static LexicalVec from_dense(std::span<const double> dense);

  const std::vector<std::pair<TokenId, double>>& entries() const { return entries_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t nnz() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  /// Weight of a term; 0 when absent.
  double weight(TokenId id) const;

  friend bool operator==(const LexicalVec&, const LexicalVec&) = default;

 private:
  std::vector<std::pair<TokenId, double>> entries_;
  std::size_t vocab_size_ = 0;
};

/// Per-token projected vectors; row 0 is CLS, PAD rows are never present.
using LocalVecs = diff::NumArray;
/// CLS output vector of the global expert.
using GlobalVec = std::vector<double>;

/// All three representations of one text.
struct ExpertReps {
  LexicalVec lex;
  LocalVecs loc;
  GlobalVec glob;
};

// Representation extractors on a single expert output (padded_length x d_model).

/// MLM logits of every non-PAD row, then max over rows of log(1 + ReLU(.)).
LexicalVec lexical_rep(const diff::NumArray& expert_out, const encoder::ModelParams& params,
                       std::span<const std::uint8_t> mask);
/// Non-PAD rows right-multiplied by the local projection.
LocalVecs local_rep(const diff::NumArray& expert_out, const diff::NumArray& projection,
                    std::span<const std::uint8_t> mask);
GlobalVec global_rep(const diff::NumArray& expert_out);

// Interaction functions.

/// Sparse dot product, accumulated in ascending term-id order.
double lexical_score(const LexicalVec& q, const LexicalVec& d);
/// Sum over query rows of the max over document rows of the inner product.
double local_score(const LocalVecs& q, const LocalVecs& d);
double global_score(const GlobalVec& q, const GlobalVec& d);

double score(ExpertId expert, const ExpertReps& q, const ExpertReps& d);

/// End-to-end score of one pair: tokenize, shared stack, expert stack,
/// representation, interaction.
double expert_score(ExpertId expert, std::string_view q_text, std::string_view d_text,
                    const encoder::ModelParams& params, const encoder::Vocab& vocab);

/// Encodes texts in packed batches and extracts all three representations.
/// Results are bit-identical to encoding each text on its own.
std::vector<ExpertReps> encode_texts(const encoder::ModelParams& params, const encoder::Vocab& vocab,
                                     std::span<const std::string> texts, std::size_t max_len,
                                     std::size_t batch_size = 64);
std::vector<ExpertReps> encode_sequences(const encoder::ModelParams& params,
                                         std::span<const encoder::TokenSeq> seqs, std::size_t batch_size = 64);

// Differentiable heads over a packed batch, used by training.

/// Dense lexical representations, one row per sequence: (sequences x V).
diff::Var lexical_dense(encoder::ModelGraph& mg, diff::Var expert_out, const encoder::PackedBatch& batch);
/// Projected non-PAD rows of all sequences, stacked: (valid rows x d_local).
diff::Var local_rows(encoder::ModelGraph& mg, diff::Var expert_out, const encoder::PackedBatch& batch);
/// CLS rows: (sequences x d_model).
diff::Var global_rows(diff::Var expert_out, const encoder::PackedBatch& batch);

/// Late-interaction score matrix between query and document row groups:
/// out[i][j] = sum over rows r of query i of max over rows c of doc j of <q_r, d_c>.
diff::Var maxsim_scores(diff::Var query_rows, const diff::Segments& query_groups, diff::Var doc_rows,
                        const diff::Segments& doc_groups);

}  // namespace came::experts
