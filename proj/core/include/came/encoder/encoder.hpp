#pragma once

#include <span>
#include <unordered_map>
#include <vector>

#include "came/diff/ops.hpp"
#include "came/encoder/model.hpp"
#include "came/encoder/vocab.hpp"

namespace came::encoder {

/// Binds model parameters to graph leaves, once per graph. Built from a
/// non-const ModelParams the leaves receive gradients; from a const one they
/// are read-only constants.
class ModelGraph {
 public:
  ModelGraph(diff::Graph& graph, ModelParams& params);
  ModelGraph(diff::Graph& graph, const ModelParams& params);

  diff::Graph& graph() const { return graph_; }
  const ModelParams& params() const { return params_; }
  const ModelConfig& config() const { return params_.config; }

  diff::Var bind(const diff::Parameter& p);

 private:
  diff::Graph& graph_;
  const ModelParams& params_;
  bool trainable_;
  std::unordered_map<const diff::Parameter*, diff::Var> bound_;
};

/// Several token sequences stacked row-wise into one matrix.
struct PackedBatch {
  diff::Segments segments;               // every row of each sequence, PAD included
  diff::Segments valid;                  // non-PAD rows of each sequence
  std::vector<std::uint8_t> key_mask;    // 1 for non-PAD rows
  std::vector<std::int32_t> ids;
  std::vector<std::int32_t> positions;
  std::vector<std::size_t> cls_rows;     // first row of each sequence
  std::vector<std::size_t> valid_rows;   // all non-PAD rows, sequence by sequence

  std::size_t num_sequences() const { return segments.size(); }
  std::size_t num_rows() const { return ids.size(); }
};

/// Throws std::invalid_argument when a sequence exceeds the position table.
PackedBatch pack(std::span<const TokenSeq> seqs, const ModelConfig& config);

/// Token + position embeddings, embedding layer norm, then the shared stack.
/// Output: (rows x d_model), row-aligned with the batch.
diff::Var encode_shared(ModelGraph& mg, const PackedBatch& batch);

/// Applies one expert's private blocks on top of the shared output.
diff::Var encode_expert(ModelGraph& mg, ExpertId expert, diff::Var shared_out, const PackedBatch& batch);

/// One post-layer-norm transformer block with masked multi-head attention.
diff::Var transformer_block(ModelGraph& mg, const BlockParams& block, diff::Var x, const PackedBatch& batch);

// Single-sequence forms, returning (padded_length x d_model) matrices.
diff::NumArray encode_shared(const ModelParams& params, const TokenSeq& seq);
diff::NumArray encode_expert(const ModelParams& params, ExpertId expert, const diff::NumArray& shared_out,
                             const TokenSeq& seq);

}  // namespace came::encoder
