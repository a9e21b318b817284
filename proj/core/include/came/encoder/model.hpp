#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "came/diff/graph.hpp"
#include "came/expert_id.hpp"

namespace came::encoder {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_shared_layers = 2;
  std::size_t n_expert_layers = 1;
  std::size_t d_local = 32;
  std::size_t max_q_len = 32;
  std::size_t max_d_len = 128;
  std::size_t ff_width = 256;

  /// Throws std::invalid_argument naming the first violated constraint.
  void validate() const;
  std::size_t max_positions() const { return max_q_len > max_d_len ? max_q_len : max_d_len; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Post-layer-norm transformer block weights.
struct BlockParams {
  diff::Parameter wq, bq, wk, wv, bv, wo, bo;  // keys carry no bias
  diff::Parameter ln1_gain, ln1_bias;
  diff::Parameter ff1_w, ff1_b, ff2_w, ff2_b;
  diff::Parameter ln2_gain, ln2_bias;
};

/// Every trainable array of the retriever. The shared stack is stored once and
/// feeds all three expert stacks; the MLM head reuses the token embedding table
/// as its output matrix and adds a free bias.
struct ModelParams {
  ModelConfig config;
  diff::Parameter token_embedding;     // V x d_model
  diff::Parameter position_embedding;  // max_positions x d_model
  diff::Parameter embedding_ln_gain, embedding_ln_bias;
  std::vector<BlockParams> shared;
  std::array<std::vector<BlockParams>, kNumExperts> experts;
  diff::Parameter mlm_bias;          // V
  diff::Parameter local_projection;  // d_model x d_local

  /// Freshly initialized parameters: truncated normal (sigma 0.02) weights,
  /// zero biases, unit layer-norm gains.
  static ModelParams init(const ModelConfig& config, std::uint64_t seed);

  /// All parameters in a fixed canonical order. Pointers are invalidated by
  /// copying or moving the ModelParams.
  std::vector<diff::Parameter*> all();
  std::vector<const diff::Parameter*> all() const;
  std::size_t count_values() const;
  void zero_grad();
  bool all_finite() const;
};

}  // namespace came::encoder
