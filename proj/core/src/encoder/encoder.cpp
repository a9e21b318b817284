#include "came/encoder/encoder.hpp"

#include <stdexcept>
#include <string>

namespace came::encoder {

using diff::Var;

ModelGraph::ModelGraph(diff::Graph& graph, ModelParams& params) : graph_(graph), params_(params), trainable_(true) {}

ModelGraph::ModelGraph(diff::Graph& graph, const ModelParams& params)
    : graph_(graph), params_(params), trainable_(false) {}

Var ModelGraph::bind(const diff::Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return it->second;
  // The non-const overload is only reachable when we were handed mutable params.
  Var v = trainable_ ? graph_.param(const_cast<diff::Parameter&>(p)) : graph_.reference(p.value);
  bound_.emplace(&p, v);
  return v;
}

PackedBatch pack(std::span<const TokenSeq> seqs, const ModelConfig& config) {
  PackedBatch b;
  for (const TokenSeq& s : seqs) {
    if (s.ids.size() != s.mask.size()) throw std::invalid_argument("pack: ids and mask lengths differ");
    if (s.ids.size() > config.max_positions()) {
      throw std::invalid_argument("pack: sequence of length " + std::to_string(s.ids.size()) +
                                  " exceeds the position table (" + std::to_string(config.max_positions()) + ")");
    }
    if (s.length == 0) throw std::invalid_argument("pack: sequence without CLS");
    const std::size_t off = b.ids.size();
    b.segments.push_back({off, s.ids.size()});
    b.valid.push_back({off, s.length});
    b.cls_rows.push_back(off);
    for (std::size_t i = 0; i < s.ids.size(); ++i) {
      b.ids.push_back(s.ids[i]);
      b.positions.push_back(static_cast<std::int32_t>(i));
      b.key_mask.push_back(s.mask[i]);
      if (s.mask[i] != 0) b.valid_rows.push_back(off + i);
    }
  }
  return b;
}

Var transformer_block(ModelGraph& mg, const BlockParams& bp, Var x, const PackedBatch& batch) {
  const auto linear = [&](Var in, const diff::Parameter& w, const diff::Parameter& bias) {
    return diff::add_row_vector(diff::matmul(in, mg.bind(w)), mg.bind(bias));
  };
  Var q = linear(x, bp.wq, bp.bq);
  // No key bias: it adds the same amount to every score of a query row and
  // cancels in the softmax.
  Var k = diff::matmul(x, mg.bind(bp.wk));
  Var v = linear(x, bp.wv, bp.bv);
  Var att = diff::attention(q, k, v, batch.segments, batch.key_mask, mg.config().n_heads);
  Var h = diff::layer_norm(diff::add(x, linear(att, bp.wo, bp.bo)), mg.bind(bp.ln1_gain), mg.bind(bp.ln1_bias));
  Var f = linear(diff::gelu(linear(h, bp.ff1_w, bp.ff1_b)), bp.ff2_w, bp.ff2_b);
  return diff::layer_norm(diff::add(h, f), mg.bind(bp.ln2_gain), mg.bind(bp.ln2_bias));
}

Var encode_shared(ModelGraph& mg, const PackedBatch& batch) {
  const ModelParams& p = mg.params();
  Var tok = diff::embedding(mg.bind(p.token_embedding), batch.ids);
  Var pos = diff::embedding(mg.bind(p.position_embedding), batch.positions);
  Var x = diff::layer_norm(diff::add(tok, pos), mg.bind(p.embedding_ln_gain), mg.bind(p.embedding_ln_bias));
  for (const BlockParams& block : p.shared) x = transformer_block(mg, block, x, batch);
  return x;
}

Var encode_expert(ModelGraph& mg, ExpertId expert, Var shared_out, const PackedBatch& batch) {
  const std::size_t e = index_of(expert);
  if (e >= kNumExperts) throw std::invalid_argument("encode_expert: unknown expert id " + std::to_string(e));
  Var x = shared_out;
  for (const BlockParams& block : mg.params().experts[e]) x = transformer_block(mg, block, x, batch);
  return x;
}

diff::NumArray encode_shared(const ModelParams& params, const TokenSeq& seq) {
  diff::Graph g(diff::Graph::Mode::kInference);
  ModelGraph mg(g, params);
  const PackedBatch batch = pack(std::span<const TokenSeq>(&seq, 1), params.config);
  return encode_shared(mg, batch).value();
}

diff::NumArray encode_expert(const ModelParams& params, ExpertId expert, const diff::NumArray& shared_out,
                             const TokenSeq& seq) {
  diff::Graph g(diff::Graph::Mode::kInference);
  ModelGraph mg(g, params);
  const PackedBatch batch = pack(std::span<const TokenSeq>(&seq, 1), params.config);
  if (shared_out.rank() != 2 || shared_out.rows() != batch.num_rows() || shared_out.cols() != params.config.d_model) {
    throw diff::ShapeError("encode_expert", shared_out.shape(), diff::Shape{batch.num_rows(), params.config.d_model});
  }
  return encode_expert(mg, expert, g.constant(shared_out), batch).value();
}

}  // namespace came::encoder
