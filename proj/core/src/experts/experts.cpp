#include "came/experts/experts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace came::experts {

using diff::NumArray;
using diff::Var;

LexicalVec::LexicalVec(std::vector<std::pair<TokenId, double>> entries, std::size_t vocab_size)
    : entries_(std::move(entries)), vocab_size_(vocab_size) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!(entries_[i].second > 0.0)) throw std::invalid_argument("LexicalVec: weights must be positive");
    if (i > 0 && entries_[i - 1].first >= entries_[i].first) {
      throw std::invalid_argument("LexicalVec: term ids must be strictly increasing");
    }
    if (entries_[i].first < 0 || static_cast<std::size_t>(entries_[i].first) >= vocab_size_) {
      throw std::out_of_range("LexicalVec: term id outside the vocabulary");
    }
  }
}

LexicalVec LexicalVec::from_dense(std::span<const double> dense) {
  std::vector<std::pair<TokenId, double>> entries;
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (dense[i] > 0.0) entries.emplace_back(static_cast<TokenId>(i), dense[i]);
  }
  return LexicalVec(std::move(entries), dense.size());
}

double LexicalVec::weight(TokenId id) const {
  const auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                                   [](const auto& e, TokenId t) { return e.first < t; });
  return it != entries_.end() && it->first == id ? it->second : 0.0;
}

LexicalVec lexical_rep(const NumArray& expert_out, const encoder::ModelParams& params,
                       std::span<const std::uint8_t> mask) {
  const std::size_t d = params.config.d_model;
  const std::size_t vsize = params.token_embedding.value.rows();
  if (expert_out.rank() != 2 || expert_out.cols() != d || mask.size() != expert_out.rows()) {
    throw diff::ShapeError("lexical_rep", expert_out.shape(), diff::Shape{mask.size(), d});
  }
  // Valid rows gathered into one block so the head runs as a single product;
  // each row's logits are accumulated exactly as in a one-row product.
  std::vector<double> valid_rows;
  for (std::size_t r = 0; r < expert_out.rows(); ++r) {
    if (mask[r] != 0) valid_rows.insert(valid_rows.end(), expert_out.data() + r * d, expert_out.data() + (r + 1) * d);
  }
  const std::size_t n = valid_rows.size() / d;
  std::vector<double> logits(n * vsize);
  diff::kernels::gemm_nt(n, d, vsize, valid_rows.data(), params.token_embedding.value.data(), logits.data(), false);
  std::vector<double> best(vsize, 0.0);
  const double* bias = params.mlm_bias.value.data();
  for (std::size_t r = 0; r < n; ++r) {
    const double* lr = logits.data() + r * vsize;
    for (std::size_t t = 0; t < vsize; ++t) {
      const double h = lr[t] + bias[t];
      const double w = std::log((h > 0.0 ? h : 0.0) + 1.0);
      if (w > best[t]) best[t] = w;
    }
  }
  return LexicalVec::from_dense(best);
}

LocalVecs local_rep(const NumArray& expert_out, const NumArray& projection, std::span<const std::uint8_t> mask) {
  if (expert_out.rank() != 2 || projection.rank() != 2 || expert_out.cols() != projection.rows() ||
      mask.size() != expert_out.rows()) {
    throw diff::ShapeError("local_rep", expert_out.shape(), projection.shape());
  }
  const std::size_t d = expert_out.cols(), dl = projection.cols();
  std::size_t valid = 0;
  for (auto m : mask) valid += m != 0 ? 1 : 0;
  std::vector<double> rows;
  rows.reserve(valid * d);
  for (std::size_t r = 0; r < expert_out.rows(); ++r) {
    if (mask[r] != 0) rows.insert(rows.end(), expert_out.data() + r * d, expert_out.data() + (r + 1) * d);
  }
  NumArray out(diff::Shape{valid, dl});
  diff::kernels::gemm_nn(valid, d, dl, rows.data(), projection.data(), out.data(), false);
  return out;
}

GlobalVec global_rep(const NumArray& expert_out) {
  if (expert_out.rank() != 2 || expert_out.rows() == 0) {
    throw diff::ShapeError("global_rep: expected a non-empty matrix, got " + diff::shape_to_string(expert_out.shape()));
  }
  const auto r0 = expert_out.row(0);
  return GlobalVec(r0.begin(), r0.end());
}

double lexical_score(const LexicalVec& q, const LexicalVec& d) {
  double acc = 0.0;
  const auto& a = q.entries();
  const auto& b = d.entries();
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first < b[j].first) {
      ++i;
    } else if (b[j].first < a[i].first) {
      ++j;
    } else {
      acc += a[i].second * b[j].second;
      ++i;
      ++j;
    }
  }
  return acc;
}

double local_score(const LocalVecs& q, const LocalVecs& d) {
  if (q.cols() != d.cols()) throw diff::ShapeError("local_score", q.shape(), d.shape());
  if (q.rows() == 0 || d.rows() == 0) throw std::invalid_argument("local_score: empty representation");
  const std::size_t w = q.cols();
  double total = 0.0;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < d.rows(); ++j) {
      best = std::max(best, diff::kernels::dot(q.data() + i * w, d.data() + j * w, w));
    }
    total += best;
  }
  return total;
}

double global_score(const GlobalVec& q, const GlobalVec& d) {
  if (q.size() != d.size()) throw diff::ShapeError("global_score", diff::Shape{q.size()}, diff::Shape{d.size()});
  return diff::kernels::dot(q.data(), d.data(), q.size());
}

double score(ExpertId expert, const ExpertReps& q, const ExpertReps& d) {
  switch (expert) {
    case ExpertId::kLex: return lexical_score(q.lex, d.lex);
    case ExpertId::kLoc: return local_score(q.loc, d.loc);
    case ExpertId::kGlob: return global_score(q.glob, d.glob);
  }
  throw std::invalid_argument("score: unknown expert");
}

namespace {

ExpertReps extract(ExpertId expert, const NumArray& out, const encoder::ModelParams& params,
                   std::span<const std::uint8_t> mask, ExpertReps reps = {}) {
  switch (expert) {
    case ExpertId::kLex: reps.lex = lexical_rep(out, params, mask); break;
    case ExpertId::kLoc: reps.loc = local_rep(out, params.local_projection.value, mask); break;
    case ExpertId::kGlob: reps.glob = global_rep(out); break;
  }
  return reps;
}

NumArray slice_rows(const NumArray& m, std::size_t offset, std::size_t count) {
  NumArray out(diff::Shape{count, m.cols()});
  std::copy_n(m.data() + offset * m.cols(), count * m.cols(), out.data());
  return out;
}

}  // namespace

double expert_score(ExpertId expert, std::string_view q_text, std::string_view d_text,
                    const encoder::ModelParams& params, const encoder::Vocab& vocab) {
  const auto rep = [&](std::string_view text, std::size_t max_len) {
    const encoder::TokenSeq seq = encoder::tokenize(text, max_len, vocab);
    const NumArray shared = encoder::encode_shared(params, seq);
    const NumArray out = encoder::encode_expert(params, expert, shared, seq);
    return extract(expert, out, params, seq.mask);
  };
  const ExpertReps q = rep(q_text, params.config.max_q_len);
  const ExpertReps d = rep(d_text, params.config.max_d_len);
  return score(expert, q, d);
}

std::vector<ExpertReps> encode_sequences(const encoder::ModelParams& params, std::span<const encoder::TokenSeq> seqs,
                                         std::size_t batch_size) {
  if (batch_size == 0) batch_size = 1;
  std::vector<ExpertReps> reps(seqs.size());
  for (std::size_t begin = 0; begin < seqs.size(); begin += batch_size) {
    const std::size_t end = std::min(seqs.size(), begin + batch_size);
    const auto chunk = seqs.subspan(begin, end - begin);
    diff::Graph g(diff::Graph::Mode::kInference);
    encoder::ModelGraph mg(g, params);
    const encoder::PackedBatch batch = encoder::pack(chunk, params.config);
    const Var shared = encoder::encode_shared(mg, batch);
    for (ExpertId e : kAllExperts) {
      const NumArray& out = encoder::encode_expert(mg, e, shared, batch).value();
      for (std::size_t s = 0; s < chunk.size(); ++s) {
        const auto seg = batch.segments[s];
        reps[begin + s] = extract(e, slice_rows(out, seg.offset, seg.length), params, chunk[s].mask,
                                  std::move(reps[begin + s]));
      }
    }
  }
  return reps;
}

std::vector<ExpertReps> encode_texts(const encoder::ModelParams& params, const encoder::Vocab& vocab,
                                     std::span<const std::string> texts, std::size_t max_len, std::size_t batch_size) {
  std::vector<encoder::TokenSeq> seqs;
  seqs.reserve(texts.size());
  for (const auto& t : texts) seqs.push_back(encoder::tokenize(t, max_len, vocab));
  return encode_sequences(params, seqs, batch_size);
}

Var lexical_dense(encoder::ModelGraph& mg, Var expert_out, const encoder::PackedBatch& batch) {
  const encoder::ModelParams& p = mg.params();
  return diff::lexical_pool(expert_out, mg.bind(p.token_embedding), mg.bind(p.mlm_bias), batch.valid);
}

Var local_rows(encoder::ModelGraph& mg, Var expert_out, const encoder::PackedBatch& batch) {
  return diff::matmul(diff::rows(expert_out, batch.valid_rows), mg.bind(mg.params().local_projection));
}

Var global_rows(Var expert_out, const encoder::PackedBatch& batch) { return diff::rows(expert_out, batch.cls_rows); }

Var maxsim_scores(Var query_rows, const diff::Segments& query_groups, Var doc_rows, const diff::Segments& doc_groups) {
  Var sims = diff::matmul_nt(query_rows, doc_rows);
  Var best = diff::segment_max_cols(sims, doc_groups);
  return diff::segment_sum_rows(best, query_groups);
}

}  // namespace came::experts
