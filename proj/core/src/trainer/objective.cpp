#include "came/trainer/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "came/experts/experts.hpp"

namespace came::trainer {

using diff::Var;

CandidateSet in_batch_candidates(std::span<const TrainingInstance> batch) {
  if (batch.empty()) throw std::invalid_argument("in_batch_candidates: empty batch");
  CandidateSet c;
  std::unordered_map<std::string, std::size_t> pos;
  const auto add = [&](const std::string& id) {
    auto [it, fresh] = pos.try_emplace(id, c.docs.size());
    if (fresh) c.docs.push_back(id);
    return it->second;
  };
  for (const auto& inst : batch) {
    c.positive.push_back(add(inst.positive));
    for (const auto& n : inst.negatives) {
      if (n == inst.positive) throw std::invalid_argument("training instance " + inst.query_id + ": positive among negatives");
      add(n);
    }
  }
  return c;
}

Var candidate_probs(Var scores) { return diff::softmax(scores, 0); }

Var contrastive_loss(Var scores, std::size_t pos_index) {
  if (scores.shape().size() != 1 || scores.shape()[0] < 2) {
    throw diff::ShapeError("contrastive_loss: need a vector of at least two candidate scores, got " +
                           diff::shape_to_string(scores.shape()));
  }
  if (pos_index >= scores.shape()[0]) throw std::out_of_range("contrastive_loss: positive index out of range");
  return diff::scale(diff::element(diff::log_softmax(scores, 0), pos_index), -1.0);
}

std::size_t rank_of_positive(std::span<const double> scores, std::size_t pos_index) {
  if (pos_index >= scores.size()) throw std::out_of_range("rank_of_positive: positive index out of range");
  const double s = scores[pos_index];
  std::size_t rank = 1;
  for (double x : scores) rank += x > s ? 1 : 0;
  return rank;
}

CompetitiveWeights competitive_weights(const std::array<std::size_t, kNumExperts>& ranks, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("competitive_weights: tau must be positive");
  std::array<double, kNumExperts> z{};
  for (std::size_t e = 0; e < kNumExperts; ++e) {
    if (ranks[e] == 0) throw std::invalid_argument("competitive_weights: ranks start at 1");
    z[e] = (1.0 / static_cast<double>(ranks[e])) / tau;
  }
  const double m = std::max({z[0], z[1], z[2]});
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    total += v;
  }
  CompetitiveWeights out;
  for (std::size_t e = 0; e < kNumExperts; ++e) out.w[e] = z[e] / total;
  return out;
}

Var flops_penalty(Var lexical_reps) {
  return diff::sum(diff::square(diff::mean(lexical_reps, 0)));
}

std::array<double, kNumExperts> BatchForward::mean_losses() const {
  std::array<double, kNumExperts> m{};
  for (const auto& row : losses) {
    for (std::size_t e = 0; e < kNumExperts; ++e) m[e] += row[e].value().item();
  }
  for (double& v : m) v /= static_cast<double>(losses.size());
  return m;
}

namespace {

// Row groups of the valid rows gathered by local_rows, one per sequence.
diff::Segments valid_groups(const encoder::PackedBatch& b) {
  diff::Segments g;
  std::size_t off = 0;
  for (const auto& v : b.valid) {
    g.push_back({off, v.length});
    off += v.length;
  }
  return g;
}

}  // namespace

BatchForward forward_batch(encoder::ModelGraph& mg, const encoder::Vocab& vocab, const retrieval::Corpus& corpus,
                           std::span<const TrainingInstance> batch) {
  BatchForward f;
  f.candidates = in_batch_candidates(batch);
  const auto& cfg = mg.config();

  std::vector<encoder::TokenSeq> qs, ds;
  for (const auto& inst : batch) qs.push_back(encoder::tokenize(inst.query_text, cfg.max_q_len, vocab));
  for (const auto& id : f.candidates.docs) ds.push_back(encoder::tokenize(corpus.text(id), cfg.max_d_len, vocab));
  const encoder::PackedBatch qb = encoder::pack(qs, cfg);
  const encoder::PackedBatch db = encoder::pack(ds, cfg);

  const Var q_shared = encoder::encode_shared(mg, qb);
  const Var d_shared = encoder::encode_shared(mg, db);

  Var q_lex, d_lex;
  for (ExpertId e : kAllExperts) {
    const Var qo = encoder::encode_expert(mg, e, q_shared, qb);
    const Var dout = encoder::encode_expert(mg, e, d_shared, db);
    Var s;
    switch (e) {
      case ExpertId::kLex:
        q_lex = experts::lexical_dense(mg, qo, qb);
        d_lex = experts::lexical_dense(mg, dout, db);
        s = diff::matmul_nt(q_lex, d_lex);
        break;
      case ExpertId::kLoc:
        s = experts::maxsim_scores(experts::local_rows(mg, qo, qb), valid_groups(qb), experts::local_rows(mg, dout, db),
                                   valid_groups(db));
        break;
      case ExpertId::kGlob:
        s = diff::matmul_nt(experts::global_rows(qo, qb), experts::global_rows(dout, db));
        break;
    }
    f.scores[index_of(e)] = s;
  }

  const std::size_t b = batch.size(), u = f.candidates.docs.size();
  f.losses.resize(b);
  f.ranks.resize(b);
  for (std::size_t e = 0; e < kNumExperts; ++e) {
    const Var lsm = diff::log_softmax(f.scores[e], 1);
    const auto& sv = f.scores[e].value();
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t pos = f.candidates.positive[i];
      f.losses[i][e] = diff::scale(diff::element(lsm, i * u + pos), -1.0);
      f.ranks[i][e] = rank_of_positive(std::span<const double>(sv.data() + i * u, u), pos);
    }
  }
  f.flops = diff::scale(diff::add(flops_penalty(q_lex), flops_penalty(d_lex)), 0.5);
  return f;
}

std::vector<CompetitiveWeights> batch_weights(const BatchForward& fwd, double tau) {
  std::vector<CompetitiveWeights> w;
  for (const auto& r : fwd.ranks) w.push_back(competitive_weights(r, tau));
  return w;
}

namespace {

Var weighted_total(const BatchForward& fwd, const std::vector<CompetitiveWeights>& w, double flops_weight) {
  if (w.size() != fwd.losses.size()) throw std::invalid_argument("loss: one weight triple per instance required");
  std::vector<Var> terms;
  std::vector<double> coef;
  const double inv_b = 1.0 / static_cast<double>(fwd.losses.size());
  for (std::size_t i = 0; i < fwd.losses.size(); ++i) {
    for (std::size_t e = 0; e < kNumExperts; ++e) {
      terms.push_back(fwd.losses[i][e]);
      coef.push_back(w[i].w[e] * inv_b);
    }
  }
  terms.push_back(fwd.flops);
  coef.push_back(flops_weight);
  return diff::weighted_sum(terms, coef);
}

}  // namespace

Var standardized_loss(const BatchForward& fwd, double flops_weight) {
  CompetitiveWeights ones;
  ones.w = {1.0, 1.0, 1.0};
  return weighted_total(fwd, std::vector<CompetitiveWeights>(fwd.losses.size(), ones), flops_weight);
}

Var specialized_loss(const BatchForward& fwd, double tau, double flops_weight,
                     const std::optional<std::vector<CompetitiveWeights>>& weights) {
  return weighted_total(fwd, weights ? *weights : batch_weights(fwd, tau), flops_weight);
}

}  // namespace came::trainer
