#include "came/trainer/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "came/retrieval/index.hpp"
#include "came/util/rng.hpp"

namespace came::trainer {

void TrainSchedule::validate() const {
  const auto bad = [](const std::string& what) { throw std::invalid_argument("train schedule: " + what); };
  if (!(tau > 0.0) || !std::isfinite(tau)) bad("tau must be > 0");
  if (!(standardized_ratio >= 0.0 && standardized_ratio <= 1.0)) bad("standardized_ratio must lie in [0, 1]");
  if (epochs_bootstrap + epochs_hard == 0) bad("at least one epoch is required");
  if (batch_size == 0) bad("batch_size must be >= 1");
  if (negatives == 0) bad("negatives must be >= 1");
  if (!(learning_rate > 0.0)) bad("learning_rate must be > 0");
  if (weight_decay < 0.0) bad("weight_decay must be >= 0");
  if (flops_weight < 0.0) bad("flops_weight must be >= 0");
  if (mine_depth == 0) bad("mine_depth must be >= 1");
}

std::size_t steps_per_epoch(std::size_t instances, std::size_t batch_size) {
  return (instances + batch_size - 1) / batch_size;
}

std::size_t standardized_steps(double ratio, std::size_t phase_steps) {
  // Guard against 0.2 * 150 = 30.000000000000004 rounding up to 31.
  const double x = ratio * static_cast<double>(phase_steps);
  const auto n = static_cast<std::size_t>(std::ceil(x - 1e-9));
  return std::min(n, phase_steps);
}

NegativePools mine_hard_negatives(const encoder::ModelParams& params, const encoder::Vocab& vocab,
                                  const retrieval::Corpus& corpus, const std::vector<retrieval::Query>& queries,
                                  const eval::Qrels& qrels, std::size_t depth, std::vector<std::string>* warnings) {
  const auto indexes = retrieval::build_indexes(corpus, params, vocab);
  const retrieval::Searcher searcher(params, vocab, indexes);
  const auto results = searcher.search_all(queries, depth);
  NegativePools pools;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto rel = qrels.find(queries[i].id);
    std::set<std::string> seen;
    std::vector<std::string> pool;
    for (const auto& list : results[i]) {
      for (const auto& d : list.entries) {
        if (rel != qrels.end()) {
          const auto g = rel->second.find(d.doc_id);
          if (g != rel->second.end() && g->second > 0) continue;
        }
        if (seen.insert(d.doc_id).second) pool.push_back(d.doc_id);
      }
    }
    if (pool.empty()) {
      if (warnings != nullptr) warnings->push_back("query " + queries[i].id + ": empty hard-negative pool, skipped");
      continue;
    }
    pools.emplace(queries[i].id, std::move(pool));
  }
  return pools;
}

namespace {

struct Positive {
  std::size_t query;  // index into data.queries
  std::string doc;
};

std::vector<Positive> positives_of(const TrainingData& data, const NegativePools* only_with_pool) {
  std::vector<Positive> out;
  for (std::size_t q = 0; q < data.queries.size(); ++q) {
    const auto& qid = data.queries[q].id;
    if (only_with_pool != nullptr && only_with_pool->count(qid) == 0) continue;
    const auto rel = data.qrels.find(qid);
    if (rel == data.qrels.end()) continue;
    for (const auto& [doc, g] : rel->second) {
      if (g > 0 && data.corpus->find(doc)) out.push_back({q, doc});
    }
  }
  return out;
}

bool is_relevant(const eval::Qrels& qrels, const std::string& qid, const std::string& doc) {
  const auto rel = qrels.find(qid);
  if (rel == qrels.end()) return false;
  const auto g = rel->second.find(doc);
  return g != rel->second.end() && g->second > 0;
}

// `count` distinct negatives from the pool; topped up from the corpus when the pool runs short.
std::vector<std::string> draw_negatives(const TrainingData& data, const std::string& qid,
                                        const std::vector<std::string>* pool, std::size_t count,
                                        std::mt19937_64& rng) {
  std::vector<std::string> cand;
  if (pool != nullptr) {
    for (const auto& d : *pool) {
      if (!is_relevant(data.qrels, qid, d)) cand.push_back(d);
    }
  }
  std::vector<std::string> out;
  if (cand.size() > count) {
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + uniform_index(rng, cand.size() - i);
      std::swap(cand[i], cand[j]);
      out.push_back(cand[i]);
    }
    return out;
  }
  out = cand;
  std::set<std::string> taken(out.begin(), out.end());
  const auto& docs = data.corpus->docs();
  std::size_t guard = 0;
  while (out.size() < count && guard++ < 100 * count + docs.size()) {
    const auto& d = docs[uniform_index(rng, docs.size())].id;
    if (is_relevant(data.qrels, qid, d) || !taken.insert(d).second) continue;
    out.push_back(d);
  }
  if (out.size() < count) throw std::runtime_error("training: corpus too small to draw negatives for query " + qid);
  return out;
}

std::vector<TrainingInstance> make_instances(const TrainingData& data, const std::vector<Positive>& positives,
                                             const NegativePools& pools, std::size_t negatives, std::mt19937_64& rng) {
  std::vector<TrainingInstance> out;
  out.reserve(positives.size());
  for (const auto& p : positives) {
    const auto& q = data.queries[p.query];
    const auto it = pools.find(q.id);
    out.push_back({q.id, q.text, p.doc, draw_negatives(data, q.id, it == pools.end() ? nullptr : &it->second, negatives, rng)});
  }
  return out;
}

}  // namespace

TrainResult train(const encoder::ModelConfig& config, const TrainSchedule& schedule, const encoder::Vocab& vocab,
                  const TrainingData& data, const ProgressFn& progress) {
  config.validate();
  schedule.validate();
  if (data.corpus == nullptr || data.corpus->empty()) throw std::invalid_argument("train: empty corpus");
  if (config.vocab_size != vocab.size()) throw std::invalid_argument("train: config vocab_size differs from the vocab");

  TrainResult res;
  Checkpoint& ck = res.checkpoint;
  ck.params = encoder::ModelParams::init(config, schedule.seed);
  ck.vocab = vocab;
  ck.schedule = schedule;
  ck.seed = schedule.seed;

  const auto positives_a = positives_of(data, nullptr);
  if (positives_a.empty()) throw std::invalid_argument("train: no training query has a relevant document in the corpus");
  const std::size_t spe_a = steps_per_epoch(positives_a.size(), schedule.batch_size);
  const std::size_t steps_a = spe_a * schedule.epochs_bootstrap;
  const std::size_t st_steps = schedule.specialized ? standardized_steps(schedule.standardized_ratio, steps_a) : steps_a;
  const std::size_t steps_b_planned = spe_a * schedule.epochs_hard;

  diff::AdamWConfig ocfg;
  ocfg.learning_rate = schedule.learning_rate;
  ocfg.weight_decay = schedule.weight_decay;
  ocfg.final_lr_fraction = 0.1;
  ocfg.total_steps = static_cast<std::int64_t>(steps_a + steps_b_planned);
  diff::AdamW opt(ocfg);
  ck.optimizer_config = ocfg;
  ck.total_steps = steps_a + steps_b_planned;

  std::vector<diff::Parameter*> params = ck.params.all();
  std::size_t step = 0;
  const std::size_t total_epochs = schedule.epochs_bootstrap + schedule.epochs_hard;
  std::size_t epoch_no = 0;

  const auto run_epoch = [&](char phase, std::size_t epoch_in_phase, const std::vector<Positive>& positives,
                             const NegativePools& pools) -> bool {
    ++epoch_no;
    const bool last_epoch = epoch_no == total_epochs;
    const std::string tag = std::string(1, phase) + "-" + std::to_string(epoch_in_phase);
    auto neg_rng = make_stream(schedule.seed, "negatives-" + (schedule.resample_negatives ? tag : std::string(1, phase)));
    auto order_rng = make_stream(schedule.seed, "order-" + tag);
    std::vector<TrainingInstance> inst = make_instances(data, positives, pools, schedule.negatives, neg_rng);
    shuffle(std::span<TrainingInstance>(inst), order_rng);

    for (std::size_t begin = 0; begin < inst.size(); begin += schedule.batch_size) {
      const std::size_t end = std::min(inst.size(), begin + schedule.batch_size);
      const std::span<const TrainingInstance> batch(inst.data() + begin, end - begin);
      const bool standardized = !schedule.specialized || (phase == 'A' && step < st_steps);

      ck.params.zero_grad();
      diff::Graph g;
      encoder::ModelGraph mg(g, ck.params);
      const BatchForward fwd = forward_batch(mg, vocab, *data.corpus, batch);
      const auto weights = batch_weights(fwd, schedule.tau);
      const diff::Var loss = standardized ? standardized_loss(fwd, schedule.flops_weight)
                                          : specialized_loss(fwd, schedule.tau, schedule.flops_weight, weights);

      StepLog row;
      row.step = step + 1;
      row.phase = phase;
      row.standardized = standardized;
      row.loss = fwd.mean_losses();
      for (const auto& w : weights) {
        for (std::size_t e = 0; e < kNumExperts; ++e) row.mean_weight[e] += w.w[e] / static_cast<double>(weights.size());
      }
      row.flops = fwd.flops.value().item();
      row.total = loss.value().item();
      if (!std::isfinite(row.total)) {
        res.aborted = true;
        res.abort_reason = "non-finite loss at step " + std::to_string(step + 1);
        return false;
      }
      if (last_epoch) {
        for (std::size_t i = 0; i < batch.size(); ++i) res.final_epoch_weights.push_back({batch[i].query_id, weights[i]});
      }

      g.backward(loss);
      if (opt.step(params) == diff::StepOutcome::kSkippedNonFinite) {
        res.warnings.push_back("step " + std::to_string(step + 1) + ": non-finite gradient, update skipped");
      }
      ++step;
      ck.steps_done = step;
      res.log.push_back(row);
      if (progress) progress(row);
    }
    return true;
  };

  bool ok = true;
  for (std::size_t e = 0; ok && e < schedule.epochs_bootstrap; ++e) ok = run_epoch('A', e, positives_a, data.bootstrap);

  if (ok && schedule.epochs_hard > 0) {
    const NegativePools mined = mine_hard_negatives(ck.params, vocab, *data.corpus, data.queries, data.qrels,
                                                    schedule.mine_depth, &res.warnings);
    const auto positives_b = positives_of(data, &mined);
    for (std::size_t e = 0; ok && e < schedule.epochs_hard; ++e) ok = run_epoch('B', e, positives_b, mined);
  }

  ck.optimizer_state = opt.state();
  return res;
}

std::string format_step_log(const std::vector<StepLog>& log) {
  std::string out = "step,stage,L_lex,L_loc,L_glob,w_lex,w_loc,w_glob,phase,flops,total\n";
  char buf[512];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof(buf), "%zu,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%c,%.9g,%.9g\n", r.step,
                  r.standardized ? "standardized" : "specialized", r.loss[0], r.loss[1], r.loss[2], r.mean_weight[0],
                  r.mean_weight[1], r.mean_weight[2], r.phase, r.flops, r.total);
    out += buf;
  }
  return out;
}

std::string format_instance_weights(const std::vector<InstanceWeights>& weights) {
  std::string out = "qid,w_lex,w_loc,w_glob\n";
  char buf[256];
  for (const auto& w : weights) {
    std::snprintf(buf, sizeof(buf), ",%.9g,%.9g,%.9g\n", w.weights.w[0], w.weights.w[1], w.weights.w[2]);
    out += w.query_id + buf;
  }
  return out;
}

}  // namespace came::trainer
