#include "came/cli/pipeline.hpp"

#include <chrono>
#include <set>

#include "came/retrieval/bm25.hpp"

namespace came::cli {

encoder::Vocab build_vocab(const retrieval::Corpus& corpus, std::span<const retrieval::Query> queries) {
  std::vector<std::string> texts;
  texts.reserve(corpus.size() + queries.size());
  for (const auto& d : corpus.docs()) texts.push_back(d.text);
  for (const auto& q : queries) texts.push_back(q.text);
  return encoder::Vocab::build(texts);
}

trainer::NegativePools bm25_negatives(const retrieval::Corpus& corpus, const std::vector<retrieval::Query>& queries,
                                      const eval::Qrels& qrels, std::size_t depth) {
  const retrieval::Bm25Index bm25(corpus);
  trainer::NegativePools pools;
  for (const auto& q : queries) {
    const auto rel = qrels.find(q.id);
    std::vector<std::string> pool;
    for (const auto& e : bm25.topk(q.id, q.text, depth).entries) {
      const bool relevant = rel != qrels.end() && rel->second.count(e.doc_id) != 0 && rel->second.at(e.doc_id) > 0;
      if (!relevant) pool.push_back(e.doc_id);
    }
    if (!pool.empty()) pools.emplace(q.id, std::move(pool));
  }
  return pools;
}

std::vector<retrieval::ExpertLists> retrieve(const encoder::ModelParams& params, const encoder::Vocab& vocab,
                                             const std::array<retrieval::ExpertIndex, kNumExperts>& indexes,
                                             const std::vector<retrieval::Query>& queries, std::size_t k) {
  const retrieval::Searcher searcher(params, vocab, indexes);
  return searcher.search_all(queries, k);
}

ExperimentOutcome evaluate_model(const encoder::ModelParams& params, const encoder::Vocab& vocab,
                                 const synthgen::Dataset& data, const std::vector<retrieval::Query>& queries,
                                 std::size_t k, retrieval::FusionMethod fusion) {
  ExperimentOutcome out;
  const auto indexes = retrieval::build_indexes(data.corpus, params, vocab);
  const auto lists = retrieve(params, vocab, indexes, queries, k);

  std::vector<RankedList> fused;
  std::array<std::vector<RankedList>, kNumExperts> per_expert;
  for (const auto& l : lists) {
    fused.push_back(retrieval::fuse(fusion, l, k));
    for (std::size_t e = 0; e < kNumExperts; ++e) per_expert[e].push_back(l[e]);
  }
  out.fused_mrr = eval::mrr_at_k(fused, data.qrels, 10).mean;
  for (std::size_t e = 0; e < kNumExperts; ++e) out.expert_mrr[e] = eval::mrr_at_k(per_expert[e], data.qrels, 10).mean;

  for (synthgen::Family fam : synthgen::kAllFamilies) {
    std::vector<RankedList> f_fused;
    std::array<std::vector<RankedList>, kNumExperts> f_expert;
    for (std::size_t i = 0; i < queries.size(); ++i) {
      const auto it = data.families.find(queries[i].id);
      if (it == data.families.end() || it->second != fam) continue;
      f_fused.push_back(fused[i]);
      for (std::size_t e = 0; e < kNumExperts; ++e) f_expert[e].push_back(lists[i][e]);
    }
    if (f_fused.empty()) continue;
    auto& row = out.family_mrr[fam];
    row[0] = eval::mrr_at_k(f_fused, data.qrels, 10).mean;
    for (std::size_t e = 0; e < kNumExperts; ++e) row[e + 1] = eval::mrr_at_k(f_expert[e], data.qrels, 10).mean;
  }

  const std::array<std::pair<std::size_t, std::size_t>, 3> pairs = {{{0, 1}, {0, 2}, {1, 2}}};
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    double acc = 0.0;
    for (const auto& l : lists) {
      const auto a = eval::doc_ids(l[pairs[p].first], 100);
      const auto b = eval::doc_ids(l[pairs[p].second], 100);
      acc += eval::rbo(a, b, 0.9);
    }
    out.rbo[p] = lists.empty() ? 0.0 : acc / static_cast<double>(lists.size());
  }

  return out;
}

ExperimentOutcome run_experiment(const synthgen::Dataset& data, const std::vector<retrieval::Query>& eval_queries,
                                 const ExperimentSetup& setup, trainer::TrainResult* trained) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentOutcome out;
  const encoder::Vocab vocab = build_vocab(data.corpus, data.train);
  encoder::ModelConfig config = setup.model;
  config.vocab_size = vocab.size();

  trainer::TrainingData td;
  td.corpus = &data.corpus;
  td.queries = data.train;
  td.qrels = data.qrels;
  td.bootstrap = bm25_negatives(data.corpus, data.train, data.qrels, setup.schedule.mine_depth);
  trainer::TrainResult res = trainer::train(config, setup.schedule, vocab, td);
  out.warnings = res.warnings;
  if (res.aborted) out.warnings.push_back("training aborted: " + res.abort_reason);

  ExperimentOutcome eval = evaluate_model(res.checkpoint.params, vocab, data, eval_queries, setup.k, setup.fusion);
  eval.warnings.insert(eval.warnings.begin(), out.warnings.begin(), out.warnings.end());
  out = std::move(eval);
  std::map<synthgen::Family, std::size_t> counts;
  for (const auto& w : res.final_epoch_weights) {
    const auto fam = data.families.at(w.query_id);
    auto& acc = out.family_weights[fam];
    for (std::size_t e = 0; e < kNumExperts; ++e) acc[e] += w.weights.w[e];
    ++counts[fam];
  }
  for (auto& [fam, acc] : out.family_weights) {
    for (double& v : acc) v /= static_cast<double>(counts[fam]);
  }

  if (trained != nullptr) *trained = std::move(res);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace came::cli
