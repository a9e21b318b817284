#include <benchmark/benchmark.h>

#include <random>

#include "came/cli/config.hpp"
#include "came/cli/pipeline.hpp"
#include "came/diff/num_array.hpp"
#include "came/diff/optimizer.hpp"
#include "came/retrieval/bm25.hpp"
#include "came/retrieval/index.hpp"
#include "came/synthgen/synthgen.hpp"
#include "came/trainer/objective.hpp"

namespace {

using namespace came;

// Small dataset and a default-size model, built once.
struct World {
  synthgen::Dataset data;
  encoder::Vocab vocab;
  encoder::ModelParams params;

  World() {
    synthgen::GenSpec spec;
    spec.docs_per_family = 300;
    spec.queries_per_family = 60;
    data = synthgen::generate(spec);
    vocab = cli::build_vocab(data.corpus, data.train);
    encoder::ModelConfig mc = cli::RunConfig().model;
    mc.vocab_size = vocab.size();
    params = encoder::ModelParams::init(mc, 1);
  }
};

World& world() {
  static World w;
  return w;
}

void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> dist;
  std::vector<double> a(n * n), b(n * n), c(n * n);
  for (double& x : a) x = dist(rng);
  for (double& x : b) x = dist(rng);
  for (auto _ : state) {
    diff::kernels::gemm_nn(n, n, n, a.data(), b.data(), c.data(), false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}
BENCHMARK(BM_Gemm)->Arg(32)->Arg(64)->Arg(128);

void BM_EncodeDocuments(benchmark::State& state) {
  auto& w = world();
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < 64; ++i) texts.push_back(w.data.corpus[i].text);
  for (auto _ : state) {
    auto reps = experts::encode_texts(w.params, w.vocab, texts, w.params.config.max_d_len,
                                      static_cast<std::size_t>(state.range(0)));
    benchmark::DoNotOptimize(reps.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * texts.size()));
}
BENCHMARK(BM_EncodeDocuments)->Arg(1)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  auto& w = world();
  encoder::ModelParams params = w.params;
  const auto negatives = cli::bm25_negatives(w.data.corpus, w.data.train, w.data.qrels, 20);
  std::vector<trainer::TrainingInstance> batch;
  for (const auto& q : w.data.train) {
    const auto pool = negatives.find(q.id);
    if (pool == negatives.end() || pool->second.size() < 3) continue;
    batch.push_back({q.id, q.text, w.data.qrels.at(q.id).begin()->first,
                     {pool->second[0], pool->second[1], pool->second[2]}});
    if (batch.size() == 8) break;
  }
  diff::AdamW opt;
  auto all = params.all();
  const bool specialized = state.range(0) != 0;
  for (auto _ : state) {
    diff::Graph g;
    encoder::ModelGraph mg(g, params);
    const auto fwd = trainer::forward_batch(mg, w.vocab, w.data.corpus, batch);
    g.backward(specialized ? trainer::specialized_loss(fwd, 0.5, 0.01) : trainer::standardized_loss(fwd, 0.01));
    benchmark::DoNotOptimize(opt.step(all));
  }
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_ExpertSearch(benchmark::State& state) {
  auto& w = world();
  static const auto indexes = retrieval::build_indexes(w.data.corpus, w.params, w.vocab);
  const retrieval::Searcher searcher(w.params, w.vocab, indexes);
  const auto expert = static_cast<ExpertId>(state.range(0));
  std::size_t i = 0;
  for (auto _ : state) {
    auto l = searcher.search_one(expert, w.data.test[i++ % w.data.test.size()], 100);
    benchmark::DoNotOptimize(l.entries.data());
  }
  state.SetLabel(std::string(to_string(expert)));
}
BENCHMARK(BM_ExpertSearch)->DenseRange(0, 2)->Unit(benchmark::kMicrosecond);

void BM_Bm25TopK(benchmark::State& state) {
  auto& w = world();
  const retrieval::Bm25Index bm(w.data.corpus);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& q = w.data.train[i++ % w.data.train.size()];
    auto l = bm.topk(q.id, q.text, 100);
    benchmark::DoNotOptimize(l.entries.data());
  }
}
BENCHMARK(BM_Bm25TopK)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
