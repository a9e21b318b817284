#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "came/trainer/checkpoint.hpp"
#include "came/trainer/objective.hpp"
#include "came/trainer/train.hpp"

namespace came::trainer {
namespace {

using diff::NumArray;

encoder::ModelConfig tiny_config(std::size_t vocab_size) {
  encoder::ModelConfig c;
  c.vocab_size = vocab_size;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_shared_layers = 1;
  c.n_expert_layers = 1;
  c.d_local = 4;
  c.max_q_len = 8;
  c.max_d_len = 12;
  c.ff_width = 16;
  return c;
}

struct Toy {
  retrieval::Corpus corpus;
  std::vector<retrieval::Query> queries;
  eval::Qrels qrels;
  encoder::Vocab vocab;
  NegativePools pools;

  Toy() {
    const std::vector<std::string> words = {"red",  "green", "blue",  "cyan",  "gold", "pink",
                                            "gray", "teal",  "olive", "coral", "navy", "plum"};
    for (std::size_t i = 0; i < words.size(); ++i) {
      corpus.add("d" + std::to_string(i), words[i] + " " + words[(i + 1) % words.size()] + " stone");
    }
    for (std::size_t i = 0; i < 6; ++i) {
      queries.push_back({"q" + std::to_string(i), words[i]});
      qrels["q" + std::to_string(i)]["d" + std::to_string(i)] = 1;
    }
    std::vector<std::string> texts;
    for (const auto& d : corpus.docs()) texts.push_back(d.text);
    vocab = encoder::Vocab::build(texts);
    for (const auto& q : queries) {
      for (std::size_t j = 6; j < 12; ++j) pools[q.id].push_back("d" + std::to_string(j));
    }
  }

  TrainingData data() const { return {&corpus, queries, qrels, pools}; }
};

TrainSchedule tiny_schedule() {
  TrainSchedule s;
  s.epochs_bootstrap = 2;
  s.epochs_hard = 1;
  s.batch_size = 2;
  s.negatives = 2;
  s.mine_depth = 3;
  s.seed = 11;
  return s;
}

TEST(Contrastive, SoftmaxExample) {
  diff::Graph g;
  const auto p = candidate_probs(g.input(NumArray::vector({std::log(2.0), 0.0})));
  EXPECT_NEAR(p.value()[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p.value()[1], 1.0 / 3.0, 1e-15);
}

TEST(Contrastive, HalfProbabilityGivesLogTwo) {
  diff::Graph g;
  const auto l = contrastive_loss(g.input(NumArray::vector({1.5, 1.5})), 0);
  EXPECT_NEAR(l.value()[0], std::log(2.0), 1e-15);
  EXPECT_THROW(contrastive_loss(g.input(NumArray::vector({1.0})), 0), diff::ShapeError);
  EXPECT_ANY_THROW(contrastive_loss(g.input(NumArray::vector({1.0, 2.0})), 2));
}

TEST(Contrastive, CandidatesAreBatchTimesGroup) {
  std::vector<TrainingInstance> batch;
  for (int i = 0; i < 4; ++i) {
    const std::string s = std::to_string(i);
    batch.push_back({"q" + s, "t", "p" + s, {"n" + s + "a", "n" + s + "b", "n" + s + "c"}});
  }
  const auto c = in_batch_candidates(batch);
  EXPECT_EQ(c.docs.size(), 4u * (1 + 3));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(c.docs[c.positive[i]], batch[i].positive);
  // Shared documents are counted once.
  batch[1].negatives[0] = batch[0].positive;
  EXPECT_EQ(in_batch_candidates(batch).docs.size(), 15u);
}

TEST(Contrastive, UniformScoresGiveLogCandidates) {
  const Toy toy;
  encoder::ModelParams p = encoder::ModelParams::init(tiny_config(toy.vocab.size()), 1);
  for (diff::Parameter* x : p.all()) x->value.fill(0.0);
  const std::vector<TrainingInstance> batch = {{"q0", "red", "d0", {"d6", "d7"}}, {"q1", "green", "d1", {"d8", "d9"}}};
  diff::Graph g;
  encoder::ModelGraph mg(g, p);
  const auto fwd = forward_batch(mg, toy.vocab, toy.corpus, batch);
  ASSERT_EQ(fwd.candidates.docs.size(), 6u);
  EXPECT_EQ(fwd.scores[0].shape(), (diff::Shape{2, 6}));
  const double l_st = standardized_loss(fwd, 0.0).value()[0];
  EXPECT_NEAR(l_st, 3.0 * std::log(6.0), 1e-12);
  // Identical experts: every weight is 1/3, so the specialized loss is a third.
  EXPECT_NEAR(specialized_loss(fwd, 0.5, 0.0).value()[0], l_st / 3.0, 1e-12);
  for (const auto& r : fwd.ranks) EXPECT_EQ(r, (std::array<std::size_t, 3>{1, 1, 1}));
}

TEST(Ranks, CountsStrictlyHigherCandidates) {
  const std::vector<double> s = {1.0, 2.0, 3.0};
  EXPECT_EQ(rank_of_positive(s, 0), 3u);
  EXPECT_EQ(rank_of_positive(s, 2), 1u);
  const std::vector<double> tie = {2.0, 2.0, 1.0};
  EXPECT_EQ(rank_of_positive(tie, 0), 1u);
  EXPECT_EQ(rank_of_positive(tie, 1), 1u);
}

TEST(CompetitiveWeights, WorkedExample) {
  const auto w = competitive_weights({1, 2, 4}, 0.5);
  // Independent oracle: exp(2), exp(1), exp(0.5), normalised.
  const double z = std::exp(2.0) + std::exp(1.0) + std::exp(0.5);
  EXPECT_NEAR(w.w[0], std::exp(2.0) / z, 1e-15);
  EXPECT_NEAR(w.w[1], std::exp(1.0) / z, 1e-15);
  EXPECT_NEAR(w.w[2], std::exp(0.5) / z, 1e-15);
  EXPECT_NEAR(w.w[0], 0.6285, 5e-5);
  EXPECT_NEAR(w.w[1], 0.2312, 5e-5);
  EXPECT_NEAR(w.w[2], 0.1402, 5e-5);
}

TEST(CompetitiveWeights, Limits) {
  EXPECT_GT(competitive_weights({1, 2, 4}, 0.05).w[0], 0.9999);
  const auto flat = competitive_weights({1, 2, 4}, 1e6);
  for (double x : flat.w) EXPECT_NEAR(x, 1.0 / 3.0, 1e-6);
  const auto eq = competitive_weights({5, 5, 5}, 0.1);
  for (double x : eq.w) EXPECT_EQ(x, 1.0 / 3.0);
  EXPECT_THROW(competitive_weights({1, 2, 3}, 0.0), std::invalid_argument);
  EXPECT_THROW(competitive_weights({0, 2, 3}, 1.0), std::invalid_argument);
}

TEST(CompetitiveWeights, HugeRanksStayFinite) {
  const auto w = competitive_weights({1000000, 1, 1000000}, 1e-3);
  EXPECT_TRUE(std::isfinite(w.w[0]));
  EXPECT_NEAR(w.sum(), 1.0, 1e-12);
  EXPECT_GT(w.w[1], 0.999);
}

TEST(Flops, SingleEntry) {
  diff::Graph g;
  NumArray reps({1, 4});
  reps.at(0, 2) = 2.0;
  EXPECT_EQ(flops_penalty(g.input(reps)).value()[0], 4.0);
}

TEST(Flops, ColumnMeansSquared) {
  diff::Graph g;
  const NumArray reps = NumArray::matrix(2, 3, {1, 0, 2, 3, 0, 0});
  // means (2, 0, 1) -> 4 + 0 + 1
  EXPECT_EQ(flops_penalty(g.input(reps)).value()[0], 5.0);
}

TEST(Flops, MonotoneInEveryEntry) {
  NumArray reps = NumArray::matrix(2, 3, {1, 0, 2, 3, 0.5, 0});
  double prev = 0.0;
  for (int i = 0; i < 6; ++i) {
    diff::Graph g;
    const double v = flops_penalty(g.input(reps)).value()[0];
    EXPECT_GT(v, prev);
    prev = v;
    reps.values()[static_cast<std::size_t>(i)] += 0.25;
  }
}

TEST(Schedule, StandardizedSteps) {
  EXPECT_EQ(standardized_steps(0.2, 150), 30u);
  EXPECT_EQ(standardized_steps(0.2, 151), 31u);
  EXPECT_EQ(standardized_steps(0.0, 150), 0u);
  EXPECT_EQ(standardized_steps(1.0, 150), 150u);
  EXPECT_EQ(steps_per_epoch(9, 4), 3u);
  EXPECT_EQ(steps_per_epoch(8, 4), 2u);
}

TEST(Schedule, RejectsBadValues) {
  TrainSchedule s;
  s.tau = 0.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = TrainSchedule();
  s.standardized_ratio = 1.5;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = TrainSchedule();
  s.batch_size = 0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

std::vector<bool> standardized_flags(const TrainResult& r, char phase) {
  std::vector<bool> out;
  for (const auto& l : r.log) {
    if (l.phase == phase) out.push_back(l.standardized);
  }
  return out;
}

TEST(Train, RatioControlsPhaseA) {
  const Toy toy;
  const auto cfg = tiny_config(toy.vocab.size());
  for (double ratio : {0.0, 0.5, 1.0}) {
    TrainSchedule s = tiny_schedule();
    s.standardized_ratio = ratio;
    const auto r = train(cfg, s, toy.vocab, toy.data());
    ASSERT_FALSE(r.aborted) << r.abort_reason;
    const auto a = standardized_flags(r, 'A');
    ASSERT_EQ(a.size(), 6u);  // 6 queries / batch 2 * 2 epochs
    const auto n = static_cast<std::size_t>(std::count(a.begin(), a.end(), true));
    EXPECT_EQ(n, standardized_steps(ratio, 6));
    for (std::size_t i = 0; i < n; ++i) EXPECT_TRUE(a[i]);
    for (bool b : standardized_flags(r, 'B')) EXPECT_FALSE(b);
  }
}

TEST(Train, AblationIsStandardizedThroughout) {
  const Toy toy;
  TrainSchedule s = tiny_schedule();
  s.specialized = false;
  const auto r = train(tiny_config(toy.vocab.size()), s, toy.vocab, toy.data());
  for (const auto& l : r.log) EXPECT_TRUE(l.standardized);
  for (const auto& iw : r.final_epoch_weights) EXPECT_NEAR(iw.weights.sum(), 1.0, 1e-12);
}

TEST(Train, SameSeedSameCheckpoint) {
  const Toy toy;
  const auto cfg = tiny_config(toy.vocab.size());
  const auto a = train(cfg, tiny_schedule(), toy.vocab, toy.data());
  const auto b = train(cfg, tiny_schedule(), toy.vocab, toy.data());
  EXPECT_EQ(a.checkpoint.serialize(), b.checkpoint.serialize());
  EXPECT_EQ(format_step_log(a.log), format_step_log(b.log));
}

TEST(Mining, PoolExcludesRelevantAndIsBounded) {
  const Toy toy;
  const auto p = encoder::ModelParams::init(tiny_config(toy.vocab.size()), 3);
  std::vector<std::string> warnings;
  const auto pools = mine_hard_negatives(p, toy.vocab, toy.corpus, toy.queries, toy.qrels, 4, &warnings);
  EXPECT_EQ(pools.size(), toy.queries.size());
  for (const auto& [qid, pool] : pools) {
    EXPECT_LE(pool.size(), 3u * 4u);
    EXPECT_GE(pool.size(), 4u - 1u);
    const std::set<std::string> uniq(pool.begin(), pool.end());
    EXPECT_EQ(uniq.size(), pool.size());
    for (const auto& d : pool) EXPECT_FALSE(toy.qrels.at(qid).count(d)) << qid << " " << d;
  }
}

TEST(Checkpoint, SerializeRoundTripIsByteIdentical) {
  const Toy toy;
  const auto r = train(tiny_config(toy.vocab.size()), tiny_schedule(), toy.vocab, toy.data());
  const std::string bytes = r.checkpoint.serialize();
  const Checkpoint back = Checkpoint::deserialize(bytes);
  EXPECT_EQ(back.serialize(), bytes);
  EXPECT_EQ(back.schedule, r.checkpoint.schedule);
  EXPECT_EQ(back.vocab, r.checkpoint.vocab);
  EXPECT_EQ(back.steps_done, r.checkpoint.steps_done);
}

TEST(Checkpoint, CorruptInputIsRejected) {
  const Toy toy;
  Checkpoint ck;
  ck.params = encoder::ModelParams::init(tiny_config(toy.vocab.size()), 1);
  ck.vocab = toy.vocab;
  const std::string bytes = ck.serialize();
  EXPECT_THROW(Checkpoint::deserialize(bytes.substr(0, bytes.size() / 2)), std::runtime_error);
  EXPECT_THROW(Checkpoint::deserialize(bytes + "x"), std::runtime_error);
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(Checkpoint::deserialize(bad), std::runtime_error);
}

}  // namespace
}  // namespace came::trainer
