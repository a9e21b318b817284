#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "came/encoder/fingerprint.hpp"
#include "came/retrieval/bm25.hpp"
#include "came/retrieval/fusion.hpp"
#include "came/retrieval/index.hpp"
#include "came/retrieval/run_io.hpp"
#include "came/synthgen/synthgen.hpp"
#include "came/util/rng.hpp"
#include "oracles.hpp"

namespace came::retrieval {
namespace {

namespace fs = std::filesystem;

RankedList list(std::string qid, std::vector<ScoredDoc> entries, std::size_t k) {
  RankedList l;
  l.query_id = std::move(qid);
  l.entries = std::move(entries);
  l.k = k;
  l.kth_score = l.entries.empty() ? 0.0 : l.entries.back().score;
  return l;
}

double fused_score(const RankedList& l, std::string_view doc) {
  for (const auto& e : l.entries) {
    if (e.doc_id == doc) return e.score;
  }
  ADD_FAILURE() << "document " << doc << " not in fused list";
  return 0.0;
}

TEST(Bm25, HandComputedScores) {
  Corpus c;
  c.add("d1", "a b");
  c.add("d2", "a c c");
  c.add("d3", "d");
  const Bm25Index bm(c);
  // N = 3, avgdl = 2, k1 = 0.9, b = 0.4.
  const double idf_c = std::log(1.0 + 2.5 / 1.5);
  const double idf_a = std::log(1.0 + 1.5 / 2.5);
  EXPECT_DOUBLE_EQ(bm.idf("c"), idf_c);
  EXPECT_DOUBLE_EQ(bm.idf("a"), idf_a);
  const double norm_d2 = 0.9 * (1 - 0.4 + 0.4 * 3.0 / 2.0);
  const double c_in_d2 = idf_c * 2 * 1.9 / (2 + norm_d2);
  const double a_in_d2 = idf_a * 1 * 1.9 / (1 + norm_d2);
  const double a_in_d1 = idf_a * 1.9 / (1 + 0.9);
  EXPECT_NEAR(bm.score("c", 1), c_in_d2, 1e-14);
  EXPECT_NEAR(bm.score("a c", 1), a_in_d2 + c_in_d2, 1e-14);
  EXPECT_NEAR(bm.score("a c", 0), a_in_d1, 1e-14);
  EXPECT_EQ(bm.score("a c", 2), 0.0);

  const auto top = bm.topk("q", "A, c!", 10);
  ASSERT_EQ(top.entries.size(), 2u);
  EXPECT_EQ(top.entries[0].doc_id, "d2");
  EXPECT_EQ(top.entries[1].doc_id, "d1");
  EXPECT_TRUE(bm.topk("q", "zzz", 10).entries.empty());
}

TEST(Bm25, RepeatedQueryTermsCountOnce) {
  Corpus c;
  c.add("d1", "x y");
  c.add("d2", "y z");
  const Bm25Index bm(c);
  EXPECT_EQ(bm.score("x x x", 0), bm.score("x", 0));
}

class IndexFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    synthgen::GenSpec spec;
    spec.docs_per_family = 40;
    spec.queries_per_family = 10;
    spec.dev_queries_per_family = 2;
    data_ = new synthgen::Dataset(synthgen::generate(spec));
    std::vector<std::string> texts;
    for (const auto& d : data_->corpus.docs()) texts.push_back(d.text);
    vocab_ = new encoder::Vocab(encoder::Vocab::build(texts));
    encoder::ModelConfig c;
    c.vocab_size = vocab_->size();
    c.d_model = 16;
    c.n_heads = 2;
    c.d_local = 8;
    c.max_q_len = 10;
    c.max_d_len = 32;
    c.ff_width = 32;
    params_ = new encoder::ModelParams(encoder::ModelParams::init(c, 17));
    indexes_ = new std::array<ExpertIndex, kNumExperts>(build_indexes(data_->corpus, *params_, *vocab_, 7));
  }
  static void TearDownTestSuite() {
    delete indexes_;
    delete params_;
    delete vocab_;
    delete data_;
  }

  static synthgen::Dataset* data_;
  static encoder::Vocab* vocab_;
  static encoder::ModelParams* params_;
  static std::array<ExpertIndex, kNumExperts>* indexes_;
};

synthgen::Dataset* IndexFixture::data_ = nullptr;
encoder::Vocab* IndexFixture::vocab_ = nullptr;
encoder::ModelParams* IndexFixture::params_ = nullptr;
std::array<ExpertIndex, kNumExperts>* IndexFixture::indexes_ = nullptr;

TEST_F(IndexFixture, TopKEqualsBruteForce) {
  const Searcher searcher(*params_, *vocab_, *indexes_);
  const std::size_t n = data_->corpus.size();
  for (std::size_t qi = 0; qi < 6; ++qi) {
    const Query& q = data_->test[qi * data_->test.size() / 6];
    for (ExpertId e : kAllExperts) {
      const auto oracle = testing::brute_force_ranking(e, q.text, data_->corpus, *params_, *vocab_);
      for (std::size_t k : {std::size_t{10}, n}) {
        const RankedList got = searcher.search_one(e, q, k);
        const std::size_t expect_len = (e == ExpertId::kLex && got.entries.empty()) ? 0 : std::min(k, n);
        ASSERT_EQ(got.entries.size(), expect_len) << to_string(e);
        for (std::size_t i = 0; i < got.entries.size(); ++i) {
          EXPECT_EQ(got.entries[i], oracle[i]) << to_string(e) << " rank " << i;
        }
      }
    }
  }
}

TEST_F(IndexFixture, LargerKExtendsSmallerK) {
  const Searcher searcher(*params_, *vocab_, *indexes_);
  const Query& q = data_->test.front();
  for (ExpertId e : kAllExperts) {
    const auto small = searcher.search_one(e, q, 5).entries;
    const auto large = searcher.search_one(e, q, 50).entries;
    ASSERT_LE(small.size(), large.size());
    for (std::size_t i = 0; i < small.size(); ++i) EXPECT_EQ(small[i], large[i]);
  }
}

TEST_F(IndexFixture, BatchedSearchMatchesSingle) {
  const Searcher searcher(*params_, *vocab_, *indexes_);
  const auto batched = searcher.search_all(data_->test, 20);
  for (std::size_t i = 0; i < data_->test.size(); ++i) {
    EXPECT_EQ(batched[i], searcher.search(data_->test[i], 20));
  }
}

TEST_F(IndexFixture, SerializeRoundTripAndHashCheck) {
  const auto& idx = (*indexes_)[1];
  const std::string bytes = idx.serialize();
  const ExpertIndex back = ExpertIndex::deserialize(bytes, idx.checkpoint_hash());
  EXPECT_EQ(back, idx);
  EXPECT_EQ(back.serialize(), bytes);
  EXPECT_THROW(ExpertIndex::deserialize(bytes, idx.checkpoint_hash() ^ 1), std::runtime_error);
}

TEST_F(IndexFixture, SearcherRejectsForeignIndexes) {
  encoder::ModelParams other = encoder::ModelParams::init(params_->config, 18);
  EXPECT_NE(encoder::fingerprint(other, *vocab_), encoder::fingerprint(*params_, *vocab_));
  EXPECT_THROW(Searcher(other, *vocab_, *indexes_), std::runtime_error);
}

TEST(FuseSum, AllPresent) {
  const ExpertLists l = {list("q", {{"a", 1.0}}, 1), list("q", {{"a", 2.0}}, 1), list("q", {{"a", 3.0}}, 1)};
  EXPECT_EQ(fused_score(fuse_sum(l, 1), "a"), 6.0);
}

TEST(FuseSum, MissingDocTakesKthScore) {
  const ExpertLists l = {list("q", {{"a", 1.0}, {"b", 0.5}}, 2), list("q", {{"a", 2.0}, {"b", 1.0}}, 2),
                         list("q", {{"z", 0.9}, {"w", 0.5}}, 2)};
  const auto f = fuse_sum(l, 4);
  EXPECT_EQ(fused_score(f, "a"), 3.5);
  // z and w are missing from the first two lists: 0.5 + 1.0 fallbacks.
  EXPECT_EQ(fused_score(f, "z"), 0.5 + 1.0 + 0.9);
  for (const auto& e : f.entries) EXPECT_TRUE(e.doc_id == "a" || e.doc_id == "b" || e.doc_id == "z" || e.doc_id == "w");
}

TEST(FuseSum, IdenticalListsKeepOrder) {
  const RankedList one = list("q", {{"c", 3.0}, {"a", 2.0}, {"b", 1.0}}, 3);
  const auto f = fuse_sum({one, one, one}, 3);
  ASSERT_EQ(f.entries.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(f.entries[i].doc_id, one.entries[i].doc_id);
}

TEST(FuseVariants, NormSumConstantExpertGivesHalf) {
  const ExpertLists l = {list("q", {{"a", 3.0}, {"b", 1.0}}, 2), list("q", {{"a", 5.0}, {"b", 1.0}}, 2),
                         list("q", {{"a", 2.0}, {"b", 2.0}}, 2)};
  const auto f = fuse(FusionMethod::kNormSum, l, 2);
  EXPECT_EQ(fused_score(f, "a"), 2.5);
  EXPECT_EQ(fused_score(f, "b"), 0.5);
  const auto m = fuse(FusionMethod::kNormMax, l, 2);
  EXPECT_EQ(fused_score(m, "a"), 1.0);
  EXPECT_EQ(fused_score(m, "b"), 0.5);
}

TEST(FuseVariants, ReciprocalRank) {
  const ExpertLists l = {list("q", {{"a", 9.0}, {"b", 8.0}}, 2), list("q", {{"b", 9.0}, {"a", 8.0}}, 2),
                         list("q", {{"c", 1.0}}, 2)};
  EXPECT_EQ(fused_score(fuse(FusionMethod::kSumRR, l, 3), "a"), 1.5);
  EXPECT_EQ(fused_score(fuse(FusionMethod::kMaxRR, l, 3), "a"), 1.0);
  const ExpertLists single = {list("q", {{"a", 2.0}, {"b", 1.0}}, 2), list("q", {}, 2), list("q", {}, 2)};
  EXPECT_EQ(fuse(FusionMethod::kSumRR, single, 2), fuse(FusionMethod::kMaxRR, single, 2));
}

TEST(FuseVariants, LinearUsesWeights) {
  const ExpertLists l = {list("q", {{"a", 1.0}}, 1), list("q", {{"a", 2.0}}, 1), list("q", {{"a", 4.0}}, 1)};
  EXPECT_EQ(fused_score(fuse(FusionMethod::kLinear, l, 1, FusionWeights{0.5, 0.25, 0.25}), "a"), 2.0);
  EXPECT_THROW(fuse(FusionMethod::kLinear, l, 1), std::invalid_argument);
}

TEST(FuseVariants, ParseMethodNames) {
  EXPECT_EQ(parse_fusion_method("NormSum"), FusionMethod::kNormSum);
  EXPECT_EQ(parse_fusion_method("maxrr"), FusionMethod::kMaxRR);
  EXPECT_THROW(parse_fusion_method("median"), std::invalid_argument);
}

std::vector<ExpertLists> linear_dev(bool duplicate) {
  auto rng = make_stream(3, "linear");
  std::uniform_real_distribution<double> near(0.98, 0.99), wide(0.0, 10.0);
  std::vector<ExpertLists> dev;
  for (int q = 0; q < 30; ++q) {
    const std::string qid = "q" + std::to_string(q);
    std::vector<ScoredDoc> perfect = {{"rel", 1.0}}, noise1, noise2;
    for (int d = 0; d < 9; ++d) perfect.push_back({"n" + std::to_string(d), near(rng)});
    for (int d = 0; d < 9; ++d) noise1.push_back({"n" + std::to_string(d), wide(rng)});
    noise1.push_back({"rel", wide(rng) * 0.1});
    for (int d = 0; d < 9; ++d) noise2.push_back({"n" + std::to_string(d), wide(rng)});
    noise2.push_back({"rel", wide(rng) * 0.1});
    if (duplicate) noise2 = noise1;
    const auto sorted = [&](std::vector<ScoredDoc> v) { return make_ranked_list(qid, std::move(v), 10); };
    dev.push_back({sorted(perfect), sorted(noise1), sorted(noise2)});
  }
  return dev;
}

eval::Qrels linear_qrels() {
  eval::Qrels qr;
  for (int q = 0; q < 30; ++q) qr["q" + std::to_string(q)]["rel"] = 1;
  return qr;
}

TEST(LinearFusion, ConcentratesOnPerfectExpert) {
  const auto w = fit_linear_fusion(linear_dev(false), linear_qrels());
  EXPECT_GE(w[0], 0.9);
  EXPECT_NEAR(w[0] + w[1] + w[2], 1.0, 1e-12);
}

TEST(LinearFusion, DuplicateExpertsGetSymmetricWeights) {
  const auto w = fit_linear_fusion(linear_dev(true), linear_qrels());
  EXPECT_LE(std::abs(w[1] - w[2]), 0.01 + 1e-12);
  EXPECT_THROW(fit_linear_fusion({}, linear_qrels()), std::invalid_argument);
}

std::vector<RankedList> sample_run() {
  return {list("q1", {{"d3", 2.0 / 3.0}, {"d1", 0.1}, {"d2", -1e-7}}, 3), list("q2", {{"d9", 12.5}}, 3),
          list("q10", {{"d1", 1e-20}, {"d2", 1e-21}}, 2)};
}

TEST(RunIo, FormatParseFormatIsByteIdentical) {
  const std::string text = format_run(sample_run(), "CAME-fused-0123abcd");
  EXPECT_EQ(format_run(parse_run(text), "CAME-fused-0123abcd"), text);
  EXPECT_NE(text.find("q1 Q0 d3 1 0.666667 CAME-fused-0123abcd\n"), std::string::npos);
}

TEST(RunIo, SidecarsRestoreExactScores) {
  const fs::path dir = fs::temp_directory_path() / ("came_runio_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const auto lists = sample_run();
  write_run_files(dir / "run.txt", lists, "t");
  const auto back = read_run_files(dir / "run.txt");
  ASSERT_EQ(back.size(), lists.size());
  for (std::size_t i = 0; i < lists.size(); ++i) {
    EXPECT_EQ(back[i].entries, lists[i].entries);
    EXPECT_EQ(back[i].kth_score, lists[i].kth_score);
  }
  // Without sidecars only the six-decimal scores survive.
  fs::remove(exact_scores_path(dir / "run.txt"));
  EXPECT_NE(read_run_files(dir / "run.txt")[0].entries[0].score, lists[0].entries[0].score);
  fs::remove_all(dir);
}

TEST(RunIo, MalformedLinesAreRejected) {
  EXPECT_THROW(parse_run("q1 Q0 d1 1 0.5\n"), std::runtime_error);
  EXPECT_THROW(parse_run("q1 Q0 d1 x 0.5 t\n"), std::runtime_error);
  EXPECT_EQ(run_tag("lex", "abcd1234"), "CAME-lex-abcd1234");
}

}  // namespace
}  // namespace came::retrieval
