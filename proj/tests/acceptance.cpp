// End-to-end acceptance run: one PASS/FAIL line per criterion, details
// indented below it. Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "came/cli/commands.hpp"
#include "came/cli/config.hpp"
#include "came/cli/experiments.hpp"
#include "came/cli/gradcheck.hpp"
#include "came/cli/pipeline.hpp"
#include "came/eval/metrics.hpp"
#include "came/retrieval/bm25.hpp"
#include "came/retrieval/fusion.hpp"
#include "came/retrieval/index.hpp"
#include "came/retrieval/run_io.hpp"
#include "came/synthgen/synthgen.hpp"
#include "came/trainer/checkpoint.hpp"
#include "came/trainer/objective.hpp"
#include "came/util/binary_io.hpp"
#include "came/util/rng.hpp"
#include "oracles.hpp"

namespace {

using namespace came;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = true;
  std::vector<std::string> details;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void note(const std::string& what) { details.push_back("     " + what); }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// Shared state so the expensive pieces run once.
struct Shared {
  std::optional<synthgen::Dataset> full;  // default generator settings
  std::optional<cli::SpecializationStudy> study;

  const synthgen::Dataset& dataset() {
    if (!full) full = synthgen::generate(synthgen::GenSpec{});
    return *full;
  }
};

// 1. Gradients of both losses against central differences.
Verdict criterion1() {
  Verdict v;
  const auto t = Clock::now();
  const auto out = cli::run_gradcheck(cli::GradCheckSetup{});
  const double s = seconds_since(t);
  v.check(out.standardized.pass, fmt("standardized loss: max rel err %.3e over %zu values", out.standardized.max_rel_err,
                                     out.standardized.checked));
  v.check(out.specialized.pass, fmt("specialized loss: max rel err %.3e over %zu values", out.specialized.max_rel_err,
                                    out.specialized.checked));
  v.check(s < 60.0, fmt("runtime %.1f s (< 60)", s));
  return v;
}

// 2. Competitive weight properties.
Verdict criterion2() {
  Verdict v;
  auto rng = make_stream(2024, "acceptance-weights");
  std::uniform_int_distribution<std::size_t> rank(1, 32);
  std::size_t sum_bad = 0, uniform_bad = 0, sharp_checked = 0, sharp_bad = 0, invariance_bad = 0;
  double worst_sum = 0.0, worst_sharp = 1.0, other_sharp_min = 1.0;
  std::size_t other_distinct = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::array<std::size_t, 3> r = {rank(rng), rank(rng), rank(rng)};
    for (double tau : {0.1, 0.5, 2.0, 10.0}) {
      const auto w = trainer::competitive_weights(r, tau);
      const double err = std::abs(w.sum() - 1.0);
      worst_sum = std::max(worst_sum, err);
      sum_bad += err > 1e-12;
      const std::size_t same = r[0];
      const auto u = trainer::competitive_weights({same, same, same}, tau);
      uniform_bad += !(u.w[0] == u.w[1] && u.w[1] == u.w[2] && std::abs(u.w[0] - 1.0 / 3.0) <= 1e-15);
    }
    const bool distinct = r[0] != r[1] && r[1] != r[2] && r[0] != r[2];
    if (distinct) {
      const auto w = trainer::competitive_weights(r, 0.05);
      const double mx = std::max({w.w[0], w.w[1], w.w[2]});
      if (std::min({r[0], r[1], r[2]}) == 1) {
        ++sharp_checked;
        worst_sharp = std::min(worst_sharp, mx);
        sharp_bad += mx < 0.99;
      } else {
        ++other_distinct;
        other_sharp_min = std::min(other_sharp_min, mx);
      }
    }
  }
  // Guarantee enough sharpness cases: every permutation of a few distinct
  // triples with a first-ranked expert.
  for (std::size_t a = 2; a <= 32; ++a) {
    for (std::size_t b = a + 1; b <= 32; b += 5) {
      std::array<std::size_t, 3> r = {1, a, b};
      std::sort(r.begin(), r.end());
      do {
        const auto w = trainer::competitive_weights(r, 0.05);
        const double mx = std::max({w.w[0], w.w[1], w.w[2]});
        ++sharp_checked;
        worst_sharp = std::min(worst_sharp, mx);
        sharp_bad += mx < 0.99;
      } while (std::next_permutation(r.begin(), r.end()));
    }
  }
  v.check(sum_bad == 0, fmt("weights sum to 1 within 1e-12 (worst %.2e over 4000 cases)", worst_sum));
  v.check(uniform_bad == 0, "equal ranks give exactly uniform weights at every tau");
  v.check(sharp_bad == 0 && sharp_checked > 0,
          fmt("tau 0.05, distinct ranks with a first-ranked expert: max weight >= 0.99 (worst %.6f over %zu)",
              worst_sharp, sharp_checked));
  v.note(fmt("distinct triples without a rank-1 expert: %zu, smallest max weight %.4f (1/rank gaps shrink)",
             other_distinct, other_sharp_min));

  // Invariance: transform every expert's candidate scores so the positive keeps its rank.
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::array<std::size_t, 3> before{}, after{};
    for (std::size_t e = 0; e < 3; ++e) {
      std::vector<double> s(32);
      for (double& x : s) x = n(rng);
      const std::size_t pos = static_cast<std::size_t>(trial) % s.size();
      before[e] = trainer::rank_of_positive(s, pos);
      std::vector<double> t = s;
      switch ((trial + static_cast<int>(e)) % 3) {
        case 0:
          for (double& x : t) x = std::exp(2.0 * x) + 5.0;  // strictly increasing
          break;
        case 1:
          for (double& x : t) x = x * x * x - 1.0;
          break;
        default: {
          // Shuffle the negatives among themselves.
          std::vector<double> neg;
          for (std::size_t i = 0; i < t.size(); ++i) {
            if (i != pos) neg.push_back(t[i]);
          }
          std::shuffle(neg.begin(), neg.end(), rng);
          for (std::size_t i = 0, j = 0; i < t.size(); ++i) {
            if (i != pos) t[i] = neg[j++];
          }
        }
      }
      after[e] = trainer::rank_of_positive(t, pos);
    }
    for (double tau : {0.1, 0.5, 2.0, 10.0}) {
      invariance_bad += trainer::competitive_weights(before, tau).w != trainer::competitive_weights(after, tau).w;
    }
  }
  v.check(invariance_bad == 0, "weights unchanged by rank-preserving score transforms (4000 cases)");
  return v;
}

// Corpus of at most 2000 documents with planted exact duplicates (ties), and
// a randomly initialised model at the default size.
struct ExactnessFixture {
  synthgen::Dataset data;
  retrieval::Corpus corpus;
  encoder::Vocab vocab;
  encoder::ModelParams params;
  std::vector<retrieval::Query> queries;
  std::vector<experts::ExpertReps> doc_reps, query_reps;

  ExactnessFixture() {
    synthgen::GenSpec spec;
    spec.docs_per_family = 600;
    spec.queries_per_family = 100;
    data = synthgen::generate(spec);
    for (const auto& d : data.corpus.docs()) corpus.add(d.id, d.text);
    for (std::size_t i = 0; i < 40; ++i) {
      const auto& d = data.corpus[i * 37];
      corpus.add("dup" + std::to_string(i) + "-" + d.id, d.text);
    }
    vocab = cli::build_vocab(corpus, data.train);
    cli::RunConfig rc;
    encoder::ModelConfig mc = rc.model;
    mc.vocab_size = vocab.size();
    params = encoder::ModelParams::init(mc, 99);
    auto all = data.train;
    all.insert(all.end(), data.test.begin(), data.test.end());
    auto rng = make_stream(5, "acceptance-queries");
    std::shuffle(all.begin(), all.end(), rng);
    queries.assign(all.begin(), all.begin() + 50);
    // Oracle representations: one text at a time, no packing.
    std::vector<std::string> texts;
    for (const auto& d : corpus.docs()) texts.push_back(d.text);
    doc_reps = experts::encode_texts(params, vocab, texts, mc.max_d_len, 1);
    texts.clear();
    for (const auto& q : queries) texts.push_back(q.text);
    query_reps = experts::encode_texts(params, vocab, texts, mc.max_q_len, 1);
  }

  std::vector<ScoredDoc> oracle(ExpertId e, std::size_t qi) const {
    std::vector<ScoredDoc> all;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      all.push_back({corpus[i].id, experts::score(e, query_reps[qi], doc_reps[i])});
    }
    std::sort(all.begin(), all.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
      return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
    });
    return all;
  }
};

// 3. Exhaustive search equals brute force.
Verdict criterion3(const ExactnessFixture& fx, const std::array<retrieval::ExpertIndex, kNumExperts>& indexes,
                   double build_seconds) {
  Verdict v;
  const auto t = Clock::now();
  const retrieval::Searcher searcher(fx.params, fx.vocab, indexes);
  const std::size_t n = fx.corpus.size();
  std::size_t mismatches = 0, lists = 0, ties = 0, empty_lex = 0;
  for (std::size_t qi = 0; qi < fx.queries.size(); ++qi) {
    for (ExpertId e : kAllExperts) {
      const auto expect = fx.oracle(e, qi);
      for (std::size_t i = 1; i < expect.size(); ++i) ties += expect[i].score == expect[i - 1].score;
      for (std::size_t k : {std::size_t{10}, std::size_t{100}, n}) {
        const auto got = searcher.search_one(e, fx.queries[qi], k);
        ++lists;
        if (e == ExpertId::kLex && fx.query_reps[qi].lex.empty()) {
          ++empty_lex;
          mismatches += !got.entries.empty();
          continue;
        }
        bool same = got.entries.size() == std::min(k, n);
        for (std::size_t i = 0; same && i < got.entries.size(); ++i) same = got.entries[i] == expect[i];
        mismatches += !same;
      }
    }
  }
  const double s = seconds_since(t) + build_seconds;
  v.check(n <= 2000, fmt("corpus of %zu documents", n));
  v.check(mismatches == 0, fmt("%zu of %zu top-K lists identical to brute force (ids and scores bit for bit)",
                               lists - mismatches, lists));
  v.note(fmt("50 queries x 3 experts x K in {10, 100, %zu}; %zu tied adjacent pairs exercised the id tie rule", n,
             ties));
  if (empty_lex > 0) v.note(fmt("%zu lexical lists had an empty query representation", empty_lex));
  v.check(s < 300.0, fmt("runtime %.1f s including index build (< 300)", s));
  return v;
}

// 4. Fusion against exact score sums and the K-th-score fallback.
Verdict criterion4(const ExactnessFixture& fx, const std::array<retrieval::ExpertIndex, kNumExperts>& indexes) {
  Verdict v;
  const retrieval::Searcher searcher(fx.params, fx.vocab, indexes);
  const std::size_t n = fx.corpus.size();
  std::size_t full_bad = 0, fallback_bad = 0, fallbacks = 0, outside = 0;
  for (std::size_t qi = 0; qi < fx.queries.size(); ++qi) {
    // K = |C|: every document in every list, so fused = exact sum.
    const auto lists = searcher.search(fx.queries[qi], n);
    const auto fused = retrieval::fuse_sum(lists, n);
    std::vector<ScoredDoc> expect;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (ExpertId e : kAllExperts) s += experts::score(e, fx.query_reps[qi], fx.doc_reps[i]);
      expect.push_back({fx.corpus[i].id, s});
    }
    std::sort(expect.begin(), expect.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
      return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
    });
    full_bad += fused.entries != expect;

    // K = 10: recompute every fused score from the lists and their s_K.
    const auto top = searcher.search(fx.queries[qi], 10);
    const auto f10 = retrieval::fuse_sum(top, 10);
    for (const auto& l : top) {
      if (!l.entries.empty() && l.kth_score != l.entries.back().score) ++fallback_bad;
    }
    for (const auto& d : f10.entries) {
      double s = 0.0;
      bool anywhere = false;
      for (const auto& l : top) {
        const auto it = std::find_if(l.entries.begin(), l.entries.end(),
                                     [&](const ScoredDoc& x) { return x.doc_id == d.doc_id; });
        if (it != l.entries.end()) {
          s += it->score;
          anywhere = true;
        } else {
          s += l.kth_score;
          ++fallbacks;
        }
      }
      outside += !anywhere;
      fallback_bad += s != d.score;
    }
  }
  v.check(full_bad == 0, fmt("K = |C| = %zu: fused ranking and scores equal the exact sums on %zu queries", n,
                             fx.queries.size()));
  v.check(fallback_bad == 0 && fallbacks > 0,
          fmt("K = 10: %zu fallback contributions, each equal to the recorded s_K of its expert", fallbacks));
  v.check(outside == 0, "fused lists contain only documents from the input lists");
  return v;
}

cli::RunConfig study_config() {
  cli::RunConfig c;
  return c;
}

// 5. Specialization at desk scale.
Verdict criterion5(Shared& sh) {
  Verdict v;
  const auto& data = sh.dataset();
  std::size_t per_family[3] = {0, 0, 0};
  for (const auto& q : data.test) ++per_family[static_cast<int>(data.families.at(q.id))];
  v.note(fmt("dataset: %zu docs, %zu train / %zu test queries (%zu/%zu/%zu by family), %zu dev", data.corpus.size(),
             data.train.size(), data.test.size(), per_family[0], per_family[1], per_family[2], data.dev.size()));
  const cli::RunConfig cfg = study_config();
  v.note(fmt("standardized ratio %.2f, epochs %zu + %zu, seeds %llu..%llu", cfg.schedule.standardized_ratio,
             cfg.schedule.epochs_bootstrap, cfg.schedule.epochs_hard, static_cast<unsigned long long>(cfg.seed),
             static_cast<unsigned long long>(cfg.seed + 4)));
  sh.study = cli::run_specialization_study(cfg, data, 5, nullptr);
  const auto& st = *sh.study;
  std::string taus;
  for (std::size_t i = 0; i < st.taus.size(); ++i) taus += fmt(" %g:%.4f", st.taus[i], st.dev_fused_mrr[i]);
  v.note("dev fused MRR@10 per tau:" + taus + fmt("; chosen tau %g", st.chosen_tau));

  const std::array<std::pair<synthgen::Family, ExpertId>, 3> matched = {
      {{synthgen::Family::kExact, ExpertId::kLex},
       {synthgen::Family::kScope, ExpertId::kLoc},
       {synthgen::Family::kVerbosity, ExpertId::kGlob}}};
  std::size_t above = 0;
  std::string weights;
  for (const auto& [f, e] : matched) {
    const auto it = st.primary.family_weights.find(f);
    const double w = it == st.primary.family_weights.end() ? 0.0 : it->second[index_of(e)];
    above += w > 0.40;
    const auto& all = it == st.primary.family_weights.end() ? std::array<double, 3>{} : it->second;
    weights += fmt(" %s->%s %.3f (lex %.3f loc %.3f glob %.3f);", std::string(synthgen::to_string(f)).c_str(),
                   std::string(to_string(e)).c_str(), w, all[0], all[1], all[2]);
  }
  v.check(above >= 2, fmt("(a) matched-expert weight > 0.40 for %zu of 3 families:", above) + weights);

  const auto& m = st.primary.expert_mrr;
  const double best = std::max({m[0], m[1], m[2]});
  v.check(st.primary.fused_mrr >= best - 0.01,
          fmt("(b) fused MRR@10 %.4f >= best single expert %.4f - 0.01 (lex %.4f loc %.4f glob %.4f)",
              st.primary.fused_mrr, best, m[0], m[1], m[2]));

  std::size_t holds = 0;
  std::string per_seed;
  for (std::size_t i = 0; i < st.seeds.size(); ++i) {
    holds += st.ablation_fused_mrr[i] <= st.full_fused_mrr[i];
    per_seed += fmt(" seed %llu %.4f vs %.4f;", static_cast<unsigned long long>(st.seeds[i]), st.full_fused_mrr[i],
                    st.ablation_fused_mrr[i]);
  }
  v.check(holds >= 3, fmt("(c) no-specialized ablation <= full model in %zu of %zu seeds (full vs ablation):", holds,
                          st.seeds.size()) +
                          per_seed);
  v.check(st.seconds <= 1200.0, fmt("runtime %.0f s (<= 1200)", st.seconds));
  return v;
}

// 6. Expert complementarity and the RBO oracle.
Verdict criterion6(Shared& sh) {
  Verdict v;
  std::array<double, 3> rbo{};
  if (sh.study) {
    rbo = sh.study->primary.rbo;
    v.note("top-100 lists of the criterion 5 primary model on the mixed test set");
  } else {
    const auto& data = sh.dataset();
    auto setup = cli::setup_from(study_config());
    const auto o = cli::run_experiment(data, data.test, setup);
    rbo = o.rbo;
    v.note(fmt("top-100 lists of a model trained at tau %g on the mixed test set", setup.schedule.tau));
  }
  const char* names[3] = {"lex-loc", "lex-glob", "loc-glob"};
  for (int i = 0; i < 3; ++i) v.check(rbo[i] < 0.9, fmt("mean RBO(p=0.9) %s = %.4f (< 0.9)", names[i], rbo[i]));

  auto rng = make_stream(6, "acceptance-rbo");
  std::vector<std::string> pool;
  for (int i = 0; i < 60; ++i) pool.push_back("d" + std::to_string(i));
  std::uniform_int_distribution<std::size_t> len(1, 40);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    auto a = pool, b = pool;
    std::shuffle(a.begin(), a.end(), rng);
    std::shuffle(b.begin(), b.end(), rng);
    // Overlapping prefixes so the values are spread over (0, 1).
    std::copy(a.begin(), a.begin() + trial % 10, b.begin());
    a.resize(len(rng));
    b.resize(trial % 2 == 0 ? a.size() : len(rng));
    std::set<std::string> seen;
    std::vector<std::string> bu;
    for (auto& x : b) {
      if (seen.insert(x).second) bu.push_back(x);
    }
    worst = std::max(worst, std::abs(eval::rbo(a, bu, 0.9) - testing::rbo_oracle(a, bu, 0.9)));
  }
  v.check(worst <= 1e-9, fmt("RBO matches direct summation on 100 random pairs (max abs diff %.2e)", worst));
  return v;
}

int run_command(const std::string& cmd, const fs::path& log) {
  const std::string full = cmd + " >> '" + log.string() + "' 2>&1";
  return std::system(full.c_str());
}

// 7. Byte-level round trips and the file-mediated pipeline.
Verdict criterion7(const ExactnessFixture& fx, const std::array<retrieval::ExpertIndex, kNumExperts>& indexes) {
  Verdict v;
  const fs::path dir = fs::temp_directory_path() / ("came_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);

  // Run files with both sidecars.
  const retrieval::Searcher searcher(fx.params, fx.vocab, indexes);
  std::vector<RankedList> lists;
  for (const auto& q : fx.queries) lists.push_back(searcher.search_one(ExpertId::kLoc, q, 100));
  retrieval::write_run_files(dir / "a.txt", lists, "CAME-loc-00000000");
  const auto back = retrieval::read_run_files(dir / "a.txt");
  retrieval::write_run_files(dir / "b.txt", back, "CAME-loc-00000000");
  bool same = read_file(dir / "a.txt") == read_file(dir / "b.txt");
  same = same && read_file(retrieval::kth_sidecar_path(dir / "a.txt")) ==
                     read_file(retrieval::kth_sidecar_path(dir / "b.txt"));
  same = same && read_file(retrieval::exact_scores_path(dir / "a.txt")) ==
                     read_file(retrieval::exact_scores_path(dir / "b.txt"));
  v.check(same && back == lists, fmt("run file write -> read -> write byte-identical (%zu queries, with sidecars)",
                                     lists.size()));

  const char* cli = std::getenv("CAME_CLI_PATH");
  if (cli == nullptr || !fs::exists(cli)) {
    v.check(false, "CAME_CLI_PATH does not name the came executable; pipeline comparison not run");
    return v;
  }
  const std::string came = std::string("'") + cli + "'";
  const fs::path log = dir / "cli.log";
  write_file_atomic(dir / "gen.spec", "seed = 11\ndocs_per_family = 80\nqueries_per_family = 30\ndev_queries_per_family = 4\n");
  write_file_atomic(dir / "run.toml",
                    "seed = 5\n[paths]\ndata = \"" + (dir / "data").string() + "\"\noutput_dir = \"" +
                        (dir / "out").string() + "\"\n[train]\nepochs_bootstrap = 2\nepochs_hard = 1\n");
  const std::string cfg = " -c '" + (dir / "run.toml").string() + "'";
  int rc = run_command(came + " datagen --spec '" + (dir / "gen.spec").string() + "' -o '" + (dir / "data").string() + "'", log);
  for (const char* step : {"train -q", "index", "retrieve", "fuse"}) {
    if (rc == 0) rc = run_command(came + " " + step + cfg, log);
  }
  if (rc != 0) {
    v.check(false, "came pipeline exited with an error; see " + log.string());
    return v;
  }

  const auto ck_bytes = read_file(dir / "out" / "model.ckpt");
  const auto ck = trainer::Checkpoint::load(dir / "out" / "model.ckpt");
  ck.save(dir / "again.ckpt");
  v.check(read_file(dir / "again.ckpt") == ck_bytes && trainer::Checkpoint::load(dir / "again.ckpt").serialize() == ck_bytes,
          fmt("checkpoint save -> load -> save byte-identical (%zu bytes)", ck_bytes.size()));

  cli::RunConfig c = cli::load_run_config(dir / "run.toml");
  c.finalize();
  const std::string in_process = cli::run_in_process(c);
  const std::string from_files = read_file(cli::fused_run_path(c));
  v.check(in_process == from_files,
          fmt("datagen -> train -> index -> retrieve -> fuse run file equals the in-process pipeline (%zu bytes)",
              from_files.size()));
  fs::remove_all(dir);
  return v;
}

// 8. The generator's planted signals, seen by BM25.
Verdict criterion8(Shared& sh) {
  Verdict v;
  const auto& data = sh.dataset();
  const retrieval::Bm25Index bm(data.corpus);
  std::map<synthgen::Family, std::vector<RankedList>> runs;
  for (const auto* split : {&data.train, &data.dev, &data.test}) {
    for (const auto& q : *split) runs[data.families.at(q.id)].push_back(bm.topk(q.id, q.text, 10));
  }
  const double exact = eval::mrr_at_k(runs[synthgen::Family::kExact], data.qrels, 10).mean;
  const double scope = eval::mrr_at_k(runs[synthgen::Family::kScope], data.qrels, 10).mean;
  const double verb = eval::mrr_at_k(runs[synthgen::Family::kVerbosity], data.qrels, 10).mean;
  v.check(exact >= 0.95, fmt("BM25 MRR@10 on exact %.4f (>= 0.95) over %zu queries", exact,
                             runs[synthgen::Family::kExact].size()));
  v.check(verb <= 0.2, fmt("BM25 MRR@10 on verbosity %.4f (<= 0.2) over %zu queries", verb,
                           runs[synthgen::Family::kVerbosity].size()));
  v.note(fmt("scope family, for reference: %.4f", scope));
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance run"};
  std::vector<int> only;
  app.add_option("--only", only, "Run just these criteria")->check(CLI::Range(1, 8))->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  const auto wanted = [&](int c) { return only.empty() || std::count(only.begin(), only.end(), c) > 0; };

  Shared shared;
  std::optional<ExactnessFixture> fx;
  std::optional<std::array<retrieval::ExpertIndex, kNumExperts>> indexes;
  double build_seconds = 0.0;
  const auto exactness = [&]() {
    if (!fx) {
      const auto t = Clock::now();
      fx.emplace();
      indexes = retrieval::build_indexes(fx->corpus, fx->params, fx->vocab);
      build_seconds = seconds_since(t);
    }
  };

  const std::vector<std::pair<int, std::function<Verdict()>>> criteria = {
      {1, criterion1},
      {2, criterion2},
      {3, [&] { exactness(); return criterion3(*fx, *indexes, build_seconds); }},
      {4, [&] { exactness(); return criterion4(*fx, *indexes); }},
      {5, [&] { return criterion5(shared); }},
      {6, [&] { return criterion6(shared); }},
      {7, [&] { exactness(); return criterion7(*fx, *indexes); }},
      {8, [&] { return criterion8(shared); }},
  };
  const char* titles[] = {"",
                          "gradient correctness",
                          "competitive weight properties",
                          "retrieval exactness",
                          "fusion oracle",
                          "specialization at desk scale",
                          "expert complementarity",
                          "format round trips",
                          "synthetic data sanity"};
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    if (!wanted(id)) continue;
    const auto t = Clock::now();
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    failed += !v.pass;
    std::printf("criterion %d %s: %s (%.1f s)\n", id, v.pass ? "PASS" : "FAIL", titles[id], seconds_since(t));
    for (const auto& d : v.details) std::printf("    %s\n", d.c_str());
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
