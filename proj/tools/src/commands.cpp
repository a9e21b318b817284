#include "came/cli/commands.hpp"

#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>

#include "came/cli/pipeline.hpp"
#include "came/encoder/fingerprint.hpp"
#include "came/eval/qrels.hpp"
#include "came/retrieval/fusion.hpp"
#include "came/retrieval/index.hpp"
#include "came/retrieval/run_io.hpp"
#include "came/util/binary_io.hpp"

namespace came::cli {

namespace fs = std::filesystem;

namespace {

const fs::path& require(const fs::path& p, const char* name) {
  if (p.empty()) throw std::invalid_argument(std::string("paths.") + name + " is not set");
  return p;
}

struct TrainInputs {
  retrieval::Corpus corpus;
  std::vector<retrieval::Query> train;
  eval::Qrels qrels;
};

TrainInputs load_train_inputs(const RunConfig& c) {
  TrainInputs in;
  in.corpus = retrieval::Corpus::load_jsonl(require(c.paths.corpus, "corpus"));
  in.train = retrieval::load_queries_tsv(require(c.paths.train_queries, "train_queries"));
  in.qrels = eval::load_qrels(require(c.paths.qrels, "qrels"));
  return in;
}

trainer::TrainResult train_model(const RunConfig& c, const TrainInputs& in, const trainer::ProgressFn& progress) {
  const encoder::Vocab vocab = build_vocab(in.corpus, in.train);
  encoder::ModelConfig model = c.model;
  model.vocab_size = vocab.size();
  trainer::TrainingData td;
  td.corpus = &in.corpus;
  td.queries = in.train;
  td.qrels = in.qrels;
  td.bootstrap = bm25_negatives(in.corpus, in.train, in.qrels, c.schedule.mine_depth);
  trainer::TrainResult res = trainer::train(model, c.schedule, vocab, td, progress);
  if (res.aborted) throw std::runtime_error("training aborted: " + res.abort_reason);
  return res;
}

std::string hash8_of(const trainer::Checkpoint& ckpt) {
  return encoder::fingerprint8(encoder::fingerprint(ckpt.params, ckpt.vocab));
}

// Reorders `lists` to the order of `queries`; both must name the same queries.
std::vector<RankedList> align(std::vector<RankedList> lists, const std::vector<retrieval::Query>& queries,
                              std::size_t k, const fs::path& source) {
  std::map<std::string, RankedList> by_id;
  for (auto& l : lists) {
    l.k = k;
    const std::string id = l.query_id;
    by_id.emplace(id, std::move(l));
  }
  std::vector<RankedList> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    auto it = by_id.find(q.id);
    if (it == by_id.end()) throw std::runtime_error(source.string() + ": no results for query " + q.id);
    out.push_back(std::move(it->second));
    by_id.erase(it);
  }
  if (!by_id.empty()) throw std::runtime_error(source.string() + ": query " + by_id.begin()->first + " is not in the query file");
  return out;
}

std::vector<retrieval::ExpertLists> zip(const std::array<std::vector<RankedList>, kNumExperts>& per_expert) {
  std::vector<retrieval::ExpertLists> out(per_expert[0].size());
  for (std::size_t e = 0; e < kNumExperts; ++e) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i][e] = per_expert[e][i];
  }
  return out;
}

std::string fused_tag(const RunConfig& c, std::string_view hash8) {
  return retrieval::run_tag(std::string("fused-") + std::string(retrieval::to_string(c.fusion)), hash8);
}

// The checkpoint hash recorded in a run file's tag column ("CAME-<what>-<hash8>").
std::string tag_hash(const fs::path& run) {
  const std::string text = read_file(run);
  const auto eol = text.find('\n');
  const std::string first = text.substr(0, eol);
  const auto dash = first.rfind('-');
  if (first.empty() || dash == std::string::npos) return "00000000";
  return first.substr(dash + 1);
}

std::vector<RankedList> fuse_all(const RunConfig& c, const std::vector<retrieval::ExpertLists>& lists,
                                 const std::vector<retrieval::ExpertLists>& dev, const eval::Qrels& qrels) {
  std::optional<retrieval::FusionWeights> weights;
  if (c.fusion == retrieval::FusionMethod::kLinear) {
    if (dev.empty()) throw std::invalid_argument("linear fusion needs dev queries (paths.dev_queries)");
    weights = retrieval::fit_linear_fusion(dev, qrels);
  }
  std::vector<RankedList> fused;
  fused.reserve(lists.size());
  for (const auto& l : lists) fused.push_back(retrieval::fuse(c.fusion, l, c.k, weights));
  return fused;
}

}  // namespace

fs::path expert_run_path(const RunConfig& config, ExpertId expert, std::string_view split) {
  const std::string prefix = split == "eval" ? "" : std::string(split) + ".";
  return config.paths.output_dir / (prefix + "run." + std::string(to_string(expert)) + ".txt");
}

fs::path fused_run_path(const RunConfig& config) { return config.paths.output_dir / "run.fused.txt"; }

void cmd_datagen(const synthgen::GenSpec& spec, const fs::path& out_dir) {
  const synthgen::Dataset data = synthgen::generate(spec);
  const auto problems = synthgen::check(data, spec);
  if (!problems.empty()) {
    throw std::runtime_error("generated data violates " + std::to_string(problems.size()) +
                             " construction constraint(s); first: " + problems.front());
  }
  synthgen::write_dataset(data, out_dir);
}

trainer::TrainResult cmd_train(const RunConfig& config, std::ostream* progress) {
  const TrainInputs in = load_train_inputs(config);
  trainer::ProgressFn fn;
  if (progress != nullptr) {
    fn = [progress](const trainer::StepLog& s) {
      *progress << "step " << s.step << " phase " << s.phase << (s.standardized ? " standardized" : " specialized")
                << " loss " << s.loss[0] << ' ' << s.loss[1] << ' ' << s.loss[2] << " total " << s.total << '\n';
    };
  }
  trainer::TrainResult res = train_model(config, in, fn);
  res.checkpoint.save(config.paths.checkpoint);
  write_file_atomic(config.paths.output_dir / "train_log.csv", trainer::format_step_log(res.log));
  write_file_atomic(config.paths.output_dir / "final_weights.csv",
                    trainer::format_instance_weights(res.final_epoch_weights));
  return res;
}

void cmd_index(const RunConfig& config) {
  const auto ckpt = trainer::Checkpoint::load(config.paths.checkpoint);
  const auto corpus = retrieval::Corpus::load_jsonl(require(config.paths.corpus, "corpus"));
  const auto indexes = retrieval::build_indexes(corpus, ckpt.params, ckpt.vocab);
  for (ExpertId e : kAllExperts) indexes[index_of(e)].save(retrieval::index_path(config.paths.index_dir, e));
}

void cmd_retrieve(const RunConfig& config) {
  const auto ckpt = trainer::Checkpoint::load(config.paths.checkpoint);
  const std::uint64_t hash = encoder::fingerprint(ckpt.params, ckpt.vocab);
  std::array<retrieval::ExpertIndex, kNumExperts> indexes;
  for (ExpertId e : kAllExperts) {
    indexes[index_of(e)] = retrieval::ExpertIndex::load(retrieval::index_path(config.paths.index_dir, e), hash);
  }
  const auto write_split = [&](const fs::path& query_file, std::string_view split) {
    const auto queries = retrieval::load_queries_tsv(query_file);
    const auto lists = retrieve(ckpt.params, ckpt.vocab, indexes, queries, config.k);
    for (ExpertId e : kAllExperts) {
      std::vector<RankedList> run;
      run.reserve(lists.size());
      for (const auto& l : lists) run.push_back(l[index_of(e)]);
      retrieval::write_run_files(expert_run_path(config, e, split), run,
                      retrieval::run_tag(to_string(e), encoder::fingerprint8(hash)));
    }
  };
  write_split(require(config.paths.eval_queries, "eval_queries"), "eval");
  if (config.fusion == retrieval::FusionMethod::kLinear) {
    write_split(require(config.paths.dev_queries, "dev_queries"), "dev");
  }
}

void cmd_fuse(const RunConfig& config) {
  const auto read_split = [&](const fs::path& query_file, std::string_view split) {
    const auto queries = retrieval::load_queries_tsv(query_file);
    std::array<std::vector<RankedList>, kNumExperts> per_expert;
    for (ExpertId e : kAllExperts) {
      const fs::path run = expert_run_path(config, e, split);
      per_expert[index_of(e)] = align(retrieval::read_run_files(run), queries, config.k, run);
    }
    return zip(per_expert);
  };
  const auto lists = read_split(require(config.paths.eval_queries, "eval_queries"), "eval");
  std::vector<retrieval::ExpertLists> dev;
  eval::Qrels qrels;
  if (config.fusion == retrieval::FusionMethod::kLinear) {
    dev = read_split(require(config.paths.dev_queries, "dev_queries"), "dev");
    qrels = eval::load_qrels(require(config.paths.qrels, "qrels"));
  }
  const auto fused = fuse_all(config, lists, dev, qrels);
  retrieval::write_run_files(fused_run_path(config), fused,
                  fused_tag(config, tag_hash(expert_run_path(config, ExpertId::kLex))));
}

std::vector<eval::MetricReport> evaluate_run(const RunConfig& config, const std::vector<RankedList>& run) {
  const auto qrels = eval::load_qrels(require(config.paths.qrels, "qrels"));
  std::vector<eval::MetricReport> reports;
  std::optional<eval::Answers> answers;
  std::optional<retrieval::Corpus> corpus;
  for (const auto& m : config.metrics) {
    if (m.name == "mrr") {
      reports.push_back(eval::mrr_at_k(run, qrels, m.cutoff));
    } else if (m.name == "recall") {
      reports.push_back(eval::recall_at_k(run, qrels, m.cutoff));
    } else if (m.name == "ndcg") {
      reports.push_back(eval::ndcg_at_k(run, qrels, m.cutoff));
    } else {
      if (!answers) answers = eval::load_answers(require(config.paths.answers, "answers"));
      if (!corpus) corpus = retrieval::Corpus::load_jsonl(require(config.paths.corpus, "corpus"));
      reports.push_back(eval::top_n_hit(run, *answers, *corpus, m.cutoff));
    }
  }
  return reports;
}

std::vector<eval::MetricReport> cmd_eval(const RunConfig& config, const fs::path& run) {
  const auto lists = retrieval::read_run_files(run);
  auto reports = evaluate_run(config, lists);
  write_file_atomic(config.paths.output_dir / ("metrics." + run.stem().string() + ".csv"),
                    eval::reports_to_csv(reports));
  return reports;
}

std::string run_in_process(const RunConfig& config) {
  const TrainInputs in = load_train_inputs(config);
  const trainer::TrainResult res = train_model(config, in, {});
  const auto& params = res.checkpoint.params;
  const auto& vocab = res.checkpoint.vocab;
  const auto indexes = retrieval::build_indexes(in.corpus, params, vocab);
  const auto lists =
      retrieve(params, vocab, indexes, retrieval::load_queries_tsv(require(config.paths.eval_queries, "eval_queries")),
               config.k);
  std::vector<retrieval::ExpertLists> dev;
  if (config.fusion == retrieval::FusionMethod::kLinear) {
    dev = retrieve(params, vocab, indexes,
                   retrieval::load_queries_tsv(require(config.paths.dev_queries, "dev_queries")), config.k);
  }
  return retrieval::format_run(fuse_all(config, lists, dev, in.qrels), fused_tag(config, hash8_of(res.checkpoint)));
}

}  // namespace came::cli
