#include "came/cli/gradcheck.hpp"

#include "came/encoder/model.hpp"
#include "came/encoder/vocab.hpp"
#include "came/retrieval/corpus.hpp"
#include "came/trainer/objective.hpp"
#include "came/util/rng.hpp"

namespace came::cli {

namespace {

std::string random_text(std::mt19937_64& rng, const std::vector<std::string>& words, std::size_t len) {
  std::string out;
  for (std::size_t i = 0; i < len; ++i) {
    if (i > 0) out += ' ';
    out += words[uniform_index(rng, words.size())];
  }
  return out;
}

}  // namespace

GradCheckOutcome run_gradcheck(const GradCheckSetup& setup) {
  auto rng = make_stream(setup.seed, "gradcheck-data");
  std::vector<std::string> words;
  for (std::size_t i = 0; i < setup.vocab_words; ++i) words.push_back("w" + std::to_string(i));
  const encoder::Vocab vocab(words);

  retrieval::Corpus corpus;
  std::vector<trainer::TrainingInstance> batch;
  std::size_t next_doc = 0;
  const auto new_doc = [&](std::size_t len) {
    const std::string id = "d" + std::to_string(next_doc++);
    corpus.add(id, random_text(rng, words, len));
    return id;
  };
  for (std::size_t i = 0; i < setup.instances; ++i) {
    trainer::TrainingInstance inst;
    inst.query_id = "q" + std::to_string(i);
    inst.query_text = random_text(rng, words, 3 + i);
    inst.positive = new_doc(5 + i);
    for (std::size_t n = 0; n < setup.negatives; ++n) inst.negatives.push_back(new_doc(4 + n + i));
    batch.push_back(std::move(inst));
  }

  encoder::ModelConfig config;
  config.vocab_size = vocab.size();
  config.d_model = setup.d_model;
  config.n_heads = 2;
  config.n_shared_layers = 1;
  config.n_expert_layers = 1;
  config.d_local = 4;
  config.ff_width = 2 * setup.d_model;
  config.max_q_len = 8;
  config.max_d_len = 12;
  encoder::ModelParams params = encoder::ModelParams::init(config, setup.seed);
  auto prng = make_stream(setup.seed, "gradcheck-params");
  for (diff::Parameter* p : params.all()) {
    for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] += truncated_normal(prng, setup.init_scale);
  }
  // Lexical logits centred above zero keep most ReLUs active and away from the kink.
  for (std::size_t i = 0; i < params.mlm_bias.value.size(); ++i) params.mlm_bias.value[i] += 1.0;

  const auto fixed = [&] {
    diff::Graph g(diff::Graph::Mode::kInference);
    encoder::ModelGraph mg(g, static_cast<const encoder::ModelParams&>(params));
    return trainer::batch_weights(trainer::forward_batch(mg, vocab, corpus, batch), setup.tau);
  }();

  std::vector<diff::Parameter*> ps = params.all();
  GradCheckOutcome out;
  const auto build = [&](bool specialized) {
    return [&, specialized](diff::Graph& g) {
      encoder::ModelGraph mg(g, params);
      const trainer::BatchForward fwd = trainer::forward_batch(mg, vocab, corpus, batch);
      return specialized ? trainer::specialized_loss(fwd, setup.tau, setup.flops_weight, fixed)
                         : trainer::standardized_loss(fwd, setup.flops_weight);
    };
  };
  out.standardized = diff::grad_check(build(false), ps, setup.h, setup.tol);
  out.specialized = diff::grad_check(build(true), ps, setup.h, setup.tol);
  out.notes.push_back("competitive weights held at their values for the unperturbed parameters");
  return out;
}

}  // namespace came::cli
