#include "came/encoder/model.hpp"

#include <stdexcept>

#include "came/encoder/vocab.hpp"
#include "came/util/rng.hpp"

namespace came::encoder {
namespace {

using diff::NumArray;
using diff::Parameter;
using diff::Shape;

Parameter normal_param(std::string name, Shape shape, std::mt19937_64& rng) {
  NumArray v(std::move(shape));
  for (double& x : v.values()) x = truncated_normal(rng, 0.02);
  return Parameter(std::move(name), std::move(v));
}

Parameter const_param(std::string name, Shape shape, double value) {
  return Parameter(std::move(name), NumArray(std::move(shape), value));
}

BlockParams init_block(const std::string& prefix, const ModelConfig& c, std::mt19937_64& rng) {
  const std::size_t d = c.d_model, f = c.ff_width;
  BlockParams b;
  b.wq = normal_param(prefix + ".attn.wq", {d, d}, rng);
  b.bq = const_param(prefix + ".attn.bq", {d}, 0.0);
  b.wk = normal_param(prefix + ".attn.wk", {d, d}, rng);
  b.wv = normal_param(prefix + ".attn.wv", {d, d}, rng);
  b.bv = const_param(prefix + ".attn.bv", {d}, 0.0);
  b.wo = normal_param(prefix + ".attn.wo", {d, d}, rng);
  b.bo = const_param(prefix + ".attn.bo", {d}, 0.0);
  b.ln1_gain = const_param(prefix + ".ln1.gain", {d}, 1.0);
  b.ln1_bias = const_param(prefix + ".ln1.bias", {d}, 0.0);
  b.ff1_w = normal_param(prefix + ".ff.w1", {d, f}, rng);
  b.ff1_b = const_param(prefix + ".ff.b1", {f}, 0.0);
  b.ff2_w = normal_param(prefix + ".ff.w2", {f, d}, rng);
  b.ff2_b = const_param(prefix + ".ff.b2", {d}, 0.0);
  b.ln2_gain = const_param(prefix + ".ln2.gain", {d}, 1.0);
  b.ln2_bias = const_param(prefix + ".ln2.bias", {d}, 0.0);
  return b;
}

template <typename P, typename Block>
void push_block(std::vector<P>& out, Block& b) {
  for (auto* p : {&b.wq, &b.bq, &b.wk, &b.wv, &b.bv, &b.wo, &b.bo, &b.ln1_gain, &b.ln1_bias, &b.ff1_w,
                  &b.ff1_b, &b.ff2_w, &b.ff2_b, &b.ln2_gain, &b.ln2_bias}) {
    out.push_back(p);
  }
}

template <typename P, typename Params>
std::vector<P> collect(Params& m) {
  std::vector<P> out;
  out.push_back(&m.token_embedding);
  out.push_back(&m.position_embedding);
  out.push_back(&m.embedding_ln_gain);
  out.push_back(&m.embedding_ln_bias);
  for (auto& b : m.shared) push_block(out, b);
  for (auto& stack : m.experts) {
    for (auto& b : stack) push_block(out, b);
  }
  out.push_back(&m.mlm_bias);
  out.push_back(&m.local_projection);
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  const auto fail = [](const std::string& what) { throw std::invalid_argument("model config: " + what); };
  if (vocab_size < static_cast<std::size_t>(kNumReserved)) fail("vocab_size must be at least 3");
  if (d_model == 0) fail("d_model must be positive");
  if (n_heads == 0 || d_model % n_heads != 0) fail("d_model must be divisible by n_heads");
  if (n_shared_layers < 1) fail("n_shared_layers must be at least 1");
  if (n_expert_layers < 1) fail("n_expert_layers must be at least 1");
  if (d_local == 0) fail("d_local must be positive");
  if (max_q_len < 2) fail("max_q_len must be at least 2");
  if (max_d_len < 2) fail("max_d_len must be at least 2");
  if (ff_width == 0) fail("ff_width must be positive");
}

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  auto rng = make_stream(seed, "model-init");
  const std::size_t d = config.d_model;
  ModelParams m;
  m.config = config;
  m.token_embedding = normal_param("embeddings.token", {config.vocab_size, d}, rng);
  m.position_embedding = normal_param("embeddings.position", {config.max_positions(), d}, rng);
  m.embedding_ln_gain = const_param("embeddings.ln.gain", {d}, 1.0);
  m.embedding_ln_bias = const_param("embeddings.ln.bias", {d}, 0.0);
  for (std::size_t i = 0; i < config.n_shared_layers; ++i) {
    m.shared.push_back(init_block("shared." + std::to_string(i), config, rng));
  }
  for (ExpertId e : kAllExperts) {
    for (std::size_t i = 0; i < config.n_expert_layers; ++i) {
      m.experts[index_of(e)].push_back(
          init_block("expert." + std::string(to_string(e)) + "." + std::to_string(i), config, rng));
    }
  }
  m.mlm_bias = const_param("mlm.bias", {config.vocab_size}, 0.0);
  m.local_projection = normal_param("local.projection", {d, config.d_local}, rng);
  return m;
}

std::vector<diff::Parameter*> ModelParams::all() { return collect<diff::Parameter*>(*this); }
std::vector<const diff::Parameter*> ModelParams::all() const { return collect<const diff::Parameter*>(*this); }

std::size_t ModelParams::count_values() const {
  std::size_t n = 0;
  for (const auto* p : all()) n += p->value.size();
  return n;
}

void ModelParams::zero_grad() {
  for (auto* p : all()) p->zero_grad();
}

bool ModelParams::all_finite() const {
  for (const auto* p : all()) {
    if (!p->value.all_finite()) return false;
  }
  return true;
}

}  // namespace came::encoder
