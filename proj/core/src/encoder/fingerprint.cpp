#include "came/encoder/fingerprint.hpp"

#include <span>

#include "came/util/rng.hpp"

namespace came::encoder {

std::uint64_t fingerprint(const ModelParams& params, const Vocab& vocab) {
  const ModelConfig& c = params.config;
  const std::uint64_t dims[] = {c.vocab_size, c.d_model, c.n_heads, c.n_shared_layers, c.n_expert_layers,
                                c.d_local, c.max_q_len, c.max_d_len, c.ff_width};
  std::uint64_t h = fnv1a64(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(dims), sizeof(dims)));
  for (const diff::Parameter* p : params.all()) {
    h = fnv1a64(p->name, h);
    const auto& v = p->value.values();
    h = fnv1a64(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(v.data()), v.size() * sizeof(double)),
                h);
  }
  for (const std::string& t : vocab.tokens()) {
    h = fnv1a64(t, h);
    h = fnv1a64(std::string_view("\n", 1), h);
  }
  return h;
}

std::string fingerprint8(std::uint64_t fp) { return to_hex(fp).substr(0, 8); }

}  // namespace came::encoder
