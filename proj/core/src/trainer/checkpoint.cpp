#include "came/trainer/checkpoint.hpp"

#include <stdexcept>

#include "came/util/binary_io.hpp"

namespace came::trainer {

namespace {

constexpr std::string_view kMagic = "CAME1";

void put_array(ByteWriter& w, const diff::NumArray& a) {
  w.put_u64(a.shape().size());
  for (std::size_t d : a.shape()) w.put_u64(d);
  w.put_doubles(a.values());
}

diff::NumArray get_array(ByteReader& r) {
  const std::uint64_t rank = r.get_u64();
  if (rank > 8) r.fail("implausible array rank");
  diff::Shape shape;
  for (std::uint64_t i = 0; i < rank; ++i) shape.push_back(r.get_u64());
  auto values = r.get_doubles();
  if (values.size() != diff::shape_size(shape)) r.fail("array size does not match its shape");
  return diff::NumArray(std::move(shape), std::move(values));
}

}  // namespace

std::string Checkpoint::serialize() const {
  ByteWriter w;
  w.put_raw(kMagic);
  w.put<std::uint32_t>(kFormatVersion);

  const auto& c = params.config;
  for (std::size_t v : {c.vocab_size, c.d_model, c.n_heads, c.n_shared_layers, c.n_expert_layers, c.d_local,
                        c.max_q_len, c.max_d_len, c.ff_width}) {
    w.put_u64(v);
  }

  const auto& s = schedule;
  w.put(s.tau);
  w.put(s.standardized_ratio);
  w.put<std::uint8_t>(s.specialized ? 1 : 0);
  for (std::size_t v : {s.epochs_bootstrap, s.epochs_hard, s.batch_size, s.negatives, s.mine_depth}) w.put_u64(v);
  w.put(s.learning_rate);
  w.put(s.weight_decay);
  w.put(s.flops_weight);
  w.put<std::uint8_t>(s.resample_negatives ? 1 : 0);
  w.put_u64(s.seed);

  w.put_u64(vocab.tokens().size());
  for (const auto& t : vocab.tokens()) w.put_string(t);

  const auto all = params.all();
  w.put_u64(all.size());
  for (const diff::Parameter* p : all) {
    w.put_string(p->name);
    put_array(w, p->value);
  }

  w.put(optimizer_config.learning_rate);
  w.put(optimizer_config.beta1);
  w.put(optimizer_config.beta2);
  w.put(optimizer_config.epsilon);
  w.put(optimizer_config.weight_decay);
  w.put(optimizer_config.final_lr_fraction);
  w.put<std::int64_t>(optimizer_config.total_steps);
  w.put<std::int64_t>(optimizer_state.step);
  w.put_u64(optimizer_state.first_moment.size());
  for (std::size_t i = 0; i < optimizer_state.first_moment.size(); ++i) {
    put_array(w, optimizer_state.first_moment[i]);
    put_array(w, optimizer_state.second_moment.at(i));
  }

  w.put_u64(seed);
  w.put_u64(steps_done);
  w.put_u64(total_steps);
  return w.take();
}

Checkpoint Checkpoint::deserialize(std::string_view bytes) {
  ByteReader r(bytes, "checkpoint");
  r.expect_raw(kMagic);
  const auto version = r.get<std::uint32_t>();
  if (version != kFormatVersion) r.fail("unsupported format version " + std::to_string(version));

  Checkpoint ck;
  encoder::ModelConfig c;
  for (std::size_t* f : {&c.vocab_size, &c.d_model, &c.n_heads, &c.n_shared_layers, &c.n_expert_layers, &c.d_local,
                         &c.max_q_len, &c.max_d_len, &c.ff_width}) {
    *f = r.get_u64();
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    r.fail(e.what());
  }

  auto& s = ck.schedule;
  s.tau = r.get<double>();
  s.standardized_ratio = r.get<double>();
  s.specialized = r.get<std::uint8_t>() != 0;
  for (std::size_t* f : {&s.epochs_bootstrap, &s.epochs_hard, &s.batch_size, &s.negatives, &s.mine_depth}) {
    *f = r.get_u64();
  }
  s.learning_rate = r.get<double>();
  s.weight_decay = r.get<double>();
  s.flops_weight = r.get<double>();
  s.resample_negatives = r.get<std::uint8_t>() != 0;
  s.seed = r.get_u64();

  std::vector<std::string> tokens(r.get_u64());
  for (auto& t : tokens) t = r.get_string();
  ck.vocab = encoder::Vocab(std::move(tokens));
  if (ck.vocab.size() != c.vocab_size) r.fail("vocab size does not match the config");

  ck.params = encoder::ModelParams::init(c, 0);
  auto all = ck.params.all();
  if (r.get_u64() != all.size()) r.fail("parameter count does not match the config");
  for (diff::Parameter* p : all) {
    const std::string name = r.get_string();
    if (name != p->name) r.fail("expected parameter '" + p->name + "', found '" + name + "'");
    diff::NumArray v = get_array(r);
    if (v.shape() != p->value.shape()) {
      r.fail("parameter '" + name + "' has shape " + diff::shape_to_string(v.shape()) + ", expected " +
             diff::shape_to_string(p->value.shape()));
    }
    p->value = std::move(v);
    p->zero_grad();
  }

  auto& oc = ck.optimizer_config;
  oc.learning_rate = r.get<double>();
  oc.beta1 = r.get<double>();
  oc.beta2 = r.get<double>();
  oc.epsilon = r.get<double>();
  oc.weight_decay = r.get<double>();
  oc.final_lr_fraction = r.get<double>();
  oc.total_steps = r.get<std::int64_t>();
  ck.optimizer_state.step = r.get<std::int64_t>();
  const std::uint64_t nm = r.get_u64();
  if (nm != 0 && nm != all.size()) r.fail("optimizer moments do not match the parameters");
  for (std::uint64_t i = 0; i < nm; ++i) {
    ck.optimizer_state.first_moment.push_back(get_array(r));
    ck.optimizer_state.second_moment.push_back(get_array(r));
    if (ck.optimizer_state.first_moment.back().shape() != all[i]->value.shape() ||
        ck.optimizer_state.second_moment.back().shape() != all[i]->value.shape()) {
      r.fail("optimizer moment shape mismatch for '" + all[i]->name + "'");
    }
  }

  ck.seed = r.get_u64();
  ck.steps_done = r.get_u64();
  ck.total_steps = r.get_u64();
  r.expect_done();
  return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  try {
    return deserialize(read_file(path));
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace came::trainer
