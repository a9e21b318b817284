#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <optional>
#include <random>

#include "came/diff/grad_check.hpp"
#include "came/diff/ops.hpp"
#include "came/diff/optimizer.hpp"
#include "came/util/rng.hpp"

namespace came::diff {
namespace {

constexpr int kSeeds = 120;

NumArray random_array(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  NumArray a(shape);
  for (double& v : a.values()) v = u(rng);
  return a;
}

// Values bounded away from zero, for inputs that pass through relu or log.
NumArray away_from_zero(const Shape& shape, std::mt19937_64& rng) {
  NumArray a = random_array(shape, rng, 0.2, 1.0);
  std::bernoulli_distribution flip(0.5);
  for (double& v : a.values()) v = flip(rng) ? -v : v;
  return a;
}

std::size_t dim(std::mt19937_64& rng, std::size_t lo = 1, std::size_t hi = 4) {
  return lo + uniform_index(rng, hi - lo + 1);
}

using OpBuilder = std::function<Var(Graph&, std::vector<Var>&)>;

// Loss = <op(inputs), R> for a fixed random R, so every output element
// contributes a distinct weight to the gradient.
GradCheckReport check_op(std::uint64_t seed, std::vector<NumArray> inputs, const OpBuilder& op) {
  std::vector<Parameter> params;
  for (std::size_t i = 0; i < inputs.size(); ++i) params.emplace_back("in" + std::to_string(i), std::move(inputs[i]));
  std::vector<Parameter*> ptrs;
  for (auto& p : params) ptrs.push_back(&p);
  auto rng = make_stream(seed, "projection");
  std::optional<NumArray> proj;
  const LossBuilder loss = [&](Graph& g) {
    std::vector<Var> vs;
    for (auto& p : params) vs.push_back(g.param(p));
    Var out = op(g, vs);
    if (!proj || proj->shape() != out.shape()) proj = random_array(out.shape(), rng);
    return sum(mul(out, g.constant(*proj)));
  };
  return grad_check(loss, ptrs, 1e-5, 1e-3);
}

void expect_op_gradients(const char* name,
                         const std::function<std::pair<std::vector<NumArray>, OpBuilder>(std::mt19937_64&)>& make) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    auto rng = make_stream(static_cast<std::uint64_t>(seed), name);
    auto [inputs, op] = make(rng);
    const auto r = check_op(static_cast<std::uint64_t>(seed), std::move(inputs), op);
    ASSERT_TRUE(r.pass) << name << " seed " << seed << ": rel err " << r.max_rel_err << " at " << r.worst_param << "["
                        << r.worst_index << "] analytic " << r.worst_analytic << " numeric " << r.worst_numeric;
  }
}

using Inputs = std::vector<NumArray>;

TEST(OpGradients, Elementwise) {
  expect_op_gradients("add", [](auto& rng) {
    const Shape s{dim(rng), dim(rng)};
    return std::pair{Inputs{random_array(s, rng), random_array(s, rng)},
                     OpBuilder([](Graph&, std::vector<Var>& v) { return add(v[0], v[1]); })};
  });
  expect_op_gradients("sub", [](auto& rng) {
    const Shape s{dim(rng), dim(rng)};
    return std::pair{Inputs{random_array(s, rng), random_array(s, rng)},
                     OpBuilder([](Graph&, std::vector<Var>& v) { return sub(v[0], v[1]); })};
  });
  expect_op_gradients("mul", [](auto& rng) {
    const Shape s{dim(rng), dim(rng)};
    return std::pair{Inputs{random_array(s, rng), random_array(s, rng)},
                     OpBuilder([](Graph&, std::vector<Var>& v) { return mul(v[0], v[1]); })};
  });
  expect_op_gradients("scale", [](auto& rng) {
    return std::pair{Inputs{random_array({dim(rng), dim(rng)}, rng)},
                     OpBuilder([](Graph&, std::vector<Var>& v) { return add_scalar(scale(v[0], -1.7), 0.3); })};
  });
  expect_op_gradients("add_row_vector", [](auto& rng) {
    const std::size_t r = dim(rng), c = dim(rng);
    return std::pair{Inputs{random_array({r, c}, rng), random_array({c}, rng)},
                     OpBuilder([](Graph&, std::vector<Var>& v) { return add_row_vector(v[0], v[1]); })};
  });
}

TEST(OpGradients, Nonlinearities) {
  expect_op_gradients("relu", [](auto& rng) {
    return std::pair{Inputs{away_from_zero({dim(rng), dim(rng)}, rng)},
                     OpBuilder([](Graph&, std::vector<Var>& v) { return relu(v[0]); })};
  });
  expect_op_gradients("gelu", [](auto& rng) {
    return std::pair{Inputs{random_array({dim(rng), dim(rng)}, rng, -3.0, 3.0)},
                     OpBuilder([](Graph&, std::vector<Var>& v) { return gelu(v[0]); })};
  });
  expect_op_gradients("log", [](auto& rng) {
    return std::pair{Inputs{random_array({dim(rng), dim(rng)}, rng, 0.3, 3.0)},
                     OpBuilder([](Graph&, std::vector<Var>& v) { return log(v[0]); })};
  });
  expect_op_gradients("exp", [](auto& rng) {
    return std::pair{Inputs{random_array({dim(rng), dim(rng)}, rng)},
                     OpBuilder([](Graph&, std::vector<Var>& v) { return exp(v[0]); })};
  });
  expect_op_gradients("square", [](auto& rng) {
    return std::pair{Inputs{random_array({dim(rng), dim(rng)}, rng)},
                     OpBuilder([](Graph&, std::vector<Var>& v) { return square(v[0]); })};
  });
}

TEST(OpGradients, LinearAlgebra) {
  expect_op_gradients("matmul", [](auto& rng) {
    const std::size_t n = dim(rng), k = dim(rng), m = dim(rng);
    return std::pair{Inputs{random_array({n, k}, rng), random_array({k, m}, rng)},
                     OpBuilder([](Graph&, std::vector<Var>& v) { return matmul(v[0], v[1]); })};
  });
  expect_op_gradients("matmul_nt", [](auto& rng) {
    const std::size_t n = dim(rng), k = dim(rng), m = dim(rng);
    return std::pair{Inputs{random_array({n, k}, rng), random_array({m, k}, rng)},
                     OpBuilder([](Graph&, std::vector<Var>& v) { return matmul_nt(v[0], v[1]); })};
  });
  expect_op_gradients("dot", [](auto& rng) {
    const std::size_t n = dim(rng, 1, 6);
    return std::pair{Inputs{random_array({n}, rng), random_array({n}, rng)},
                     OpBuilder([](Graph&, std::vector<Var>& v) { return dot(v[0], v[1]); })};
  });
}

TEST(OpGradients, Reductions) {
  expect_op_gradients("sum", [](auto& rng) {
    return std::pair{Inputs{random_array({dim(rng), dim(rng)}, rng)},
                     OpBuilder([](Graph&, std::vector<Var>& v) {
                       return add(sum(v[0]), add(sum(sum(v[0], 0)), sum(sum(v[0], 1))));
                     })};
  });
  expect_op_gradients("mean", [](auto& rng) {
    const int axis = static_cast<int>(uniform_index(rng, 2));
    return std::pair{Inputs{random_array({dim(rng), dim(rng)}, rng)},
                     OpBuilder([axis](Graph&, std::vector<Var>& v) { return mean(v[0], axis); })};
  });
  expect_op_gradients("max", [](auto& rng) {
    const int axis = static_cast<int>(uniform_index(rng, 2));
    return std::pair{Inputs{random_array({dim(rng), dim(rng)}, rng)},
                     OpBuilder([axis](Graph&, std::vector<Var>& v) { return max(v[0], axis); })};
  });
  expect_op_gradients("softmax", [](auto& rng) {
    const int axis = static_cast<int>(uniform_index(rng, 2));
    return std::pair{Inputs{random_array({dim(rng), dim(rng, 2, 5)}, rng, -2.0, 2.0)},
                     OpBuilder([axis](Graph&, std::vector<Var>& v) { return softmax(v[0], axis); })};
  });
  expect_op_gradients("log_softmax", [](auto& rng) {
    const int axis = static_cast<int>(uniform_index(rng, 2));
    return std::pair{Inputs{random_array({dim(rng), dim(rng, 2, 5)}, rng, -2.0, 2.0)},
                     OpBuilder([axis](Graph&, std::vector<Var>& v) { return log_softmax(v[0], axis); })};
  });
}

Segments random_segments(std::size_t total, std::mt19937_64& rng) {
  Segments s;
  std::size_t off = 0;
  while (off < total) {
    const std::size_t len = std::min(total - off, dim(rng, 1, 3));
    s.push_back({off, len});
    off += len;
  }
  return s;
}

TEST(OpGradients, Segments) {
  expect_op_gradients("segment_max_rows", [](auto& rng) {
    const std::size_t r = dim(rng, 1, 7), c = dim(rng);
    auto seg = random_segments(r, rng);
    return std::pair{Inputs{random_array({r, c}, rng)},
                     OpBuilder([seg](Graph&, std::vector<Var>& v) { return segment_max_rows(v[0], seg); })};
  });
  expect_op_gradients("segment_sum_rows", [](auto& rng) {
    const std::size_t r = dim(rng, 1, 7), c = dim(rng);
    auto seg = random_segments(r, rng);
    return std::pair{Inputs{random_array({r, c}, rng)},
                     OpBuilder([seg](Graph&, std::vector<Var>& v) { return segment_sum_rows(v[0], seg); })};
  });
  expect_op_gradients("segment_max_cols", [](auto& rng) {
    const std::size_t r = dim(rng), c = dim(rng, 1, 7);
    auto seg = random_segments(c, rng);
    return std::pair{Inputs{random_array({r, c}, rng)},
                     OpBuilder([seg](Graph&, std::vector<Var>& v) { return segment_max_cols(v[0], seg); })};
  });
}

TEST(OpGradients, Indexing) {
  expect_op_gradients("element", [](auto& rng) {
    const Shape s{dim(rng), dim(rng)};
    const std::size_t i = uniform_index(rng, shape_size(s));
    return std::pair{Inputs{random_array(s, rng)},
                     OpBuilder([i](Graph&, std::vector<Var>& v) { return element(v[0], i); })};
  });
  expect_op_gradients("rows", [](auto& rng) {
    const std::size_t r = dim(rng), c = dim(rng);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0, n = dim(rng, 1, 6); i < n; ++i) idx.push_back(uniform_index(rng, r));
    return std::pair{Inputs{random_array({r, c}, rng)},
                     OpBuilder([idx](Graph&, std::vector<Var>& v) { return rows(v[0], idx); })};
  });
  expect_op_gradients("concat_rows", [](auto& rng) {
    const std::size_t c = dim(rng);
    return std::pair{Inputs{random_array({dim(rng), c}, rng), random_array({dim(rng), c}, rng)},
                     OpBuilder([](Graph&, std::vector<Var>& v) { return concat_rows(v); })};
  });
  expect_op_gradients("stack_weighted", [](auto& rng) {
    const std::vector<double> w = {0.3, -1.2, 2.0};
    return std::pair{Inputs{random_array({dim(rng), dim(rng)}, rng), random_array({dim(rng)}, rng)},
                     OpBuilder([w](Graph&, std::vector<Var>& v) {
                       const std::vector<Var> s = {sum(v[0]), sum(square(v[1])), element(v[0], 0)};
                       return add(stack_scalars(s), stack_scalars(std::vector<Var>(3, weighted_sum(s, w))));
                     })};
  });
}

TEST(OpGradients, ModelPrimitives) {
  expect_op_gradients("embedding", [](auto& rng) {
    const std::size_t v = dim(rng, 2, 6), d = dim(rng);
    std::vector<std::int32_t> ids;
    for (std::size_t i = 0, n = dim(rng, 1, 6); i < n; ++i) ids.push_back(static_cast<std::int32_t>(uniform_index(rng, v)));
    return std::pair{Inputs{random_array({v, d}, rng)},
                     OpBuilder([ids](Graph&, std::vector<Var>& in) { return embedding(in[0], ids); })};
  });
  expect_op_gradients("layer_norm", [](auto& rng) {
    const std::size_t r = dim(rng), c = dim(rng, 2, 6);
    return std::pair{Inputs{random_array({r, c}, rng, -2.0, 2.0), random_array({c}, rng, 0.5, 1.5),
                            random_array({c}, rng)},
                     OpBuilder([](Graph&, std::vector<Var>& v) { return layer_norm(v[0], v[1], v[2], 1e-5); })};
  });
  expect_op_gradients("attention", [](auto& rng) {
    const std::size_t heads = dim(rng, 1, 2), d = heads * dim(rng, 1, 3), r = dim(rng, 2, 7);
    auto seg = random_segments(r, rng);
    std::vector<std::uint8_t> mask(r, 1);
    // Mask a tail row of some segments, never the first.
    for (const auto& s : seg) {
      if (s.length > 1 && uniform_index(rng, 2) == 0) mask[s.offset + s.length - 1] = 0;
    }
    return std::pair{Inputs{random_array({r, d}, rng), random_array({r, d}, rng), random_array({r, d}, rng)},
                     OpBuilder([seg, mask, heads](Graph&, std::vector<Var>& v) {
                       return attention(v[0], v[1], v[2], seg, mask, heads);
                     })};
  });
  expect_op_gradients("lexical_pool", [](auto& rng) {
    const std::size_t r = dim(rng, 1, 6), d = dim(rng), vsize = dim(rng, 2, 6);
    auto seg = random_segments(r, rng);
    return std::pair{Inputs{random_array({r, d}, rng), random_array({vsize, d}, rng), away_from_zero({vsize}, rng)},
                     OpBuilder([seg](Graph&, std::vector<Var>& v) { return lexical_pool(v[0], v[1], v[2], seg); })};
  });
}

TEST(LexicalPool, EqualsComposedOps) {
  for (int seed = 0; seed < 50; ++seed) {
    auto rng = make_stream(static_cast<std::uint64_t>(seed), "pool");
    const std::size_t r = dim(rng, 1, 8), d = dim(rng), vsize = dim(rng, 2, 9);
    const auto seg = random_segments(r, rng);
    Graph g;
    Var h = g.input(random_array({r, d}, rng)), table = g.input(random_array({vsize, d}, rng));
    Var bias = g.input(random_array({vsize}, rng));
    Var fused = lexical_pool(h, table, bias, seg);
    Var composed = segment_max_rows(log(add_scalar(relu(add_row_vector(matmul_nt(h, table), bias)), 1.0)), seg);
    ASSERT_EQ(fused.value().shape(), composed.value().shape());
    for (std::size_t i = 0; i < fused.value().size(); ++i) {
      EXPECT_NEAR(fused.value()[i], composed.value()[i], 1e-14);
    }
  }
}

TEST(Backward, HandDifferentiatedExamples) {
  {
    Graph g;
    Var x = g.input(NumArray::vector({1.0, 1.0, 1.0, 1.0}));
    g.backward(sum(x));
    EXPECT_EQ(x.grad(), NumArray::vector({1.0, 1.0, 1.0, 1.0}));
  }
  {
    Graph g;
    Var x = g.input(NumArray::vector({1.0, 2.0}));
    g.backward(dot(x, x));
    EXPECT_EQ(x.grad(), NumArray::vector({2.0, 4.0}));
  }
  {
    Graph g;
    Var x = g.input(NumArray::vector({0.0, 0.0}));
    g.backward(element(log(softmax(x, 0)), 0));
    EXPECT_NEAR(x.grad()[0], 0.5, 1e-15);
    EXPECT_NEAR(x.grad()[1], -0.5, 1e-15);
  }
}

TEST(Forward, DefinitionExamples) {
  Graph g;
  auto rng = make_stream(3, "identity");
  const NumArray a = random_array({3, 3}, rng);
  const NumArray eye = NumArray::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  EXPECT_EQ(matmul(g.constant(eye), g.constant(a)).value(), a);
  const NumArray s = softmax(g.constant(NumArray::vector({0, 0, 0})), 0).value();
  for (double v : s.values()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
  EXPECT_EQ(relu(g.constant(NumArray::vector({-1, 0, 2}))).value(), NumArray::vector({0, 0, 2}));
}

TEST(Softmax, RowsSumToOne) {
  for (int seed = 0; seed < 200; ++seed) {
    auto rng = make_stream(static_cast<std::uint64_t>(seed), "softmax");
    const double spread = std::pow(10.0, static_cast<double>(uniform_index(rng, 4)));
    const NumArray x = random_array({dim(rng, 1, 6), dim(rng, 1, 30)}, rng, -spread, spread);
    Graph g;
    for (int axis : {0, 1}) {
      const NumArray p = softmax(g.constant(x), axis).value();
      const std::size_t outer = axis == 1 ? p.rows() : p.cols(), inner = axis == 1 ? p.cols() : p.rows();
      for (std::size_t o = 0; o < outer; ++o) {
        double total = 0.0;
        for (std::size_t i = 0; i < inner; ++i) {
          const double v = axis == 1 ? p.at(o, i) : p.at(i, o);
          ASSERT_GE(v, 0.0);
          total += v;
        }
        ASSERT_NEAR(total, 1.0, 1e-12) << "seed " << seed << " axis " << axis;
      }
    }
  }
}

TEST(Backward, GradientAccumulationIsLinear) {
  auto rng = make_stream(11, "linearity");
  Parameter p("w", random_array({3, 2}, rng));
  const NumArray x = random_array({2, 4}, rng);
  const auto loss_a = [&](Graph& g) { return sum(square(matmul(g.param(p), g.constant(x)))); };
  const auto loss_b = [&](Graph& g) { return sum(exp(g.param(p))); };

  p.zero_grad();
  {
    Graph g;
    g.backward(loss_a(g));
  }
  {
    Graph g;
    g.backward(loss_b(g));
  }
  const NumArray separate = p.grad;

  p.zero_grad();
  Graph g;
  g.backward(add(loss_a(g), loss_b(g)));
  for (std::size_t i = 0; i < separate.size(); ++i) EXPECT_NEAR(p.grad[i], separate[i], 1e-12);
}

TEST(Backward, Deterministic) {
  auto rng = make_stream(5, "det");
  const NumArray w0 = random_array({4, 4}, rng), x = random_array({3, 4}, rng);
  const auto run = [&] {
    Parameter p("w", w0);
    Graph g;
    Var y = log_softmax(gelu(matmul(g.constant(x), g.param(p))), 1);
    g.backward(sum(mul(y, y)));
    return std::pair{y.value(), p.grad};
  };
  EXPECT_EQ(run(), run());
}

TEST(GradCheck, QuadraticLossIsNearlyExact) {
  Parameter p("x", NumArray::vector({0.5, -1.5, 2.0}));
  Parameter* ptrs[] = {&p};
  const auto r = grad_check([&](Graph& g) { return sum(square(add_scalar(g.param(p), 1.0))); }, ptrs, 1e-5, 1e-3);
  EXPECT_TRUE(r.pass);
  EXPECT_LT(r.max_rel_err, 1e-6);
}

TEST(GradCheck, CorruptedGradientFails) {
  Parameter p("x", NumArray::vector({0.5, -1.5, 2.0}));
  Parameter* ptrs[] = {&p};
  const LossBuilder loss = [&](Graph& g) { return sum(exp(g.param(p))); };
  NumArray analytic(p.value.shape());
  for (std::size_t i = 0; i < 3; ++i) analytic[i] = std::exp(p.value[i]) * 1.01;
  const NumArray grads[] = {analytic};
  const auto r = grad_check_against(loss, ptrs, grads, 1e-5, 1e-3);
  EXPECT_FALSE(r.pass);
  EXPECT_GT(r.max_rel_err, 5e-3);
}

TEST(AdamW, FirstStepIsLearningRate) {
  Parameter p("x", NumArray::vector({0.0}));
  p.grad = NumArray::vector({1.0});
  AdamWConfig cfg;
  cfg.learning_rate = 0.1;
  AdamW opt(cfg);
  Parameter* ptrs[] = {&p};
  ASSERT_EQ(opt.step(ptrs), StepOutcome::kApplied);
  // m_hat = 1, v_hat = 1: update = -lr * 1 / (1 + eps).
  EXPECT_NEAR(p.value[0], -0.1 / (1.0 + 1e-8), 1e-15);
}

TEST(AdamW, ZeroGradientLeavesParameters) {
  Parameter p("x", NumArray::vector({0.25, -3.0}));
  AdamW opt;
  Parameter* ptrs[] = {&p};
  ASSERT_EQ(opt.step(ptrs), StepOutcome::kApplied);
  EXPECT_EQ(p.value, NumArray::vector({0.25, -3.0}));
  EXPECT_EQ(opt.state().step, 1);
}

TEST(AdamW, LinearDecayEndsAtTenthOfBase) {
  AdamWConfig cfg;
  cfg.learning_rate = 2e-3;
  cfg.total_steps = 100;
  AdamW opt(cfg);
  EXPECT_DOUBLE_EQ(opt.effective_lr(0), 2e-3);
  EXPECT_NEAR(opt.effective_lr(100), 2e-4, 1e-18);
  EXPECT_NEAR(opt.effective_lr(50), 2e-3 * 0.55, 1e-15);
}

TEST(AdamW, NonFiniteGradientIsSkipped) {
  Parameter p("x", NumArray::vector({1.0}));
  p.grad = NumArray::vector({std::nan("")});
  AdamW opt;
  Parameter* ptrs[] = {&p};
  EXPECT_EQ(opt.step(ptrs), StepOutcome::kSkippedNonFinite);
  EXPECT_EQ(p.value, NumArray::vector({1.0}));
  EXPECT_EQ(opt.state().step, 0);
}

}  // namespace
}  // namespace came::diff
