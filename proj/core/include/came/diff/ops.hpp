#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "came/diff/graph.hpp"

namespace came::diff {

/// Contiguous row ranges of a packed matrix; one range per sequence.
struct Segment {
  std::size_t offset = 0;
  std::size_t length = 0;
};
using Segments = std::vector<Segment>;

// Arithmetic.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
/// Adds a length-cols vector to every row of a matrix.
Var add_row_vector(Var a, Var row);

// Linear algebra.
Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
/// Inner product of two rank-1 arrays; scalar result.
Var dot(Var a, Var b);

// Element-wise non-linearities.
Var relu(Var a);
Var gelu(Var a);
Var log(Var a);
Var exp(Var a);
Var square(Var a);

// Reductions. `axis` counts from the front; rank-1 inputs use axis 0.
Var sum(Var a);
Var sum(Var a, int axis);
Var mean(Var a, int axis);
/// Max over an axis. Ties route the gradient to the first maximal index.
Var max(Var a, int axis);
/// Max over the rows of each segment: (rows x C) -> (segments x C).
Var segment_max_rows(Var a, const Segments& segments);
/// Sum over the rows of each segment: (rows x C) -> (segments x C).
Var segment_sum_rows(Var a, const Segments& segments);
/// Max over column groups: (R x cols) -> (R x groups).
Var segment_max_cols(Var a, const Segments& groups);
Var softmax(Var a, int axis);
Var log_softmax(Var a, int axis);

// Indexing.
/// Single element as a scalar.
Var element(Var a, std::size_t index);
/// Gathers rows of a matrix.
Var rows(Var a, std::vector<std::size_t> indices);
Var concat_rows(std::span<const Var> parts);
/// Stacks scalars into a rank-1 array.
Var stack_scalars(std::span<const Var> parts);
Var weighted_sum(std::span<const Var> scalars, std::span<const double> weights);

// Model primitives.
/// Row lookup into `table` (V x d). Throws std::out_of_range for ids >= V.
Var embedding(Var table, std::span<const std::int32_t> ids);
/// Max-pooled log-saturated term weights of packed sequences:
/// out[s][t] = max over rows r of segment s of log(1 + relu(h_r . table_t + bias_t)).
/// Equals segment_max_rows(log(add_scalar(relu(add_row_vector(matmul_nt(h, table), bias)), 1)))
/// without materializing the (rows x V) intermediates.
Var lexical_pool(Var h, Var table, Var bias, const Segments& segments);
/// Row-wise layer normalization with learned gain and bias.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-12);

/// Fused multi-head scaled dot-product attention over packed sequences.
/// q, k, v: (rows x d). Attention is restricted to each segment, and keys with
/// `key_mask[row] == 0` are never attended to.
Var attention(Var q, Var k, Var v, const Segments& segments, std::span<const std::uint8_t> key_mask,
              std::size_t heads);

/// Generic dispatch for attribute-free operations, by tag name. Axis-taking
/// operations use the last axis. Throws std::invalid_argument on unknown tags
/// or wrong arity.
Var apply(std::string_view tag, std::span<const Var> inputs);

}  // namespace came::diff
