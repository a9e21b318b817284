#include "came/diff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace came::diff {
namespace {

Graph& graph_of(Var a) {
  if (!a.valid()) throw std::invalid_argument("operation on an empty Var");
  return a.graph();
}

Graph& graph_of(Var a, Var b) {
  Graph& g = graph_of(a);
  if (&graph_of(b) != &g) throw std::invalid_argument("operands belong to different graphs");
  return g;
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) throw ShapeError(op, a.shape(), b.shape());
  // A default-constructed array has rank 0 but no element.
  if (a.value().size() != b.value().size()) {
    throw ShapeError(std::string(op) + ": operand without storage for shape " + shape_to_string(a.shape()));
  }
}

void require_rank(const char* op, Var a, std::size_t rank) {
  if (a.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     shape_to_string(a.shape()));
  }
}

// (outer, n, inner) view of a reduction over one axis.
struct AxisView {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
  Shape out_shape;
};

AxisView axis_view(const char* op, const Shape& shape, int axis) {
  if (shape.empty() || axis < 0 || static_cast<std::size_t>(axis) >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                     shape_to_string(shape));
  }
  AxisView v;
  const auto ax = static_cast<std::size_t>(axis);
  for (std::size_t i = 0; i < ax; ++i) v.outer *= shape[i];
  v.n = shape[ax];
  for (std::size_t i = ax + 1; i < shape.size(); ++i) v.inner *= shape[i];
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != ax) v.out_shape.push_back(shape[i]);
  }
  return v;
}

template <typename Fwd, typename Deriv>
Var unary(const char* tag, Var a, Fwd fwd, Deriv deriv) {
  Graph& g = graph_of(a);
  const NumArray& x = a.value();
  NumArray y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  const auto pa = a.id();
  return g.record(tag, {pa}, std::move(y), [pa, deriv](Graph& gr, std::uint32_t self) {
    NumArray* ga = gr.grad_slot(pa);
    if (ga == nullptr) return;
    const NumArray& gy = *gr.grad_slot(self);
    const NumArray& xv = gr.value(pa);
    const NumArray& yv = gr.value(self);
    for (std::size_t i = 0; i < xv.size(); ++i) (*ga)[i] += gy[i] * deriv(xv[i], yv[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape("add", a, b);
  NumArray y = a.value();
  y.add_inplace(b.value());
  const auto pa = a.id(), pb = b.id();
  return g.record("add", {pa, pb}, std::move(y), [pa, pb](Graph& gr, std::uint32_t self) {
    const NumArray& gy = *gr.grad_slot(self);
    if (NumArray* ga = gr.grad_slot(pa)) ga->add_inplace(gy);
    if (NumArray* gb = gr.grad_slot(pb)) gb->add_inplace(gy);
  });
}

Var sub(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape("sub", a, b);
  NumArray y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b.value()[i];
  const auto pa = a.id(), pb = b.id();
  return g.record("sub", {pa, pb}, std::move(y), [pa, pb](Graph& gr, std::uint32_t self) {
    const NumArray& gy = *gr.grad_slot(self);
    if (NumArray* ga = gr.grad_slot(pa)) ga->add_inplace(gy);
    if (NumArray* gb = gr.grad_slot(pb)) {
      for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[i] -= gy[i];
    }
  });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape("mul", a, b);
  NumArray y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  const auto pa = a.id(), pb = b.id();
  return g.record("mul", {pa, pb}, std::move(y), [pa, pb](Graph& gr, std::uint32_t self) {
    const NumArray& gy = *gr.grad_slot(self);
    const NumArray& av = gr.value(pa);
    const NumArray& bv = gr.value(pb);
    if (NumArray* ga = gr.grad_slot(pa)) {
      for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * bv[i];
    }
    if (NumArray* gb = gr.grad_slot(pb)) {
      for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[i] += gy[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  return unary("scale", a, [factor](double x) { return x * factor; },
               [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double offset) {
  return unary("add_scalar", a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Var add_row_vector(Var a, Var row) {
  Graph& g = graph_of(a, row);
  require_rank("add_row_vector", a, 2);
  require_rank("add_row_vector", row, 1);
  const std::size_t r = a.value().rows(), c = a.value().cols();
  if (row.value().size() != c) throw ShapeError("add_row_vector", a.shape(), row.shape());
  NumArray y = a.value();
  const double* rv = row.value().data();
  for (std::size_t i = 0; i < r; ++i) {
    double* yi = y.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) yi[j] += rv[j];
  }
  const auto pa = a.id(), pr = row.id();
  return g.record("add_row_vector", {pa, pr}, std::move(y), [pa, pr, r, c](Graph& gr, std::uint32_t self) {
    const NumArray& gy = *gr.grad_slot(self);
    if (NumArray* ga = gr.grad_slot(pa)) ga->add_inplace(gy);
    if (NumArray* gb = gr.grad_slot(pr)) {
      for (std::size_t i = 0; i < r; ++i) {
        const double* gi = gy.data() + i * c;
        for (std::size_t j = 0; j < c; ++j) (*gb)[j] += gi[j];
      }
    }
  });
}

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  if (b.shape()[0] != k) throw ShapeError("matmul", a.shape(), b.shape());
  NumArray y(Shape{n, m});
  kernels::gemm_nn(n, k, m, a.value().data(), b.value().data(), y.data(), false);
  const auto pa = a.id(), pb = b.id();
  return g.record("matmul", {pa, pb}, std::move(y), [pa, pb, n, k, m](Graph& gr, std::uint32_t self) {
    const NumArray& gy = *gr.grad_slot(self);
    if (NumArray* ga = gr.grad_slot(pa)) kernels::gemm_nt(n, m, k, gy.data(), gr.value(pb).data(), ga->data(), true);
    if (NumArray* gb = gr.grad_slot(pb)) kernels::gemm_tn(n, k, m, gr.value(pa).data(), gy.data(), gb->data(), true);
  });
}

Var matmul_nt(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_rank("matmul_nt", a, 2);
  require_rank("matmul_nt", b, 2);
  const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[0];
  if (b.shape()[1] != k) throw ShapeError("matmul_nt", a.shape(), b.shape());
  NumArray y(Shape{n, m});
  kernels::gemm_nt(n, k, m, a.value().data(), b.value().data(), y.data(), false);
  const auto pa = a.id(), pb = b.id();
  return g.record("matmul_nt", {pa, pb}, std::move(y), [pa, pb, n, k, m](Graph& gr, std::uint32_t self) {
    const NumArray& gy = *gr.grad_slot(self);
    if (NumArray* ga = gr.grad_slot(pa)) kernels::gemm_nn(n, m, k, gy.data(), gr.value(pb).data(), ga->data(), true);
    if (NumArray* gb = gr.grad_slot(pb)) kernels::gemm_tn(n, m, k, gy.data(), gr.value(pa).data(), gb->data(), true);
  });
}

Var dot(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_rank("dot", a, 1);
  require_same_shape("dot", a, b);
  const double v = kernels::dot(a.value().data(), b.value().data(), a.value().size());
  const auto pa = a.id(), pb = b.id();
  return g.record("dot", {pa, pb}, NumArray::scalar(v), [pa, pb](Graph& gr, std::uint32_t self) {
    const double gy = gr.grad_slot(self)->item();
    const NumArray& av = gr.value(pa);
    const NumArray& bv = gr.value(pb);
    if (NumArray* ga = gr.grad_slot(pa)) {
      for (std::size_t i = 0; i < av.size(); ++i) (*ga)[i] += gy * bv[i];
    }
    if (NumArray* gb = gr.grad_slot(pb)) {
      for (std::size_t i = 0; i < av.size(); ++i) (*gb)[i] += gy * av[i];
    }
  });
}

Var relu(Var a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var gelu(Var a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return unary(
      "gelu", a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
      [](double x, double) { return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x); });
}

Var log(Var a) {
  return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var exp(Var a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var square(Var a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sum(Var a) {
  Graph& g = graph_of(a);
  double acc = 0.0;
  for (double v : a.value().values()) acc += v;
  const auto pa = a.id();
  return g.record("sum", {pa}, NumArray::scalar(acc), [pa](Graph& gr, std::uint32_t self) {
    const double gy = gr.grad_slot(self)->item();
    if (NumArray* ga = gr.grad_slot(pa)) {
      for (double& v : ga->values()) v += gy;
    }
  });
}

namespace {

Var reduce_sum(const char* tag, Var a, int axis, double factor) {
  Graph& g = graph_of(a);
  const AxisView v = axis_view(tag, a.shape(), axis);
  NumArray y(v.out_shape);
  const double* x = a.value().data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.n; ++i) {
      const double* xi = x + (o * v.n + i) * v.inner;
      double* yo = y.data() + o * v.inner;
      for (std::size_t j = 0; j < v.inner; ++j) yo[j] += xi[j];
    }
  }
  if (factor != 1.0) {
    for (double& val : y.values()) val *= factor;
  }
  const auto pa = a.id();
  return g.record(tag, {pa}, std::move(y), [pa, v, factor](Graph& gr, std::uint32_t self) {
    NumArray* ga = gr.grad_slot(pa);
    if (ga == nullptr) return;
    const NumArray& gy = *gr.grad_slot(self);
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t i = 0; i < v.n; ++i) {
        double* gi = ga->data() + (o * v.n + i) * v.inner;
        const double* go = gy.data() + o * v.inner;
        for (std::size_t j = 0; j < v.inner; ++j) gi[j] += go[j] * factor;
      }
    }
  });
}

}  // namespace

Var sum(Var a, int axis) { return reduce_sum("sum_axis", a, axis, 1.0); }

Var mean(Var a, int axis) {
  const AxisView v = axis_view("mean", a.shape(), axis);
  if (v.n == 0) throw ShapeError("mean: empty axis in shape " + shape_to_string(a.shape()));
  return reduce_sum("mean", a, axis, 1.0 / static_cast<double>(v.n));
}

Var max(Var a, int axis) {
  Graph& g = graph_of(a);
  const AxisView v = axis_view("max", a.shape(), axis);
  if (v.n == 0) throw ShapeError("max: empty axis in shape " + shape_to_string(a.shape()));
  NumArray y(v.out_shape);
  std::vector<std::size_t> arg(v.outer * v.inner);
  const double* x = a.value().data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t j = 0; j < v.inner; ++j) {
      std::size_t best = 0;
      double bv = x[o * v.n * v.inner + j];
      for (std::size_t i = 1; i < v.n; ++i) {
        const double c = x[(o * v.n + i) * v.inner + j];
        if (c > bv) {
          bv = c;
          best = i;
        }
      }
      y[o * v.inner + j] = bv;
      arg[o * v.inner + j] = (o * v.n + best) * v.inner + j;
    }
  }
  const auto pa = a.id();
  return g.record("max", {pa}, std::move(y), [pa, arg = std::move(arg)](Graph& gr, std::uint32_t self) {
    NumArray* ga = gr.grad_slot(pa);
    if (ga == nullptr) return;
    const NumArray& gy = *gr.grad_slot(self);
    for (std::size_t i = 0; i < arg.size(); ++i) (*ga)[arg[i]] += gy[i];
  });
}

Var segment_max_rows(Var a, const Segments& segments) {
  Graph& g = graph_of(a);
  require_rank("segment_max_rows", a, 2);
  const std::size_t rows_in = a.shape()[0], c = a.shape()[1];
  NumArray y(Shape{segments.size(), c});
  std::vector<std::size_t> arg(segments.size() * c);
  const double* x = a.value().data();
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const Segment seg = segments[s];
    if (seg.length == 0 || seg.offset + seg.length > rows_in) {
      throw ShapeError("segment_max_rows: segment out of range for shape " + shape_to_string(a.shape()));
    }
    for (std::size_t j = 0; j < c; ++j) {
      std::size_t best = seg.offset;
      double bv = x[seg.offset * c + j];
      for (std::size_t r = seg.offset + 1; r < seg.offset + seg.length; ++r) {
        if (x[r * c + j] > bv) {
          bv = x[r * c + j];
          best = r;
        }
      }
      y[s * c + j] = bv;
      arg[s * c + j] = best * c + j;
    }
  }
  const auto pa = a.id();
  return g.record("segment_max_rows", {pa}, std::move(y), [pa, arg = std::move(arg)](Graph& gr, std::uint32_t self) {
    NumArray* ga = gr.grad_slot(pa);
    if (ga == nullptr) return;
    const NumArray& gy = *gr.grad_slot(self);
    for (std::size_t i = 0; i < arg.size(); ++i) (*ga)[arg[i]] += gy[i];
  });
}

Var lexical_pool(Var h, Var table, Var bias, const Segments& segments) {
  Graph& g = graph_of(h, table);
  require_rank("lexical_pool", h, 2);
  require_rank("lexical_pool", table, 2);
  require_rank("lexical_pool", bias, 1);
  const std::size_t rows_in = h.shape()[0], d = h.shape()[1], v = table.shape()[0];
  if (table.shape()[1] != d) throw ShapeError("lexical_pool", h.shape(), table.shape());
  if (bias.shape()[0] != v) throw ShapeError("lexical_pool", table.shape(), bias.shape());
  std::vector<double> tt(d * v);  // table transposed, d x V
  const double* tv = table.value().data();
  for (std::size_t t = 0; t < v; ++t) {
    for (std::size_t p = 0; p < d; ++p) tt[p * v + t] = tv[t * d + p];
  }
  const double* bv = bias.value().data();
  NumArray y(Shape{segments.size(), v});
  // Per output entry: winning row (or npos when every row is clipped) and its 1 + relu value.
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> arg(segments.size() * v, kNone);
  std::vector<double> denom(segments.size() * v, 1.0);
  std::vector<double> logits;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const Segment seg = segments[s];
    if (seg.length == 0 || seg.offset + seg.length > rows_in) {
      throw ShapeError("lexical_pool: segment out of range for shape " + shape_to_string(h.shape()));
    }
    logits.assign(seg.length * v, 0.0);
    kernels::gemm_nn(seg.length, d, v, h.value().data() + seg.offset * d, tt.data(), logits.data(), false);
    double* ys = y.data() + s * v;
    for (std::size_t r = 0; r < seg.length; ++r) {
      const double* lr = logits.data() + r * v;
      for (std::size_t t = 0; t < v; ++t) {
        const double z = lr[t] + bv[t];
        const double w = std::log((z > 0.0 ? z : 0.0) + 1.0);
        if (r == 0 || w > ys[t]) {
          ys[t] = w;
          arg[s * v + t] = z > 0.0 ? seg.offset + r : kNone;
          denom[s * v + t] = (z > 0.0 ? z : 0.0) + 1.0;
        }
      }
    }
  }
  const auto ph = h.id(), pt = table.id(), pb = bias.id();
  return g.record("lexical_pool", {ph, pt, pb}, std::move(y),
                  [ph, pt, pb, d, v, arg = std::move(arg), denom = std::move(denom)](Graph& gr, std::uint32_t self) {
                    const NumArray& gy = *gr.grad_slot(self);
                    NumArray* gh = gr.grad_slot(ph);
                    NumArray* gt = gr.grad_slot(pt);
                    NumArray* gb = gr.grad_slot(pb);
                    const double* hv = gr.value(ph).data();
                    const double* tv = gr.value(pt).data();
                    for (std::size_t i = 0; i < arg.size(); ++i) {
                      if (arg[i] == kNone || gy[i] == 0.0) continue;
                      const std::size_t t = i % v, r = arg[i];
                      const double gz = gy[i] / denom[i];
                      if (gh != nullptr) {
                        for (std::size_t p = 0; p < d; ++p) (*gh)[r * d + p] += gz * tv[t * d + p];
                      }
                      if (gt != nullptr) {
                        for (std::size_t p = 0; p < d; ++p) (*gt)[t * d + p] += gz * hv[r * d + p];
                      }
                      if (gb != nullptr) (*gb)[t] += gz;
                    }
                  });
}

Var segment_sum_rows(Var a, const Segments& segments) {
  Graph& g = graph_of(a);
  require_rank("segment_sum_rows", a, 2);
  const std::size_t rows_in = a.shape()[0], c = a.shape()[1];
  NumArray y(Shape{segments.size(), c});
  const double* x = a.value().data();
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const Segment seg = segments[s];
    if (seg.offset + seg.length > rows_in) {
      throw ShapeError("segment_sum_rows: segment out of range for shape " + shape_to_string(a.shape()));
    }
    double* ys = y.data() + s * c;
    for (std::size_t r = seg.offset; r < seg.offset + seg.length; ++r) {
      for (std::size_t j = 0; j < c; ++j) ys[j] += x[r * c + j];
    }
  }
  const auto pa = a.id();
  return g.record("segment_sum_rows", {pa}, std::move(y), [pa, c, segments](Graph& gr, std::uint32_t self) {
    NumArray* ga = gr.grad_slot(pa);
    if (ga == nullptr) return;
    const NumArray& gy = *gr.grad_slot(self);
    for (std::size_t s = 0; s < segments.size(); ++s) {
      const double* gs = gy.data() + s * c;
      for (std::size_t r = segments[s].offset; r < segments[s].offset + segments[s].length; ++r) {
        double* gr_row = ga->data() + r * c;
        for (std::size_t j = 0; j < c; ++j) gr_row[j] += gs[j];
      }
    }
  });
}

Var segment_max_cols(Var a, const Segments& groups) {
  Graph& g = graph_of(a);
  require_rank("segment_max_cols", a, 2);
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  const std::size_t ng = groups.size();
  NumArray y(Shape{r, ng});
  std::vector<std::size_t> arg(r * ng);
  const double* x = a.value().data();
  for (std::size_t s = 0; s < ng; ++s) {
    const Segment seg = groups[s];
    if (seg.length == 0 || seg.offset + seg.length > c) {
      throw ShapeError("segment_max_cols: group out of range for shape " + shape_to_string(a.shape()));
    }
  }
  for (std::size_t i = 0; i < r; ++i) {
    const double* xi = x + i * c;
    for (std::size_t s = 0; s < ng; ++s) {
      const Segment seg = groups[s];
      std::size_t best = seg.offset;
      double bv = xi[seg.offset];
      for (std::size_t j = seg.offset + 1; j < seg.offset + seg.length; ++j) {
        if (xi[j] > bv) {
          bv = xi[j];
          best = j;
        }
      }
      y[i * ng + s] = bv;
      arg[i * ng + s] = i * c + best;
    }
  }
  const auto pa = a.id();
  return g.record("segment_max_cols", {pa}, std::move(y), [pa, arg = std::move(arg)](Graph& gr, std::uint32_t self) {
    NumArray* ga = gr.grad_slot(pa);
    if (ga == nullptr) return;
    const NumArray& gy = *gr.grad_slot(self);
    for (std::size_t i = 0; i < arg.size(); ++i) (*ga)[arg[i]] += gy[i];
  });
}

Var softmax(Var a, int axis) {
  Graph& g = graph_of(a);
  const AxisView v = axis_view("softmax", a.shape(), axis);
  NumArray y(a.shape());
  const double* x = a.value().data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t j = 0; j < v.inner; ++j) {
      const auto at = [&](std::size_t i) { return (o * v.n + i) * v.inner + j; };
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < v.n; ++i) mx = std::max(mx, x[at(i)]);
      double z = 0.0;
      for (std::size_t i = 0; i < v.n; ++i) {
        y[at(i)] = std::exp(x[at(i)] - mx);
        z += y[at(i)];
      }
      for (std::size_t i = 0; i < v.n; ++i) y[at(i)] /= z;
    }
  }
  const auto pa = a.id();
  return g.record("softmax", {pa}, std::move(y), [pa, v](Graph& gr, std::uint32_t self) {
    NumArray* ga = gr.grad_slot(pa);
    if (ga == nullptr) return;
    const NumArray& gy = *gr.grad_slot(self);
    const NumArray& yv = gr.value(self);
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t j = 0; j < v.inner; ++j) {
        const auto at = [&](std::size_t i) { return (o * v.n + i) * v.inner + j; };
        double s = 0.0;
        for (std::size_t i = 0; i < v.n; ++i) s += gy[at(i)] * yv[at(i)];
        for (std::size_t i = 0; i < v.n; ++i) (*ga)[at(i)] += yv[at(i)] * (gy[at(i)] - s);
      }
    }
  });
}

Var log_softmax(Var a, int axis) {
  Graph& g = graph_of(a);
  const AxisView v = axis_view("log_softmax", a.shape(), axis);
  NumArray y(a.shape());
  const double* x = a.value().data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t j = 0; j < v.inner; ++j) {
      const auto at = [&](std::size_t i) { return (o * v.n + i) * v.inner + j; };
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < v.n; ++i) mx = std::max(mx, x[at(i)]);
      double z = 0.0;
      for (std::size_t i = 0; i < v.n; ++i) z += std::exp(x[at(i)] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t i = 0; i < v.n; ++i) y[at(i)] = x[at(i)] - lse;
    }
  }
  const auto pa = a.id();
  return g.record("log_softmax", {pa}, std::move(y), [pa, v](Graph& gr, std::uint32_t self) {
    NumArray* ga = gr.grad_slot(pa);
    if (ga == nullptr) return;
    const NumArray& gy = *gr.grad_slot(self);
    const NumArray& yv = gr.value(self);
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t j = 0; j < v.inner; ++j) {
        const auto at = [&](std::size_t i) { return (o * v.n + i) * v.inner + j; };
        double s = 0.0;
        for (std::size_t i = 0; i < v.n; ++i) s += gy[at(i)];
        for (std::size_t i = 0; i < v.n; ++i) (*ga)[at(i)] += gy[at(i)] - std::exp(yv[at(i)]) * s;
      }
    }
  });
}

Var element(Var a, std::size_t index) {
  Graph& g = graph_of(a);
  if (index >= a.value().size()) {
    throw std::out_of_range("element: index " + std::to_string(index) + " out of range for shape " +
                            shape_to_string(a.shape()));
  }
  const auto pa = a.id();
  return g.record("element", {pa}, NumArray::scalar(a.value()[index]), [pa, index](Graph& gr, std::uint32_t self) {
    if (NumArray* ga = gr.grad_slot(pa)) (*ga)[index] += gr.grad_slot(self)->item();
  });
}

Var rows(Var a, std::vector<std::size_t> indices) {
  Graph& g = graph_of(a);
  require_rank("rows", a, 2);
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  NumArray y(Shape{indices.size(), c});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= r) throw std::out_of_range("rows: row index out of range for shape " + shape_to_string(a.shape()));
    std::copy_n(a.value().data() + indices[i] * c, c, y.data() + i * c);
  }
  const auto pa = a.id();
  return g.record("rows", {pa}, std::move(y), [pa, c, indices = std::move(indices)](Graph& gr, std::uint32_t self) {
    NumArray* ga = gr.grad_slot(pa);
    if (ga == nullptr) return;
    const NumArray& gy = *gr.grad_slot(self);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      double* dst = ga->data() + indices[i] * c;
      const double* src = gy.data() + i * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  Graph& g = graph_of(parts[0]);
  const std::size_t c = parts[0].value().cols();
  std::size_t total = 0;
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    graph_of(parts[0], p);
    if (p.value().rank() > 2 || p.value().cols() != c) throw ShapeError("concat_rows", parts[0].shape(), p.shape());
    ids.push_back(p.id());
    offsets.push_back(total);
    total += p.value().rows();
  }
  NumArray y(Shape{total, c});
  for (std::size_t i = 0; i < parts.size(); ++i) {
    std::copy(parts[i].value().values().begin(), parts[i].value().values().end(), y.data() + offsets[i] * c);
  }
  std::vector<std::uint32_t> parents = ids;
  return g.record("concat_rows", std::move(parents), std::move(y),
                  [ids = std::move(ids), offsets = std::move(offsets), c](Graph& gr, std::uint32_t self) {
                    const NumArray& gy = *gr.grad_slot(self);
                    for (std::size_t i = 0; i < ids.size(); ++i) {
                      NumArray* gp = gr.grad_slot(ids[i]);
                      if (gp == nullptr) continue;
                      const double* src = gy.data() + offsets[i] * c;
                      for (std::size_t j = 0; j < gp->size(); ++j) (*gp)[j] += src[j];
                    }
                  });
}

Var stack_scalars(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("stack_scalars: no inputs");
  Graph& g = graph_of(parts[0]);
  NumArray y(Shape{parts.size()});
  std::vector<std::uint32_t> ids;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    graph_of(parts[0], parts[i]);
    y[i] = parts[i].value().item();
    ids.push_back(parts[i].id());
  }
  std::vector<std::uint32_t> parents = ids;
  return g.record("stack_scalars", std::move(parents), std::move(y), [ids = std::move(ids)](Graph& gr, std::uint32_t self) {
    const NumArray& gy = *gr.grad_slot(self);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (NumArray* gp = gr.grad_slot(ids[i])) (*gp)[0] += gy[i];
    }
  });
}

Var weighted_sum(std::span<const Var> scalars, std::span<const double> weights) {
  if (scalars.empty() || scalars.size() != weights.size()) {
    throw std::invalid_argument("weighted_sum: need one weight per scalar");
  }
  Graph& g = graph_of(scalars[0]);
  double acc = 0.0;
  std::vector<std::uint32_t> ids;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    graph_of(scalars[0], scalars[i]);
    acc += weights[i] * scalars[i].value().item();
    ids.push_back(scalars[i].id());
  }
  std::vector<double> w(weights.begin(), weights.end());
  std::vector<std::uint32_t> parents = ids;
  return g.record("weighted_sum", std::move(parents), NumArray::scalar(acc),
                  [ids = std::move(ids), w = std::move(w)](Graph& gr, std::uint32_t self) {
                    const double gy = gr.grad_slot(self)->item();
                    for (std::size_t i = 0; i < ids.size(); ++i) {
                      if (NumArray* gp = gr.grad_slot(ids[i])) (*gp)[0] += gy * w[i];
                    }
                  });
}

Var embedding(Var table, std::span<const std::int32_t> ids) {
  Graph& g = graph_of(table);
  require_rank("embedding", table, 2);
  const std::size_t vsize = table.shape()[0], d = table.shape()[1];
  NumArray y(Shape{ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vsize) {
      throw std::out_of_range("embedding: token id " + std::to_string(ids[i]) + " >= table size " + std::to_string(vsize));
    }
    std::copy_n(table.value().data() + static_cast<std::size_t>(ids[i]) * d, d, y.data() + i * d);
  }
  std::vector<std::int32_t> idv(ids.begin(), ids.end());
  const auto pt = table.id();
  return g.record("embedding", {pt}, std::move(y), [pt, d, idv = std::move(idv)](Graph& gr, std::uint32_t self) {
    NumArray* gt = gr.grad_slot(pt);
    if (gt == nullptr) return;
    const NumArray& gy = *gr.grad_slot(self);
    for (std::size_t i = 0; i < idv.size(); ++i) {
      double* dst = gt->data() + static_cast<std::size_t>(idv[i]) * d;
      const double* src = gy.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Graph& g = graph_of(x, gain);
  graph_of(x, bias);
  require_rank("layer_norm", x, 2);
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  if (gain.value().size() != c || bias.value().size() != c) throw ShapeError("layer_norm", x.shape(), gain.shape());
  NumArray y(x.shape());
  NumArray xhat(x.shape());
  std::vector<double> inv_std(r);
  const double* xv = x.value().data();
  const double* gv = gain.value().data();
  const double* bv = bias.value().data();
  for (std::size_t i = 0; i < r; ++i) {
    const double* xi = xv + i * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += xi[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (xi[j] - mu) * (xi[j] - mu);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (xi[j] - mu) * is;
      xhat[i * c + j] = h;
      y[i * c + j] = h * gv[j] + bv[j];
    }
  }
  const auto px = x.id(), pg = gain.id(), pb = bias.id();
  return g.record("layer_norm", {px, pg, pb}, std::move(y),
                  [px, pg, pb, r, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& gr, std::uint32_t self) {
                    const NumArray& gy = *gr.grad_slot(self);
                    const double* gv = gr.value(pg).data();
                    if (NumArray* gg = gr.grad_slot(pg)) {
                      for (std::size_t i = 0; i < r; ++i) {
                        for (std::size_t j = 0; j < c; ++j) (*gg)[j] += gy[i * c + j] * xhat[i * c + j];
                      }
                    }
                    if (NumArray* gb = gr.grad_slot(pb)) {
                      for (std::size_t i = 0; i < r; ++i) {
                        for (std::size_t j = 0; j < c; ++j) (*gb)[j] += gy[i * c + j];
                      }
                    }
                    if (NumArray* gx = gr.grad_slot(px)) {
                      const double inv_c = 1.0 / static_cast<double>(c);
                      for (std::size_t i = 0; i < r; ++i) {
                        double m1 = 0.0, m2 = 0.0;
                        for (std::size_t j = 0; j < c; ++j) {
                          const double dh = gy[i * c + j] * gv[j];
                          m1 += dh;
                          m2 += dh * xhat[i * c + j];
                        }
                        m1 *= inv_c;
                        m2 *= inv_c;
                        for (std::size_t j = 0; j < c; ++j) {
                          const double dh = gy[i * c + j] * gv[j];
                          (*gx)[i * c + j] += inv_std[i] * (dh - m1 - xhat[i * c + j] * m2);
                        }
                      }
                    }
                  });
}

Var attention(Var q, Var k, Var v, const Segments& segments, std::span<const std::uint8_t> key_mask,
              std::size_t heads) {
  Graph& g = graph_of(q, k);
  graph_of(q, v);
  require_rank("attention", q, 2);
  require_same_shape("attention", q, k);
  require_same_shape("attention", q, v);
  const std::size_t n = q.shape()[0], d = q.shape()[1];
  if (heads == 0 || d % heads != 0) {
    throw ShapeError("attention: width " + std::to_string(d) + " not divisible by " + std::to_string(heads) + " heads");
  }
  if (key_mask.size() != n) throw ShapeError("attention: key mask length does not match " + shape_to_string(q.shape()));
  const std::size_t dh = d / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));

  // Probabilities laid out per (segment, head) as L x L blocks.
  std::vector<std::size_t> prob_offset(segments.size());
  std::size_t total = 0;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (segments[s].offset + segments[s].length > n) throw ShapeError("attention: segment exceeds " + shape_to_string(q.shape()));
    prob_offset[s] = total;
    total += heads * segments[s].length * segments[s].length;
  }
  std::vector<double> probs(total, 0.0);
  NumArray y(Shape{n, d});
  const double* qv = q.value().data();
  const double* kv = k.value().data();
  const double* vv = v.value().data();
  std::vector<std::uint8_t> mask(key_mask.begin(), key_mask.end());

  for (std::size_t s = 0; s < segments.size(); ++s) {
    const std::size_t off = segments[s].offset, len = segments[s].length;
    for (std::size_t h = 0; h < heads; ++h) {
      double* p = probs.data() + prob_offset[s] + h * len * len;
      for (std::size_t i = 0; i < len; ++i) {
        const double* qi = qv + (off + i) * d + h * dh;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < len; ++j) {
          if (mask[off + j] == 0) continue;
          const double* kj = kv + (off + j) * d + h * dh;
          const double sij = kernels::dot(qi, kj, dh) * sc;
          p[i * len + j] = sij;
          mx = std::max(mx, sij);
        }
        if (mx == -std::numeric_limits<double>::infinity()) continue;
        double z = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
          if (mask[off + j] == 0) continue;
          p[i * len + j] = std::exp(p[i * len + j] - mx);
          z += p[i * len + j];
        }
        double* yi = y.data() + (off + i) * d + h * dh;
        for (std::size_t j = 0; j < len; ++j) {
          if (mask[off + j] == 0) continue;
          p[i * len + j] /= z;
          const double pij = p[i * len + j];
          const double* vj = vv + (off + j) * d + h * dh;
          for (std::size_t c = 0; c < dh; ++c) yi[c] += pij * vj[c];
        }
      }
    }
  }

  const auto pq = q.id(), pk = k.id(), pv = v.id();
  return g.record("attention", {pq, pk, pv}, std::move(y),
                  [pq, pk, pv, d, dh, heads, sc, segments, prob_offset = std::move(prob_offset),
                   probs = std::move(probs), mask = std::move(mask)](Graph& gr, std::uint32_t self) {
                    const NumArray& gy = *gr.grad_slot(self);
                    NumArray* gq = gr.grad_slot(pq);
                    NumArray* gk = gr.grad_slot(pk);
                    NumArray* gv = gr.grad_slot(pv);
                    const double* qv = gr.value(pq).data();
                    const double* kv = gr.value(pk).data();
                    const double* vv = gr.value(pv).data();
                    std::vector<double> dp;
                    for (std::size_t s = 0; s < segments.size(); ++s) {
                      const std::size_t off = segments[s].offset, len = segments[s].length;
                      dp.assign(len, 0.0);
                      for (std::size_t h = 0; h < heads; ++h) {
                        const double* p = probs.data() + prob_offset[s] + h * len * len;
                        for (std::size_t i = 0; i < len; ++i) {
                          const double* gyi = gy.data() + (off + i) * d + h * dh;
                          double weighted = 0.0;
                          for (std::size_t j = 0; j < len; ++j) {
                            if (mask[off + j] == 0) {
                              dp[j] = 0.0;
                              continue;
                            }
                            const double pij = p[i * len + j];
                            const double* vj = vv + (off + j) * d + h * dh;
                            dp[j] = kernels::dot(gyi, vj, dh);
                            weighted += pij * dp[j];
                            if (gv != nullptr) {
                              double* gvj = gv->data() + (off + j) * d + h * dh;
                              for (std::size_t c = 0; c < dh; ++c) gvj[c] += pij * gyi[c];
                            }
                          }
                          const double* qi = qv + (off + i) * d + h * dh;
                          double* gqi = gq != nullptr ? gq->data() + (off + i) * d + h * dh : nullptr;
                          for (std::size_t j = 0; j < len; ++j) {
                            if (mask[off + j] == 0) continue;
                            const double ds = p[i * len + j] * (dp[j] - weighted) * sc;
                            if (ds == 0.0) continue;
                            const double* kj = kv + (off + j) * d + h * dh;
                            if (gqi != nullptr) {
                              for (std::size_t c = 0; c < dh; ++c) gqi[c] += ds * kj[c];
                            }
                            if (gk != nullptr) {
                              double* gkj = gk->data() + (off + j) * d + h * dh;
                              for (std::size_t c = 0; c < dh; ++c) gkj[c] += ds * qi[c];
                            }
                          }
                        }
                      }
                    }
                  });
}

Var apply(std::string_view tag, std::span<const Var> inputs) {
  const auto arity = [&](std::size_t n) {
    if (inputs.size() != n) {
      throw std::invalid_argument("operation '" + std::string(tag) + "' expects " + std::to_string(n) + " inputs, got " +
                                  std::to_string(inputs.size()));
    }
  };
  const auto last_axis = [&]() { return static_cast<int>(inputs[0].value().rank()) - 1; };
  if (tag == "add") return arity(2), add(inputs[0], inputs[1]);
  if (tag == "sub") return arity(2), sub(inputs[0], inputs[1]);
  if (tag == "mul") return arity(2), mul(inputs[0], inputs[1]);
  if (tag == "matmul") return arity(2), matmul(inputs[0], inputs[1]);
  if (tag == "matmul_nt") return arity(2), matmul_nt(inputs[0], inputs[1]);
  if (tag == "dot") return arity(2), dot(inputs[0], inputs[1]);
  if (tag == "relu") return arity(1), relu(inputs[0]);
  if (tag == "gelu") return arity(1), gelu(inputs[0]);
  if (tag == "log") return arity(1), log(inputs[0]);
  if (tag == "exp") return arity(1), exp(inputs[0]);
  if (tag == "square") return arity(1), square(inputs[0]);
  if (tag == "sum") return arity(1), sum(inputs[0]);
  if (tag == "softmax") return arity(1), softmax(inputs[0], last_axis());
  if (tag == "log_softmax") return arity(1), log_softmax(inputs[0], last_axis());
  if (tag == "max") return arity(1), max(inputs[0], last_axis());
  if (tag == "mean") return arity(1), mean(inputs[0], last_axis());
  if (tag == "concat_rows") return concat_rows(inputs);
  throw std::invalid_argument("unknown operation tag '" + std::string(tag) + "'");
}

}  // namespace came::diff
