#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "came/diff/num_array.hpp"

namespace came::diff {

/// A trainable array together with its accumulated gradient.
struct Parameter {
  std::string name;
  NumArray value;
  NumArray grad;

  Parameter() = default;
  Parameter(std::string n, NumArray v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad = NumArray(value.shape()); }
};

class Graph;

/// Lightweight handle to a node of a Graph.
class Var {
 public:
  Var() = default;
  Var(Graph* g, std::uint32_t id) : graph_(g), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const NumArray& value() const;
  const Shape& shape() const { return value().shape(); }
  /// Gradient of the last backward root w.r.t. this node (zeros if unreached).
  NumArray grad() const;

 private:
  Graph* graph_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Propagates the node's output gradient to its parents' gradients.
using BackwardFn = std::function<void(Graph&, std::uint32_t self)>;

/// Tape of operations recorded in creation order. Node ids are a topological
/// order, so backward is a single reverse sweep.
class Graph {
 public:
  enum class Mode { kRecord, kInference };

  explicit Graph(Mode mode = Mode::kRecord) : mode_(mode) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return mode_ == Mode::kRecord; }

  /// Constant leaf; never receives a gradient.
  Var constant(NumArray value);
  /// Constant leaf viewing an array owned elsewhere; it must outlive the graph.
  Var reference(const NumArray& value);
  /// Leaf that receives a gradient readable through Var::grad().
  Var input(NumArray value);
  /// Leaf bound to a parameter; backward accumulates into `p.grad`. The
  /// parameter must outlive the graph and must not be resized meanwhile.
  Var param(Parameter& p);

  /// Records a computed node. Parents that require gradients make the result
  /// require one as well; `backward` is dropped in inference mode.
  Var record(std::string_view tag, std::vector<std::uint32_t> parents, NumArray value, BackwardFn backward);

  const NumArray& value(std::uint32_t id) const;
  NumArray grad(std::uint32_t id) const;
  std::string_view tag(std::uint32_t id) const { return nodes_[id].tag; }
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient slot of a node, zero-initialized on first use; nullptr when the
  /// node does not require a gradient.
  NumArray* grad_slot(std::uint32_t id);

  /// Reverse sweep from a scalar root. Node gradients are reset first;
  /// parameter gradients accumulate across calls.
  void backward(Var root);

 private:
  struct Node {
    std::string_view tag;
    std::vector<std::uint32_t> parents;
    NumArray value;
    const NumArray* external = nullptr;
    NumArray grad;
    Parameter* param = nullptr;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Mode mode_;
  // deque keeps value() references valid while the graph grows.
  std::deque<Node> nodes_;
};

}  // namespace came::diff
