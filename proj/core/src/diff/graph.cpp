#include "came/diff/graph.hpp"

#include <stdexcept>

namespace came::diff {

const NumArray& Var::value() const { return graph_->value(id_); }
NumArray Var::grad() const { return graph_->grad(id_); }

Var Graph::constant(NumArray value) {
  Node n;
  n.tag = "constant";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::reference(const NumArray& value) {
  Node n;
  n.tag = "reference";
  n.external = &value;
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::input(NumArray value) {
  Node n;
  n.tag = "input";
  n.value = std::move(value);
  n.requires_grad = recording();
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::param(Parameter& p) {
  Node n;
  n.tag = "param";
  n.external = &p.value;
  n.param = &p;
  n.requires_grad = recording();
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::record(std::string_view tag, std::vector<std::uint32_t> parents, NumArray value, BackwardFn backward) {
  Node n;
  n.tag = tag;
  n.value = std::move(value);
  if (recording()) {
    for (auto p : parents) n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
    if (n.requires_grad) {
      n.parents = std::move(parents);
      n.backward = std::move(backward);
    }
  }
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const NumArray& Graph::value(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.external != nullptr ? *n.external : n.value;
}

NumArray Graph::grad(std::uint32_t id) const {
  const Node& n = nodes_[id];
  if (n.grad.shape() != value(id).shape() || n.grad.size() != value(id).size()) return NumArray(value(id).shape());
  return n.grad;
}

NumArray* Graph::grad_slot(std::uint32_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (n.grad.size() != value(id).size() || n.grad.shape() != value(id).shape()) {
    n.grad = NumArray(value(id).shape());
  }
  return &n.grad;
}

void Graph::backward(Var root) {
  if (root.valid() && &root.graph() != this) throw std::invalid_argument("backward: root belongs to another graph");
  if (value(root.id()).size() != 1 || value(root.id()).rank() > 1) {
    throw ShapeError("backward: root must be scalar, got shape " + shape_to_string(value(root.id()).shape()));
  }
  if (!recording()) throw std::logic_error("backward: graph was built in inference mode");
  for (Node& n : nodes_) n.grad = NumArray();
  NumArray* g = grad_slot(root.id());
  if (g == nullptr) return;
  g->fill(1.0);
  for (std::int64_t id = root.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, static_cast<std::uint32_t>(id));
    if (n.param != nullptr) {
      if (n.param->grad.shape() != n.param->value.shape()) n.param->zero_grad();
      n.param->grad.add_inplace(n.grad);
    }
  }
}

}  // namespace came::diff
