#include "srn/graph.hpp"

#include "srn/error.hpp"

namespace srn {

const Tensor& Var::value() const { return graph->value(id); }

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::input(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Graph::param(const Tensor& external, bool requires_grad) {
  Node n;
  n.external = &external;
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

Var Graph::record(Tensor value, std::vector<int> parents, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (int p : parents) {
    if (nodes_.at(p).requires_grad) n.requires_grad = true;
  }
  if (n.requires_grad) {
    n.parents = std::move(parents);
    n.backward = std::move(backward);
  }
  return push(std::move(n));
}

const Tensor& Graph::value(int id) const {
  const Node& n = nodes_.at(id);
  return n.external ? *n.external : n.value;
}

Tensor& Graph::grad_buffer(int id) {
  Node& n = nodes_.at(id);
  if (!n.has_grad) {
    n.grad = Tensor(value(id).shape(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

const Tensor& Graph::grad(int id) { return grad_buffer(id); }

void Graph::accumulate_grad(int id, const Tensor& g) {
  if (!nodes_.at(id).requires_grad) return;
  Tensor& buf = grad_buffer(id);
  if (buf.size() != g.size())
    throw InvalidInput("gradient size mismatch on node " + std::to_string(id));
  double* dst = buf.raw();
  const double* src = g.raw();
  for (std::size_t i = 0; i < buf.size(); ++i) dst[i] += src[i];
}

void Graph::zero_grads() {
  for (auto& n : nodes_) {
    n.grad = Tensor();
    n.has_grad = false;
  }
}

void Graph::backward(Var root) {
  if (root.graph != this) throw InvalidInput("backward root belongs to another graph");
  if (value(root.id).size() != 1)
    throw InvalidInput("backward root must be scalar, got shape " +
                       shape_str(value(root.id).shape()));
  if (!nodes_.at(root.id).requires_grad) return;
  grad_buffer(root.id)[0] += 1.0;
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.has_grad || !n.backward) continue;
    // The closure may push new grad buffers on parents but never appends nodes,
    // so the reference to n.grad stays valid.
    n.backward(*this, n.grad);
  }
}

}  // namespace srn
