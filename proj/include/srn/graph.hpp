#pragma once

#include <functional>
#include <vector>

#include "srn/tensor.hpp"

namespace srn {

class Graph;

// Handle to a node on a Graph tape. Cheap to copy; valid while the Graph lives.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  bool valid() const noexcept { return graph != nullptr && id >= 0; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
};

// Reverse-mode tape. Nodes are appended in topological order by construction,
// so backward() is a single reverse sweep.
class Graph {
 public:
  // Receives the gradient of the loss w.r.t. this node's output and must
  // accumulate into its parents through accumulate_grad().
  using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var input(Tensor value);
  // Leaf that aliases an external tensor (no copy). The tensor must outlive the graph.
  // With requires_grad=false the leaf is a frozen constant and no backward state is kept
  // for ops that only depend on frozen leaves.
  Var param(const Tensor& external, bool requires_grad = true);

  // Records an op output. If no parent requires a gradient, `backward` is dropped.
  Var record(Tensor value, std::vector<int> parents, BackwardFn backward);

  const Tensor& value(int id) const;
  bool requires_grad(int id) const { return nodes_.at(id).requires_grad; }
  // Gradient accumulated for a node after backward(); zeros when never touched.
  const Tensor& grad(int id);
  void accumulate_grad(int id, const Tensor& g);
  // Gradient buffer for in-place accumulation; zero-initialised on first touch.
  Tensor& grad_buffer(int id);

  // Seeds d(root)/d(root) = 1; root must hold exactly one element.
  void backward(Var root);
  void zero_grads();

  std::size_t node_count() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<int> parents;
    BackwardFn backward;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
};

}  // namespace srn
