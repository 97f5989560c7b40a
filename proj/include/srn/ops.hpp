#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "srn/graph.hpp"

// Differentiable operators recorded on a Graph. Every op computes its forward
// value eagerly and registers a closure that routes output gradients back to
// the inputs that require them.
namespace srn::ops {

// x [B,C,H,W], w [O,C,K,K], b [O] -> [B,O,Ho,Wo], Ho = (H + 2*pad - K) / stride + 1.
Var conv2d(Var x, Var w, Var b, std::size_t stride = 1, std::size_t pad = 0);

// 2x2 window, stride 2, floor on odd extents. Gradient goes to the first
// maximum in row-major window order (lowest flat input index on ties).
Var max_pool2(Var x);

// x [B,I] (or [I]) times w [I,O] plus b [O] -> [B,O] (or [O]).
Var linear(Var x, Var w, Var b);

Var tanh(Var x);
Var relu(Var x);

// Concatenate along `axis`; all other extents must agree.
Var concat(std::span<const Var> parts, std::size_t axis = 0);
Var concat(std::initializer_list<Var> parts, std::size_t axis = 0);

// Rows of x along axis 0, in the given order (duplicates allowed).
Var gather_rows(Var x, std::span<const std::size_t> rows);

Var reshape(Var x, Shape shape);
Var flatten(Var x);

// a [N,D], b [M,D] -> [N,M], entry (u,v) = <a_u, b_v>.
Var dot_similarity(Var a, Var b);
// a [N,K], b [K,M] -> [N,M].
Var matmul(Var a, Var b);

Var scale(Var x, double s);
Var add(Var a, Var b);
Var sub(Var a, Var b);

// Sum of squared entries -> [1].
Var sum_squares(Var x);
// Sum of (x - target)^2 -> [1]. Target is treated as a constant.
Var squared_error(Var x, const Tensor& target);

// Mean over the trailing spatial extents: [B,C,H,W] -> [B,C].
Var mean_spatial(Var x);

// Copy of the value with the gradient path cut.
Var detach(Var x);

// Catalog entry: a named op with a representative input shape list, used by
// grad_check to verify backward against central differences.
struct OpInfo {
  std::string name;
  std::vector<Shape> input_shapes;
  std::function<Var(Graph&, std::span<const Var>)> apply;
  // conv kernel/stride this entry exercises, zero for non-conv ops.
  std::size_t kernel = 0;
  std::size_t stride = 0;
};

std::vector<OpInfo> op_catalog();

}  // namespace srn::ops
