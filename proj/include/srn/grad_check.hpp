#pragma once

#include <functional>
#include <span>
#include <vector>

#include "srn/graph.hpp"
#include "srn/ops.hpp"

namespace srn {

// A scalar-valued composition of ops over a list of input arrays.
using ScalarFn = std::function<Var(Graph&, std::span<const Var>)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares reverse-mode gradients of `f` at `inputs` against central
// differences with step `eps`. Error per element is
// |analytic - numeric| / max(1, |numeric|).
GradCheckReport grad_check_report(const ScalarFn& f, std::span<const Tensor> inputs,
                                  double eps = 1e-5);
double grad_check(const ScalarFn& f, std::span<const Tensor> inputs, double eps = 1e-5);

// Reduces an op to a scalar with a fixed random projection so non-scalar
// catalog entries can be checked.
ScalarFn project_to_scalar(const ops::OpInfo& op, std::uint64_t seed);

}  // namespace srn
