#include "srn/grad_check.hpp"

#include <cmath>
#include <random>

#include "srn/error.hpp"

namespace srn {
namespace {

double eval_scalar(const ScalarFn& f, std::span<const Tensor> inputs) {
  Graph g;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const auto& t : inputs) vars.push_back(g.constant(t));
  Var out = f(g, vars);
  return out.value()[0];
}

}  // namespace

GradCheckReport grad_check_report(const ScalarFn& f, std::span<const Tensor> inputs, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw InvalidInput("grad_check: eps must lie in [1e-7, 1e-3]");

  std::vector<Tensor> analytic;
  {
    Graph g;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(g.input(t));
    Var out = f(g, vars);
    if (out.size() != 1)
      throw InvalidInput("grad_check: function must be scalar-valued, got shape " +
                         shape_str(out.shape()));
    g.backward(out);
    for (const Var& v : vars) analytic.push_back(g.grad(v.id));
  }

  GradCheckReport rep;
  std::vector<Tensor> probe(inputs.begin(), inputs.end());
  for (std::size_t k = 0; k < probe.size(); ++k) {
    for (std::size_t i = 0; i < probe[k].size(); ++i) {
      const double orig = probe[k][i];
      probe[k][i] = orig + eps;
      const double fp = eval_scalar(f, probe);
      probe[k][i] = orig - eps;
      const double fm = eval_scalar(f, probe);
      probe[k][i] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double err = std::abs(analytic[k][i] - numeric) / std::max(1.0, std::abs(numeric));
      if (err > rep.max_rel_error || !std::isfinite(err)) {
        rep = {err, k, i, analytic[k][i], numeric};
      }
    }
  }
  return rep;
}

double grad_check(const ScalarFn& f, std::span<const Tensor> inputs, double eps) {
  return grad_check_report(f, inputs, eps).max_rel_error;
}

ScalarFn project_to_scalar(const ops::OpInfo& op, std::uint64_t seed) {
  auto apply = op.apply;
  return [apply, seed](Graph& g, std::span<const Var> in) {
    Var y = apply(g, in);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Tensor w({y.size(), 1});
    for (auto& v : w.vec()) v = u(rng);
    return ops::matmul(ops::reshape(y, {1, y.size()}), g.constant(std::move(w)));
  };
}

}  // namespace srn
