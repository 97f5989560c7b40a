#include "srn/optimizer.hpp"

#include <cmath>

#include "srn/error.hpp"

namespace srn {

void Adam::step(ParamStore& params, const ParamStore& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (const auto& [name, g] : grads) {
    Tensor& p = params.at(name);
    if (p.size() != g.size()) throw InvalidInput("gradient shape mismatch for " + name);
    if (!m_.contains(name)) {
      m_.set(name, Tensor(p.shape(), 0.0));
      v_.set(name, Tensor(p.shape(), 0.0));
    }
    Tensor& m = m_.at(name);
    Tensor& v = v_.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = opt_.beta1 * m[i] + (1.0 - opt_.beta1) * g[i];
      v[i] = opt_.beta2 * v[i] + (1.0 - opt_.beta2) * g[i] * g[i];
      p[i] -= opt_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + opt_.epsilon);
    }
  }
}

}  // namespace srn
