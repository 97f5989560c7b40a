#pragma once

#include <random>
#include <vector>

#include "srn/grad_check.hpp"
#include "srn/network.hpp"
#include "srn/ops.hpp"

namespace srn::testing {

// Four landmarks, one each in eyes, brows, nose and left cheek, so every
// neighborhood is populated.
inline GroupSchema toy_schema() {
  return GroupSchema(4, {{{0}, {1}, {2}, {}, {3}, {}}});
}

inline SrnConfig toy_config() {
  SrnConfig c;
  c.num_landmarks = 4;
  c.patch_size = 8;
  c.conv1_channels = 3;
  c.conv2_channels = 4;
  c.feature_channels = 4;
  c.embed_channels = 3;
  c.rnn_hidden = 5;
  c.g_dim = 6;
  c.f_dim = 5;
  c.schema = toy_schema();
  return c;
}

inline Tensor uniform_tensor(const Shape& shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (auto& v : t.vec()) v = u(rng);
  return t;
}

// Relative gradient error of sum((delta - target)^2) with respect to the
// patches, h_prev and every network parameter.
inline GradCheckReport srn_grad_check(const SrnConfig& cfg, std::uint64_t seed, double eps = 1e-5) {
  std::mt19937_64 rng(seed);
  ParamStore params = init_srn_params(cfg, rng);
  // Non-zero F so the non-local path contributes to the gradient.
  if (params.contains("nonlocal.out.weight"))
    for (auto& v : params.at("nonlocal.out.weight").vec()) v = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
  for (auto& [name, t] : params)
    if (name.ends_with("bias"))
      for (auto& v : t.vec()) v = std::uniform_real_distribution<double>(-0.1, 0.1)(rng);

  const GroupSchema schema = cfg.resolved_schema();
  const std::size_t N = cfg.num_landmarks, P = cfg.patch_size;
  const Tensor target = uniform_tensor({2 * N}, rng, -1.0, 1.0);
  std::vector<Tensor> inputs{uniform_tensor({N, cfg.channels, P, P}, rng, 0.0, 1.0),
                             uniform_tensor({cfg.rnn_hidden}, rng, -0.5, 0.5)};
  const std::vector<std::string> names = params.names();
  for (const auto& n : names) inputs.push_back(params.at(n));

  ScalarFn f = [&](Graph& g, std::span<const Var> in) {
    ParamBinder p(g, params);
    for (std::size_t i = 0; i < names.size(); ++i) p.bind(names[i], in[i + 2]);
    auto step = net::srn_step(p, cfg, schema, in[0], in[1], RnnMode::spatial);
    return ops::squared_error(step.delta, target);
  };
  return grad_check_report(f, inputs, eps);
}

}  // namespace srn::testing
