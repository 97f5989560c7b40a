#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "srn/error.hpp"
#include "srn/grad_check.hpp"
#include "srn/ops.hpp"
#include "srn/param_store.hpp"

using namespace srn;

namespace {

Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Tensor t(shape);
  for (auto& v : t.vec()) v = u(rng);
  return t;
}

}  // namespace

TEST_CASE("op catalog covers the layers the network needs") {
  const auto cat = ops::op_catalog();
  auto has = [&](const std::string& n) {
    return std::any_of(cat.begin(), cat.end(), [&](const auto& o) { return o.name == n; });
  };
  for (const char* n : {"max_pool2", "linear", "tanh", "relu", "concat", "dot_similarity", "scale",
                        "sum_squares"})
    CHECK(has(n));
  const bool conv7 = std::any_of(cat.begin(), cat.end(), [](const auto& o) {
    return o.kernel == 7 && o.stride == 1;
  });
  CHECK(conv7);
  CHECK(std::any_of(cat.begin(), cat.end(), [](const auto& o) { return o.stride == 2; }));
}

TEST_CASE("every catalog op passes grad_check at 10 random inputs") {
  std::mt19937_64 rng(7);
  for (const auto& op : ops::op_catalog()) {
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<Tensor> inputs;
      for (const auto& s : op.input_shapes) inputs.push_back(random_tensor(s, rng, 0.8));
      const double err = grad_check(project_to_scalar(op, 100 + trial), inputs, 1e-5);
      INFO(op.name << " trial " << trial);
      CHECK(err <= 1e-4);
    }
  }
}

TEST_CASE("tanh at zero is zero with unit slope") {
  Graph g;
  Var x = g.input(Tensor::scalar(0.0));
  Var y = ops::tanh(x);
  CHECK(y.value()[0] == 0.0);
  g.backward(y);
  CHECK(g.grad(x.id)[0] == 1.0);
}

TEST_CASE("max_pool2 on a constant routes gradient to the first element of each window") {
  Graph g;
  Var x = g.input(Tensor({1, 1, 4, 4}, 3.5));
  Var y = ops::max_pool2(x);
  REQUIRE(y.shape() == Shape{1, 1, 2, 2});
  for (double v : y.value().data()) CHECK(v == 3.5);
  g.backward(ops::sum_squares(ops::scale(y, 1.0)));
  const Tensor& gx = g.grad(x.id);
  // Oracle: enumerate windows, the lowest flat index in each window wins the tie.
  Tensor expect({1, 1, 4, 4}, 0.0);
  for (std::size_t wy = 0; wy < 2; ++wy)
    for (std::size_t wx = 0; wx < 2; ++wx) expect[(2 * wy) * 4 + 2 * wx] = 2.0 * 3.5;
  CHECK(gx == expect);
}

TEST_CASE("concat backward splits gradients exactly") {
  Graph g;
  std::mt19937_64 rng(3);
  Var a = g.input(random_tensor({3}, rng));
  Var b = g.input(random_tensor({5}, rng));
  Var c = ops::concat({a, b});
  CHECK(c.size() == a.size() + b.size());
  Tensor w = random_tensor({1, 8}, rng);
  Var s = ops::matmul(g.constant(w), ops::reshape(c, {8, 1}));
  g.backward(s);
  for (std::size_t i = 0; i < 3; ++i) CHECK(g.grad(a.id)[i] == w[i]);
  for (std::size_t i = 0; i < 5; ++i) CHECK(g.grad(b.id)[i] == w[3 + i]);
}

TEST_CASE("grad_check: linear function is exact") {
  std::mt19937_64 rng(11);
  const Tensor a = random_tensor({6, 1}, rng);
  ScalarFn f = [a](Graph& g, std::span<const Var> in) {
    return ops::matmul(ops::reshape(in[0], {1, 6}), g.constant(a));
  };
  const std::vector<Tensor> x{random_tensor({6}, rng)};
  CHECK(grad_check(f, x, 1e-5) <= 1e-9);
}

TEST_CASE("grad_check: sum(tanh(Wx+b)^2)") {
  std::mt19937_64 rng(12);
  ScalarFn f = [](Graph&, std::span<const Var> in) {
    return ops::sum_squares(ops::tanh(ops::linear(in[0], in[1], in[2])));
  };
  const std::vector<Tensor> x{random_tensor({4}, rng, 0.5), random_tensor({4, 3}, rng, 0.5),
                              random_tensor({3}, rng, 0.5)};
  CHECK(grad_check(f, x, 1e-5) <= 1e-5);
}

TEST_CASE("grad_check: constant function has zero gradient") {
  ScalarFn f = [](Graph& g, std::span<const Var>) { return g.constant(Tensor::scalar(4.0)); };
  const std::vector<Tensor> x{Tensor({3}, 1.0)};
  const auto rep = grad_check_report(f, x, 1e-5);
  CHECK(rep.max_rel_error == 0.0);
}

TEST_CASE("grad_check rejects non-scalar functions and bad steps") {
  ScalarFn f = [](Graph&, std::span<const Var> in) { return ops::tanh(in[0]); };
  const std::vector<Tensor> x{Tensor({3}, 0.1)};
  CHECK_THROWS_AS(grad_check(f, x, 1e-5), InvalidInput);
  ScalarFn s = [](Graph&, std::span<const Var> in) { return ops::sum_squares(in[0]); };
  CHECK_THROWS_AS(grad_check(s, x, 1e-2), InvalidInput);
}

TEST_CASE("conv2d matches a direct convolution loop") {
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor({1, 1, 8, 8}, rng);
  const Tensor w = random_tensor({1, 1, 3, 3}, rng);
  Graph g;
  Var y = ops::conv2d(g.constant(x), g.constant(w), g.constant(Tensor({1}, 0.25)), 1, 1);
  REQUIRE(y.shape() == Shape{1, 1, 8, 8});
  for (int oy = 0; oy < 8; ++oy)
    for (int ox = 0; ox < 8; ++ox) {
      double s = 0.25;
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const int iy = oy + ky - 1, ix = ox + kx - 1;
          if (iy < 0 || iy >= 8 || ix < 0 || ix >= 8) continue;
          s += w[ky * 3 + kx] * x[iy * 8 + ix];
        }
      CHECK(y.value()[oy * 8 + ox] == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("param store save -> load -> save is byte identical") {
  std::mt19937_64 rng(9);
  Checkpoint ck;
  ck.params.add("b.weight", random_tensor({3, 4}, rng));
  ck.params.add("a.bias", random_tensor({4}, rng));
  ck.params.add("c", Tensor({2, 1, 3, 3}, 1.0 / 3.0));
  ck.config = {{"lr", 1e-4}, {"name", "x"}, {"nested", {{"k", 1}}}};
  ck.rng_seed = 42;
  ck.capture_rng(rng);
  const std::string first = encode_checkpoint(ck);
  const Checkpoint back = decode_checkpoint(first);
  CHECK(back.params == ck.params);
  CHECK(back.config == ck.config);
  CHECK(encode_checkpoint(back) == first);
  auto r1 = ck.restore_rng();
  auto r2 = back.restore_rng();
  CHECK(r1() == r2());
}

TEST_CASE("param store rejects duplicate names and corrupt archives") {
  ParamStore s;
  s.add("w", Tensor({1}));
  CHECK_THROWS_AS(s.add("w", Tensor({1})), InvalidInput);
  CHECK_THROWS_AS(decode_checkpoint("garbage"), InvalidInput);
  Checkpoint ck;
  ck.params.add("w", Tensor({4}, 1.0));
  std::string bytes = encode_checkpoint(ck);
  bytes.resize(bytes.size() - 8);
  CHECK_THROWS_AS(decode_checkpoint(bytes), InvalidInput);
}
