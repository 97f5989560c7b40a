#include <cmath>
#include <random>

#include "../support/toy_net.hpp"
#include "doctest.h"
#include "srn/cascade.hpp"
#include "srn/error.hpp"

using namespace srn;
using srn::testing::toy_config;
using srn::testing::uniform_tensor;

namespace {

FaceImage noise_image(std::size_t side, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> px(side * side);
  for (auto& v : px) v = u(rng);
  return FaceImage(side, side, 1, std::move(px));
}

FaceShape toy_shape(std::mt19937_64& rng, double lo = 8.0, double hi = 24.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Point> pts(4);
  for (auto& p : pts) p = {u(rng), u(rng)};
  return FaceShape(pts);
}

SrnModel toy_model(std::uint64_t seed) {
  SrnModel m;
  m.net = toy_config();
  std::mt19937_64 rng(seed);
  m.params = init_srn_params(m.net, rng);
  for (auto& [name, t] : m.params)
    for (auto& v : t.vec()) v = std::uniform_real_distribution<double>(-0.4, 0.4)(rng);
  m.mean_shape = toy_shape(rng);
  return m;
}

std::vector<TrainSample> toy_data(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<TrainSample> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back({noise_image(32, rng), toy_shape(rng)});
  return out;
}

TrainConfig toy_train_config() {
  TrainConfig c;
  c.net = toy_config();
  c.steps = 4;
  c.batch_size = 3;
  c.learning_rate = 1e-3;
  c.seed = 9;
  return c;
}

}  // namespace

TEST_CASE("default cascade runs three iterations") {
  CHECK(CascadeConfig{}.num_iterations == 3);
  const SrnModel m = toy_model(1);
  std::mt19937_64 rng(2);
  const auto traj = predict(noise_image(32, rng), m);
  CHECK(traj.iterations() == 3);
  CHECK(traj.shapes.size() == 4);
  CHECK(traj.shapes.front() == m.mean_shape);
}

TEST_CASE("constant residual stub adds up exactly") {
  std::mt19937_64 rng(3);
  const FaceShape init = toy_shape(rng);
  const std::vector<double> delta{0.5, -1.25, 2.0, 0.75, -0.5, 1.5, 3.0, -2.25};
  const auto traj = run_cascade(noise_image(32, rng), init, 3, 8,
                                [&](const PatchSet&, std::size_t) { return delta; });
  for (std::size_t n = 0; n < 4; ++n) {
    CHECK(traj.final_shape()[n].x == init[n].x + 3.0 * delta[2 * n]);
    CHECK(traj.final_shape()[n].y == init[n].y + 3.0 * delta[2 * n + 1]);
  }
}

TEST_CASE("zero residual is a fixed point") {
  SrnModel m = toy_model(4);
  for (auto& [name, t] : m.params) std::fill(t.vec().begin(), t.vec().end(), 0.0);
  std::mt19937_64 rng(5);
  const auto traj = predict(noise_image(32, rng), m);
  for (const auto& s : traj.shapes) CHECK(s == m.mean_shape);
}

TEST_CASE("predicted trajectories are additive bit for bit") {
  const SrnModel m = toy_model(6);
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const auto traj = predict(noise_image(32, rng), toy_shape(rng), m);
    for (std::size_t i = 1; i < traj.shapes.size(); ++i)
      for (std::size_t n = 0; n < 4; ++n) {
        CHECK(traj.shapes[i][n].x == traj.shapes[i - 1][n].x + traj.residuals[i - 1][2 * n]);
        CHECK(traj.shapes[i][n].y == traj.shapes[i - 1][n].y + traj.residuals[i - 1][2 * n + 1]);
      }
  }
}

TEST_CASE("run_cascade validates its inputs") {
  std::mt19937_64 rng(8);
  const FaceShape init = toy_shape(rng);
  const FaceImage img = noise_image(32, rng);
  CHECK_THROWS_AS(run_cascade(img, init, 0, 8, [](const PatchSet&, std::size_t) { return std::vector<double>(8); }),
                  InvalidInput);
  CHECK_THROWS_AS(run_cascade(img, init, 2, 8, [](const PatchSet&, std::size_t) { return std::vector<double>(7); }),
                  InvalidInput);
  const SrnModel m = toy_model(9);
  CHECK_THROWS_AS(predict(img, FaceShape({{1.0, 1.0}, {2.0, 2.0}}), m), InvalidInput);
}

TEST_CASE("cascade loss") {
  SUBCASE("two-landmark hand oracle") {
    ShapeTrajectory t;
    t.shapes = {FaceShape({{0.0, 0.0}, {0.0, 0.0}}), FaceShape({{0.0, 0.0}, {0.0, 0.0}})};
    t.residuals = {{0.0, 0.0, 0.0, 0.0}};
    CHECK(loss(t, FaceShape({{1.0, 0.0}, {0.0, 2.0}})) == 5.0);
  }
  SUBCASE("perfect fit is zero") {
    const FaceShape gt({{3.0, 4.0}, {5.0, 6.0}});
    const auto traj = run_cascade(FaceImage(16, 16, 1), FaceShape({{1.0, 1.0}, {1.0, 1.0}}), 1, 8,
                                  [](const PatchSet&, std::size_t) { return std::vector<double>{2, 3, 4, 5}; });
    CHECK(loss(traj, gt) == 0.0);
  }
  SUBCASE("single iteration equals plain squared error and is never negative") {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 20; ++trial) {
      const FaceShape init = toy_shape(rng), gt = toy_shape(rng);
      const auto d = uniform_tensor({8}, rng, -2.0, 2.0).vec();
      const auto traj = run_cascade(FaceImage(32, 32, 1), init, 1, 8,
                                    [&](const PatchSet&, std::size_t) { return d; });
      double want = 0.0;
      for (std::size_t n = 0; n < 4; ++n)
        want += std::pow(traj.final_shape()[n].x - gt[n].x, 2) + std::pow(traj.final_shape()[n].y - gt[n].y, 2);
      CHECK(loss(traj, gt) == doctest::Approx(want).epsilon(1e-13));
      CHECK(loss(traj, gt) >= 0.0);
    }
  }
  SUBCASE("landmark count mismatch") {
    ShapeTrajectory t;
    t.shapes = {FaceShape({{0.0, 0.0}, {0.0, 0.0}}), FaceShape({{0.0, 0.0}, {0.0, 0.0}})};
    t.residuals = {{0.0, 0.0, 0.0, 0.0}};
    CHECK_THROWS_AS(loss(t, FaceShape({{1.0, 0.0}, {0.0, 2.0}, {0.0, 0.0}})), InvalidInput);
  }
}

TEST_CASE("graph trajectory agrees with predict") {
  SrnModel m = toy_model(11);
  std::mt19937_64 rng(12);
  const FaceImage img = noise_image(32, rng);
  const FaceShape gt = toy_shape(rng);
  const auto traj = predict(img, m);
  for (bool full : {true, false}) {
    m.cascade.full_backprop = full;
    Graph g;
    ParamBinder p(g, m.params, false);
    auto tg = build_trajectory(p, m, m.net.resolved_schema(), img, m.mean_shape, gt.to_tensor(),
                               g.constant(Tensor({5}, 0.0)), true);
    REQUIRE(tg.shapes.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(tg.shapes[i].value().vec() == traj.shapes[i + 1].flat());
    CHECK(tg.loss.value()[0] == doctest::Approx(loss(traj, gt)).epsilon(1e-12));
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto data = toy_data(6, 13);
  const TrainConfig cfg = toy_train_config();
  std::vector<double> losses_a, losses_b;
  const Checkpoint a = train(data, cfg, nullptr, [&](std::size_t, double l) { losses_a.push_back(l); });
  const Checkpoint b = train(data, cfg, nullptr, [&](std::size_t, double l) { losses_b.push_back(l); });
  CHECK(encode_checkpoint(a) == encode_checkpoint(b));
  CHECK(losses_a == losses_b);
  CHECK(losses_a.size() == 4);

  TrainConfig other = cfg;
  other.seed = 10;
  CHECK(train(data, other).params != a.params);
}

TEST_CASE("training changes parameters and lowers the loss on a tiny set") {
  const auto data = toy_data(2, 14);
  TrainConfig cfg = toy_train_config();
  cfg.steps = 40;
  cfg.batch_size = 2;
  cfg.learning_rate = 1e-2;
  std::vector<double> losses;
  train(data, cfg, nullptr, [&](std::size_t, double l) { losses.push_back(l); });
  CHECK(losses.back() < 0.5 * losses.front());
}

TEST_CASE("greedy and full backprop both train") {
  const auto data = toy_data(3, 15);
  TrainConfig cfg = toy_train_config();
  cfg.cascade.full_backprop = false;
  const Checkpoint greedy = train(data, cfg);
  cfg.cascade.full_backprop = true;
  const Checkpoint full = train(data, cfg);
  CHECK(greedy.params.all_finite());
  CHECK(greedy.params != full.params);
}

TEST_CASE("training errors") {
  const TrainConfig cfg = toy_train_config();
  CHECK_THROWS_AS(train(std::vector<TrainSample>{}, cfg), InvalidInput);

  const auto data = toy_data(2, 16);
  std::mt19937_64 rng(17);
  ParamStore bad = init_srn_params(cfg.net, rng);
  bad.at("hsrm.mu.bias")[0] = NAN;
  CHECK_THROWS_AS(train(data, cfg, &bad), DivergedTraining);

  TrainConfig zero = cfg;
  zero.cascade.num_iterations = 0;
  CHECK_THROWS_AS(train(data, zero), InvalidInput);
}

TEST_CASE("random occlusion changes exactly one box") {
  std::mt19937_64 rng(18);
  const FaceImage img(40, 40, 1, 0.5);
  for (int trial = 0; trial < 20; ++trial) {
    const FaceShape gt = toy_shape(rng, 4.0, 36.0);
    std::size_t chosen = 99;
    const FaceImage out = random_occlusion(img, gt, 0.15, rng, &chosen);
    REQUIRE(chosen < 4);
    const PixelBox box =
        occlusion_box(img, OcclusionSpec{chosen, occlusion_half_extent(gt, 0.15), 0}, gt);
    std::size_t inside_changed = 0, inside = 0;
    for (std::size_t y = 0; y < 40; ++y)
      for (std::size_t x = 0; x < 40; ++x) {
        const bool in = static_cast<long>(x) >= box.x0 && static_cast<long>(x) <= box.x1 &&
                        static_cast<long>(y) >= box.y0 && static_cast<long>(y) <= box.y1;
        const bool changed = out.at(y, x) != img.at(y, x);
        if (in) {
          ++inside;
          inside_changed += changed;
        } else {
          CHECK_FALSE(changed);
        }
      }
    CHECK(inside_changed * 10 >= inside * 9);
  }
}

TEST_CASE("occlusion half extent on non-68 shapes uses the bounding box") {
  const FaceShape s({{0.0, 0.0}, {8.0, 2.0}});
  CHECK(occlusion_half_extent(s, 0.5) == doctest::Approx(0.5 * 4.0));
}

TEST_CASE("checkpoint round trip keeps predictions") {
  SrnModel m = toy_model(19);
  const Checkpoint ck = m.to_checkpoint();
  const SrnModel back = SrnModel::from_checkpoint(decode_checkpoint(encode_checkpoint(ck)));
  std::mt19937_64 rng(20);
  const FaceImage img = noise_image(32, rng);
  CHECK(predict(img, back).final_shape() == predict(img, m).final_shape());
  CHECK(back.mean_shape == m.mean_shape);

  Checkpoint broken = ck;
  broken.params.erase("rnn.w1");
  CHECK_THROWS_AS(SrnModel::from_checkpoint(broken), InvalidInput);
}

TEST_CASE("config json round trips") {
  TrainConfig cfg = toy_train_config();
  cfg.augment = Augment::random_occlusion;
  cfg.cascade.initial_shape_mode = InitMode::provided;
  CHECK(TrainConfig::from_json(cfg.to_json()).to_json() == cfg.to_json());
  CHECK_THROWS_AS(CascadeConfig::from_json({{"initial_shape_mode", "nope"}}), InvalidInput);
}
