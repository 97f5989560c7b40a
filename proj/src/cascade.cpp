#include "srn/cascade.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "srn/error.hpp"
#include "srn/ops.hpp"
#include "srn/optimizer.hpp"

namespace srn {

void CascadeConfig::validate() const {
  if (num_iterations < 1) throw InvalidInput("cascade needs at least one iteration");
}

nlohmann::json CascadeConfig::to_json() const {
  return {{"num_iterations", num_iterations},
          {"initial_shape_mode",
           initial_shape_mode == InitMode::mean_shape ? "mean_shape" : "provided"},
          {"full_backprop", full_backprop}};
}

CascadeConfig CascadeConfig::from_json(const nlohmann::json& j) {
  CascadeConfig c;
  c.num_iterations = j.value("num_iterations", c.num_iterations);
  const std::string mode = j.value("initial_shape_mode", std::string("mean_shape"));
  if (mode == "mean_shape")
    c.initial_shape_mode = InitMode::mean_shape;
  else if (mode == "provided")
    c.initial_shape_mode = InitMode::provided;
  else
    throw InvalidInput("unknown initial_shape_mode: " + mode);
  c.full_backprop = j.value("full_backprop", c.full_backprop);
  c.validate();
  return c;
}

Checkpoint SrnModel::to_checkpoint(nlohmann::json extra) const {
  Checkpoint ck;
  ck.params = params;
  ck.config = std::move(extra);
  ck.config["net"] = net.to_json();
  ck.config["cascade"] = cascade.to_json();
  ck.config["mean_shape"] = mean_shape.flat();
  ck.config["rnn_mode"] = mode == RnnMode::spatial ? "spatial" : "temporal";
  return ck;
}

SrnModel SrnModel::from_checkpoint(const Checkpoint& ckpt) {
  SrnModel m;
  const auto& c = ckpt.config;
  if (!c.contains("net") || !c.contains("mean_shape"))
    throw InvalidInput("checkpoint does not describe an SRN model");
  m.net = SrnConfig::from_json(c.at("net"));
  m.cascade = CascadeConfig::from_json(c.value("cascade", nlohmann::json::object()));
  m.mean_shape = FaceShape::from_flat(c.at("mean_shape").get<std::vector<double>>());
  const std::string mode = c.value("rnn_mode", std::string("spatial"));
  m.mode = mode == "temporal" ? RnnMode::temporal : RnnMode::spatial;
  m.params = ckpt.params;
  check_srn_params(m.params, m.net, m.mode);
  if (m.mean_shape.size() != m.net.num_landmarks)
    throw InvalidInput("checkpoint mean shape has the wrong landmark count");
  return m;
}

ShapeTrajectory run_cascade(const FaceImage& image, const FaceShape& init, std::size_t iterations,
                            std::size_t patch_size, const ResidualFn& phi) {
  if (iterations < 1) throw InvalidInput("cascade needs at least one iteration");
  ShapeTrajectory traj;
  traj.shapes.push_back(init);
  for (std::size_t i = 1; i <= iterations; ++i) {
    const FaceShape& prev = traj.shapes.back();
    auto delta = phi(extract_patches(image, prev, patch_size), i);
    if (delta.size() != 2 * prev.size())
      throw InvalidInput("residual has " + std::to_string(delta.size()) + " values, expected " +
                         std::to_string(2 * prev.size()));
    std::vector<double> next = prev.flat();
    for (std::size_t k = 0; k < next.size(); ++k) next[k] += delta[k];
    traj.shapes.push_back(FaceShape::from_flat(next));
    traj.residuals.push_back(std::move(delta));
  }
  return traj;
}

ShapeTrajectory predict(const FaceImage& image, const FaceShape& init, const SrnModel& model) {
  if (init.size() != model.net.num_landmarks)
    throw InvalidInput("initial shape has " + std::to_string(init.size()) + " landmarks, model expects " +
                       std::to_string(model.net.num_landmarks));
  const GroupSchema schema = model.net.resolved_schema();
  Tensor h({model.net.rnn_hidden}, 0.0);
  const Tensor h0 = h;
  const bool carry = model.mode == RnnMode::spatial;
  return run_cascade(image, init, model.cascade.num_iterations, model.net.patch_size,
                     [&](const PatchSet& ps, std::size_t) {
                       Graph g;
                       ParamBinder p(g, model.params, false);
                       auto out = net::srn_step(p, model.net, schema, g.constant(ps.patches),
                                                g.constant(carry ? h : h0), model.mode);
                       h = out.h.value();
                       return out.delta.value().vec();
                     });
}

ShapeTrajectory predict(const FaceImage& image, const SrnModel& model) {
  return predict(image, model.mean_shape, model);
}

double loss(const ShapeTrajectory& traj, const FaceShape& gt) {
  double total = 0.0;
  for (std::size_t i = 1; i < traj.shapes.size(); ++i) {
    const FaceShape& prev = traj.shapes[i - 1];
    if (prev.size() != gt.size()) throw InvalidInput("loss: landmark count mismatch");
    const auto& d = traj.residuals.at(i - 1);
    for (std::size_t n = 0; n < gt.size(); ++n) {
      const double ex = gt[n].x - (prev[n].x + d[2 * n]);
      const double ey = gt[n].y - (prev[n].y + d[2 * n + 1]);
      total += ex * ex + ey * ey;
    }
  }
  return total;
}

TrajectoryGraph build_trajectory(ParamBinder& p, const SrnModel& model, const GroupSchema& schema,
                                 const FaceImage& image, const FaceShape& init,
                                 const Tensor& gt_flat, Var h_prev, bool carry_h) {
  Graph& g = p.graph();
  const bool full = model.cascade.full_backprop;
  TrajectoryGraph out;
  Var shape = g.constant(init.to_tensor());
  Var h = h_prev;
  Var total;
  for (std::size_t i = 1; i <= model.cascade.num_iterations; ++i) {
    const FaceShape cur = FaceShape::from_flat(shape.value().data());
    const PatchSet ps = extract_patches(image, cur, model.net.patch_size);
    Var h_in = carry_h ? h : h_prev;
    if (!full && carry_h && i > 1) h_in = ops::detach(h_in);
    auto step = net::srn_step(p, model.net, schema, g.constant(ps.patches), h_in, model.mode);
    Var base = full ? shape : ops::detach(shape);
    shape = ops::add(base, step.delta);
    Var li = ops::squared_error(shape, gt_flat);
    total = total.valid() ? ops::add(total, li) : li;
    out.shapes.push_back(shape);
    h = step.h;
  }
  out.loss = total;
  out.h_last = h;
  return out;
}

void TrainConfig::validate() const {
  net.validate();
  cascade.validate();
  if (!(learning_rate > 0.0)) throw InvalidInput("learning_rate must be positive");
  if (batch_size == 0) throw InvalidInput("batch_size must be positive");
  if (!(occlusion_fraction >= 0.0)) throw InvalidInput("occlusion_fraction must be >= 0");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"net", net.to_json()},
          {"cascade", cascade.to_json()},
          {"learning_rate", learning_rate},
          {"beta1", beta1},
          {"beta2", beta2},
          {"adam_epsilon", adam_epsilon},
          {"batch_size", batch_size},
          {"steps", steps},
          {"seed", seed},
          {"augment", augment == Augment::none ? "none" : "random_occlusion"},
          {"occlusion_fraction", occlusion_fraction}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  if (j.contains("net")) c.net = SrnConfig::from_json(j.at("net"));
  if (j.contains("cascade")) c.cascade = CascadeConfig::from_json(j.at("cascade"));
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.steps = j.value("steps", c.steps);
  c.seed = j.value("seed", c.seed);
  const std::string aug = j.value("augment", std::string("none"));
  if (aug == "none")
    c.augment = Augment::none;
  else if (aug == "random_occlusion")
    c.augment = Augment::random_occlusion;
  else
    throw InvalidInput("unknown augment mode: " + aug);
  c.occlusion_fraction = j.value("occlusion_fraction", c.occlusion_fraction);
  c.validate();
  return c;
}

double occlusion_half_extent(const FaceShape& shape, double fraction) {
  if (shape.size() == 68) return default_occlusion_half_extent(shape, fraction);
  double xmin = shape[0].x, xmax = xmin, ymin = shape[0].y, ymax = ymin;
  for (const auto& p : shape.points()) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  return fraction * std::sqrt((xmax - xmin) * (ymax - ymin));
}

FaceImage random_occlusion(const FaceImage& image, const FaceShape& gt, double fraction,
                           std::mt19937_64& rng, std::size_t* chosen) {
  std::uniform_int_distribution<std::size_t> pick(0, gt.size() - 1);
  OcclusionSpec spec;
  spec.center_landmark = pick(rng);
  spec.half_extent = occlusion_half_extent(gt, fraction);
  spec.noise_seed = rng();
  if (chosen) *chosen = spec.center_landmark;
  return insert_occlusion(image, spec, gt);
}

Checkpoint train(std::span<const TrainSample> data, const TrainConfig& cfg, const ParamStore* init,
                 const TrainObserver& observer) {
  cfg.validate();
  if (data.empty()) throw InvalidInput("training set is empty");
  for (const auto& s : data)
    if (s.gt.size() != cfg.net.num_landmarks)
      throw InvalidInput("training sample landmark count does not match config");

  std::mt19937_64 rng(cfg.seed);
  SrnModel model;
  model.net = cfg.net;
  model.cascade = cfg.cascade;
  {
    std::vector<FaceShape> gts;
    gts.reserve(data.size());
    for (const auto& s : data) gts.push_back(s.gt);
    model.mean_shape = mean_shape(gts);
  }
  model.params = init ? *init : init_srn_params(cfg.net, rng, RnnMode::spatial);
  check_srn_params(model.params, cfg.net, RnnMode::spatial);
  const GroupSchema schema = cfg.net.resolved_schema();

  Adam adam({cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_epsilon});
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;
  const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    ParamStore grads;
    double batch_loss = 0.0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const TrainSample& s = data[order[cursor++]];
      FaceImage img = cfg.augment == Augment::random_occlusion
                          ? random_occlusion(s.image, s.gt, cfg.occlusion_fraction, rng)
                          : s.image;
      Graph g;
      ParamBinder p(g, model.params);
      TrajectoryGraph tg;
      try {
        tg = build_trajectory(p, model, schema, img, model.mean_shape, s.gt.to_tensor(),
                              g.constant(Tensor({cfg.net.rnn_hidden}, 0.0)), true);
      } catch (const InvalidInput& e) {
        throw DivergedTraining("step " + std::to_string(step) +
                               ": prediction became invalid (" + e.what() + ")");
      }
      const double l = tg.loss.value()[0];
      if (!std::isfinite(l))
        throw DivergedTraining("step " + std::to_string(step) + ": non-finite loss " +
                               std::to_string(l) + " at batch item " + std::to_string(b));
      batch_loss += l * inv_batch;
      g.backward(ops::scale(tg.loss, inv_batch));
      p.accumulate_grads(grads);
    }
    adam.step(model.params, grads);
    if (!model.params.all_finite())
      throw DivergedTraining("step " + std::to_string(step) + ": parameters became non-finite (batch loss " +
                             std::to_string(batch_loss) + ")");
    if (observer) observer(step, batch_loss);
  }

  Checkpoint ck = model.to_checkpoint({{"train", cfg.to_json()}});
  ck.rng_seed = cfg.seed;
  ck.capture_rng(rng);
  return ck;
}

}  // namespace srn
