#include "srn/tracking.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "srn/error.hpp"
#include "srn/evalkit.hpp"
#include "srn/ops.hpp"
#include "srn/optimizer.hpp"

namespace srn {

SrnModel retask(const SrnModel& image_model) {
  SrnModel m = image_model;
  if (m.mode == RnnMode::temporal) return m;
  const std::string w1 = rnn_weight_name(RnnMode::spatial), b1 = rnn_bias_name(RnnMode::spatial);
  m.params.set(rnn_weight_name(RnnMode::temporal), m.params.at(w1));
  m.params.set(rnn_bias_name(RnnMode::temporal), m.params.at(b1));
  m.params.erase(w1);
  m.params.erase(b1);
  m.mode = RnnMode::temporal;
  return m;
}

namespace {

void require_video(const SrnModel& m) {
  if (m.mode != RnnMode::temporal) throw InvalidInput("tracking needs a video-mode model (see retask)");
}

}  // namespace

ClipTrajectory track(std::span<const FaceImage> frames, const SrnModel& model) {
  require_video(model);
  if (frames.empty()) throw InvalidInput("cannot track an empty clip");
  const GroupSchema schema = model.net.resolved_schema();
  ClipTrajectory out;
  Tensor h({model.net.rnn_hidden}, 0.0);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const FaceShape& init = t == 0 ? model.mean_shape : out.shapes.back();
    Tensor h_next = h;
    auto traj = run_cascade(frames[t], init, model.cascade.num_iterations, model.net.patch_size,
                            [&](const PatchSet& ps, std::size_t) {
                              Graph g;
                              ParamBinder p(g, model.params, false);
                              auto step = net::srn_step(p, model.net, schema, g.constant(ps.patches),
                                                        g.constant(h), RnnMode::temporal);
                              h_next = step.h.value();
                              return step.delta.value().vec();
                            });
    h = std::move(h_next);
    out.shapes.push_back(traj.final_shape());
    out.hidden.push_back(h);
  }
  return out;
}

void FinetuneConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidInput("learning_rate must be positive");
  if (!(occlusion_fraction >= 0.0)) throw InvalidInput("occlusion_fraction must be >= 0");
  if (!(hofs_epsilon >= 0.0 && hofs_epsilon <= 1.0)) throw InvalidInput("hofs_epsilon must lie in [0, 1]");
}

nlohmann::json FinetuneConfig::to_json() const {
  static constexpr const char* names[] = {"none", "random_occlusion", "hofs"};
  return {{"steps", steps},
          {"learning_rate", learning_rate},
          {"seed", seed},
          {"augment", names[static_cast<int>(augment)]},
          {"occlusion_fraction", occlusion_fraction},
          {"hofs_epsilon", hofs_epsilon}};
}

FinetuneConfig FinetuneConfig::from_json(const nlohmann::json& j) {
  FinetuneConfig c;
  c.steps = j.value("steps", c.steps);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.seed = j.value("seed", c.seed);
  const std::string aug = j.value("augment", std::string("none"));
  if (aug == "none")
    c.augment = FinetuneAugment::none;
  else if (aug == "random_occlusion")
    c.augment = FinetuneAugment::random_occlusion;
  else if (aug == "hofs")
    c.augment = FinetuneAugment::hofs;
  else
    throw InvalidInput("unknown augment mode: " + aug);
  c.occlusion_fraction = j.value("occlusion_fraction", c.occlusion_fraction);
  c.hofs_epsilon = j.value("hofs_epsilon", c.hofs_epsilon);
  c.validate();
  return c;
}

Var clip_loss(ParamBinder& p, const SrnModel& model, std::span<const FaceImage> frames,
              std::span<const FaceShape> gts) {
  require_video(model);
  if (frames.empty() || frames.size() != gts.size()) throw InvalidInput("clip_loss: frames and shapes differ");
  Graph& g = p.graph();
  const GroupSchema schema = model.net.resolved_schema();
  Var h = g.constant(Tensor({model.net.rnn_hidden}, 0.0));
  Var total;
  FaceShape init = model.mean_shape;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    auto tg = build_trajectory(p, model, schema, frames[t], init, gts[t].to_tensor(), h, false);
    total = total.valid() ? ops::add(total, tg.loss) : tg.loss;
    init = FaceShape::from_flat(tg.shapes.back().value().data());
    h = tg.h_last;
  }
  return total;
}

SrnModel finetune(const SrnModel& video_model, std::span<const Clip> clips, const FinetuneConfig& cfg,
                  const QNet* qnet) {
  cfg.validate();
  require_video(video_model);
  if (clips.empty()) throw InvalidInput("fine-tuning needs at least one clip");
  if (cfg.augment == FinetuneAugment::hofs && !qnet) throw InvalidInput("hofs augmentation needs a Q-net");
  SrnModel model = video_model;
  std::mt19937_64 rng(cfg.seed);
  Adam adam({cfg.learning_rate, 0.9, 0.999, 1e-8});
  std::vector<std::size_t> order(clips.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;
  const CandidateScorer scorer = qnet ? qnet_scorer(*qnet) : null_scorer();

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    if (cursor == order.size()) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const Clip& clip = clips[order[cursor++]];
    std::vector<FaceImage> frames;
    std::vector<FaceShape> gts;
    for (const auto& f : clip.frames) gts.push_back(f.gt);
    switch (cfg.augment) {
      case FinetuneAugment::none:
        for (const auto& f : clip.frames) frames.push_back(f.image);
        break;
      case FinetuneAugment::random_occlusion:
        frames = synthesize_hard_clip(clip, {}, null_scorer(), 1.0, model.net.patch_size,
                                      cfg.occlusion_fraction, true, rng)
                     .frames;
        break;
      case FinetuneAugment::hofs:
        frames = synthesize_hard_clip(clip, {}, scorer, cfg.hofs_epsilon, model.net.patch_size,
                                      cfg.occlusion_fraction, true, rng)
                     .frames;
        break;
    }
    Graph g;
    ParamBinder p(g, model.params);
    Var loss;
    try {
      loss = clip_loss(p, model, frames, gts);
    } catch (const InvalidInput& e) {
      throw DivergedTraining("fine-tune step " + std::to_string(step) + ": prediction became invalid (" +
                             e.what() + ")");
    }
    if (!std::isfinite(loss.value()[0]))
      throw DivergedTraining("fine-tune step " + std::to_string(step) + ": non-finite loss");
    g.backward(loss);
    ParamStore grads;
    p.accumulate_grads(grads);
    adam.step(model.params, grads);
    if (!model.params.all_finite())
      throw DivergedTraining("fine-tune step " + std::to_string(step) + ": parameters became non-finite");
  }
  return model;
}

void write_predictions_csv(const std::filesystem::path& path, std::span<const std::string> frame_ids,
                           std::span<const FaceShape> shapes) {
  if (frame_ids.size() != shapes.size()) throw InvalidInput("predictions: ids and shapes differ in length");
  std::string text = "frame_id";
  const std::size_t N = shapes.empty() ? 0 : shapes.front().size();
  for (std::size_t n = 0; n < N; ++n) text += ",x" + std::to_string(n) + ",y" + std::to_string(n);
  text += "\n";
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    text += frame_ids[i];
    for (const auto& pt : shapes[i].points()) text += "," + format_double(pt.x) + "," + format_double(pt.y);
    text += "\n";
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << text;
}

}  // namespace srn
