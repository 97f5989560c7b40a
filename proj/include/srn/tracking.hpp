#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "json.hpp"
#include "srn/cascade.hpp"
#include "srn/datakit.hpp"
#include "srn/occlusion_mdp.hpp"

namespace srn {

// Video-mode model from an image-mode one: the input-to-hidden layer moves
// from rnn.w1/b1 to rnn.w2/b2 with identical shapes and values.
SrnModel retask(const SrnModel& image_model);

struct ClipTrajectory {
  std::vector<FaceShape> shapes;  // final shape per frame
  std::vector<Tensor> hidden;     // h^t per frame
};

// Frame 0 starts from the mean shape, frame t from frame t-1's result. Every
// cascade iteration of frame t reads h^{t-1}; h^t is the state produced at
// the final iteration.
ClipTrajectory track(std::span<const FaceImage> frames, const SrnModel& video_model);

enum class FinetuneAugment { none, random_occlusion, hofs };

struct FinetuneConfig {
  std::size_t steps = 100;  // one clip per step
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
  FinetuneAugment augment = FinetuneAugment::none;
  double occlusion_fraction = 0.15;
  double hofs_epsilon = 0.1;

  void validate() const;
  nlohmann::json to_json() const;
  static FinetuneConfig from_json(const nlohmann::json& j);
};

// Loss of one clip in video mode: sum over frames of the cascade objective,
// with warm starts detached and h carried across frames.
Var clip_loss(ParamBinder& p, const SrnModel& model, std::span<const FaceImage> frames,
              std::span<const FaceShape> gts);

// Fine-tunes a video-mode model on clips. Each step draws a clip, occludes it
// per `augment` (hofs needs `qnet`), and takes one Adam step on clip_loss.
SrnModel finetune(const SrnModel& video_model, std::span<const Clip> clips, const FinetuneConfig& cfg,
                  const QNet* qnet = nullptr);

// Predictions CSV: frame_id followed by 2N coordinates.
void write_predictions_csv(const std::filesystem::path& path, std::span<const std::string> frame_ids,
                           std::span<const FaceShape> shapes);

}  // namespace srn
