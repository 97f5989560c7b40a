#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "json.hpp"
#include "srn/geometry.hpp"
#include "srn/network.hpp"
#include "srn/param_store.hpp"

namespace srn {

enum class InitMode { mean_shape, provided };

struct CascadeConfig {
  std::size_t num_iterations = 3;  // I
  InitMode initial_shape_mode = InitMode::mean_shape;
  // Backpropagate the objective through earlier shapes and hidden states;
  // when false each iteration is trained greedily on detached inputs.
  bool full_backprop = true;

  void validate() const;
  nlohmann::json to_json() const;
  static CascadeConfig from_json(const nlohmann::json& j);
};

// L^0..L^I and the residuals that produced them; L^i == L^{i-1} + dL^i exactly.
struct ShapeTrajectory {
  std::vector<FaceShape> shapes;
  std::vector<std::vector<double>> residuals;

  std::size_t iterations() const { return residuals.size(); }
  const FaceShape& final_shape() const { return shapes.back(); }
};

// A trained (or freshly initialised) SRN together with everything needed to run it.
struct SrnModel {
  SrnConfig net;
  CascadeConfig cascade;
  ParamStore params;
  FaceShape mean_shape;
  RnnMode mode = RnnMode::spatial;

  Checkpoint to_checkpoint(nlohmann::json extra_config = nlohmann::json::object()) const;
  static SrnModel from_checkpoint(const Checkpoint& ckpt);
};

// Regressor for one cascade step: receives patches cropped at L^{i-1} and the
// 1-based step index, returns dL^i (2N values, interleaved x/y).
using ResidualFn = std::function<std::vector<double>(const PatchSet&, std::size_t step)>;

ShapeTrajectory run_cascade(const FaceImage& image, const FaceShape& init,
                            std::size_t iterations, std::size_t patch_size, const ResidualFn& phi);

// Image-mode prediction: h^0 = 0 and the spatial RNN carries h across iterations.
ShapeTrajectory predict(const FaceImage& image, const FaceShape& init, const SrnModel& model);
ShapeTrajectory predict(const FaceImage& image, const SrnModel& model);

// sum_i || gt - (L^{i-1} + dL^i) ||^2
double loss(const ShapeTrajectory& traj, const FaceShape& gt);

// Graph form of one image's cascade, used by training and gradient checks.
struct TrajectoryGraph {
  std::vector<Var> shapes;  // L^1..L^I, each [2N]
  Var loss;                 // [1]
  Var h_last;               // hidden state after the final iteration
};

// With carry_h the hidden state threads through iterations (image mode);
// otherwise every iteration starts from h_prev and h_last is the final
// iteration's state (video mode).
TrajectoryGraph build_trajectory(ParamBinder& p, const SrnModel& model, const GroupSchema& schema,
                                 const FaceImage& image, const FaceShape& init,
                                 const Tensor& gt_flat, Var h_prev, bool carry_h);

enum class Augment { none, random_occlusion };

struct TrainConfig {
  SrnConfig net;
  CascadeConfig cascade;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 8;
  std::size_t steps = 2000;
  std::uint64_t seed = 0;
  Augment augment = Augment::none;
  double occlusion_fraction = 0.15;  // box half-extent as a fraction of face scale

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainSample {
  FaceImage image;
  FaceShape gt;
};

using TrainObserver = std::function<void(std::size_t step, double batch_loss)>;

// Mini-batch Adam on the cascade objective. Deterministic for a fixed seed.
// `init` warm-starts from existing parameters (their shapes must match the config).
Checkpoint train(std::span<const TrainSample> data, const TrainConfig& cfg,
                 const ParamStore* init = nullptr, const TrainObserver& observer = {});

// Box half-extent for random occlusion: fraction of the outer-eye distance
// for 68-point shapes, of the shape's bounding-box geometric mean otherwise.
double occlusion_half_extent(const FaceShape& shape, double fraction);

// Inserts one noise box at a uniformly drawn ground-truth landmark.
FaceImage random_occlusion(const FaceImage& image, const FaceShape& gt, double fraction,
                           std::mt19937_64& rng, std::size_t* chosen = nullptr);

}  // namespace srn
