#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>

#include "json.hpp"
#include "srn/geometry.hpp"
#include "srn/graph.hpp"
#include "srn/param_store.hpp"

namespace srn {

// Each switch removes one part of the relation module. Removed g/f become
// identity maps; without d each group's output head sees only its own f;
// without mu the merged residual is returned as is.
struct Ablation {
  bool use_g = true;
  bool use_f = true;
  bool use_d = true;
  bool use_mu = true;
  bool use_nonlocal = true;

  bool operator==(const Ablation&) const = default;
};

struct SrnConfig {
  std::size_t num_landmarks = 68;
  std::size_t channels = 1;
  std::size_t patch_size = 36;
  std::size_t conv1_channels = 32;
  std::size_t conv2_channels = 64;
  std::size_t feature_channels = 64;  // k
  std::size_t embed_channels = 64;    // width of the non-local embedding
  std::size_t rnn_hidden = 256;
  std::size_t g_dim = 512;
  std::size_t f_dim = 256;
  Ablation ablation;
  std::optional<GroupSchema> schema;  // unset -> default 68-point schema

  // Side of each per-patch feature map after three 2x2 pools (m).
  std::size_t feature_side() const { return patch_size / 2 / 2 / 2; }
  std::size_t descriptor_size() const {
    return feature_channels * feature_side() * feature_side();
  }
  GroupSchema resolved_schema() const { return partition(num_landmarks, schema); }
  void validate() const;

  nlohmann::json to_json() const;
  static SrnConfig from_json(const nlohmann::json& j);
};

enum class RnnMode { spatial, temporal };

// Parameter names of the input-to-hidden layer for each RNN role.
std::string rnn_weight_name(RnnMode mode);
std::string rnn_bias_name(RnnMode mode);

// Fan-in scaled uniform weights, zero biases. The non-local output transform
// starts at zero so the block is an identity at initialisation.
ParamStore init_srn_params(const SrnConfig& cfg, std::mt19937_64& rng,
                           RnnMode mode = RnnMode::spatial);
// Backbone-only parameters under `prefix` (used by the Q-net trunk too).
void init_backbone_params(ParamStore& store, const std::string& prefix, const SrnConfig& cfg,
                          std::mt19937_64& rng);

// Checks names and shapes against what `cfg` would initialise.
void check_srn_params(const ParamStore& params, const SrnConfig& cfg, RnnMode mode);

// Lazily binds ParamStore arrays as leaves of one graph.
class ParamBinder {
 public:
  ParamBinder(Graph& graph, const ParamStore& store, bool trainable = true)
      : graph_(graph), store_(store), trainable_(trainable) {}
  Var operator()(const std::string& name);
  // Uses `v` for `name` instead of a fresh leaf from the store.
  void bind(const std::string& name, Var v) { bound_[name] = v; }
  Graph& graph() { return graph_; }
  // Adds d(loss)/d(param) for every bound parameter into `grads`.
  void accumulate_grads(ParamStore& grads);

 private:
  Graph& graph_;
  const ParamStore& store_;
  bool trainable_;
  std::map<std::string, Var> bound_;
};

namespace net {

// patches [N,C,P,P] -> features [N,k,m,m]; relu after each conv, 2x2 max-pool after each relu.
Var backbone(ParamBinder& p, Var patches, const std::string& prefix = "backbone");

// Residual non-local block over the N per-patch descriptors:
// e = pi(x), y_u = (1/N) sum_v <e_u, e_v> e_v, R = F(y) + x.
Var non_local(ParamBinder& p, Var features);

// h = tanh([flatten(x), h_prev] W + b).
Var rnn_step(ParamBinder& p, Var features, Var h_prev, RnnMode mode);

// Per-group residuals [2|group|] in Group enum order; empty groups give an invalid Var.
std::array<Var, 6> hsrm(ParamBinder& p, const SrnConfig& cfg, const GroupSchema& schema,
                        Var relation_features, Var h);

// Scatters group residuals into landmark order (x0,y0,x1,y1,...) and applies mu.
Var global_integration(ParamBinder& p, const SrnConfig& cfg, const GroupSchema& schema,
                       const std::array<Var, 6>& residuals);

struct StepOutput {
  Var delta;     // [2N]
  Var h;         // [H]
  Var features;  // backbone output
};

// One cascade step: phi(patches) with the RNN advanced from h_prev.
StepOutput srn_step(ParamBinder& p, const SrnConfig& cfg, const GroupSchema& schema, Var patches,
                    Var h_prev, RnnMode mode);

}  // namespace net

// Value-level wrappers of the graph builders.
struct FeatureMapSet {
  Tensor maps;  // [N,k,m,m]
  std::size_t count() const { return maps.dim(0); }
  std::size_t total_maps() const { return maps.dim(0) * maps.dim(1); }
};

struct SpatialRnnState {
  Tensor h;  // [H]
};

FeatureMapSet backbone_forward(const PatchSet& patches, const ParamStore& params,
                               const SrnConfig& cfg);
FeatureMapSet non_local(const FeatureMapSet& x, const ParamStore& params);
SpatialRnnState rnn_step(const FeatureMapSet& x, const SpatialRnnState& h_prev,
                         const ParamStore& params, RnnMode mode = RnnMode::spatial);
std::map<Group, std::vector<double>> hsrm_forward(const FeatureMapSet& relation,
                                                  const SpatialRnnState& h,
                                                  const GroupSchema& schema,
                                                  const ParamStore& params, const SrnConfig& cfg);
std::vector<double> global_integration(const std::map<Group, std::vector<double>>& residuals,
                                       const GroupSchema& schema, const ParamStore& params,
                                       const SrnConfig& cfg);

}  // namespace srn
