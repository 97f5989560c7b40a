#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "srn/cascade.hpp"
#include "srn/datakit.hpp"
#include "srn/error.hpp"
#include "srn/geometry.hpp"
#include "srn/network.hpp"
#include "srn/optimizer.hpp"

namespace srn {

enum class MdpAction : std::size_t { shift_minus = 0, stay = 1, shift_plus = 2 };

inline constexpr std::array<MdpAction, 3> kActions = {MdpAction::shift_minus, MdpAction::stay,
                                                      MdpAction::shift_plus};

std::string_view action_name(MdpAction a);
// Occluded landmark after taking `a` at `index`; wraps modulo n.
std::size_t next_index(std::size_t index, MdpAction a, std::size_t n);

// Patches of a candidate occluded frame, cropped at the ground truth.
struct MdpState {
  PatchSet patches;
  std::size_t index = 0;
  std::size_t t = 0;
};

struct Candidate {
  MdpAction action = MdpAction::stay;
  FaceImage frame;
  MdpState state;
};

// The three frames with the noise box at index-1, index, index+1 (mod N).
// All three share `noise_seed`, so they differ only in box position.
std::array<Candidate, 3> candidate_states(const FaceImage& frame, const FaceShape& gt,
                                          std::size_t index, std::size_t t,
                                          std::size_t patch_size, double half_extent,
                                          std::uint64_t noise_seed);

// Greedy with probability 1 - epsilon (ties to the lowest action), uniform otherwise.
MdpAction select_action(const std::array<double, 3>& q, double epsilon, std::mt19937_64& rng);

using Predictor = std::function<FaceShape(const FaceImage&)>;

// sum_n |L_n - gt_n|^2 / (N eta); `squared = false` uses the plain Euclidean norm.
double reward(const FaceShape& predicted, const FaceShape& gt, double eta, bool squared = true);
double reward(const Predictor& predictor, const FaceImage& occluded, const FaceShape& gt,
              double eta, bool squared = true);

struct Experience {
  std::shared_ptr<const MdpState> state;
  MdpAction action = MdpAction::stay;
  double reward = 0.0;
  // The three candidate states of the next frame; unused when terminal.
  std::array<std::shared_ptr<const MdpState>, 3> next;
  bool terminal = false;
};

// Experiences of the last K clips, one bounded queue per clip.
template <typename T>
class ReplayStore {
 public:
  explicit ReplayStore(std::size_t clips = 3, std::size_t per_clip = 512)
      : k_(clips), cap_(per_clip) {
    if (k_ == 0 || cap_ == 0) throw InvalidInput("replay store needs K > 0 and capacity > 0");
  }

  // Appends to the queue of `clip_id`. A new id opens a queue and evicts the
  // oldest one once more than K are held. A full queue drops its oldest entry.
  void push(std::size_t clip_id, T item) {
    if (queues_.empty() || queues_.back().first != clip_id) {
      queues_.emplace_back(clip_id, std::deque<T>{});
      if (queues_.size() > k_) queues_.pop_front();
    }
    auto& q = queues_.back().second;
    if (q.size() == cap_) q.pop_front();
    q.push_back(std::move(item));
    order_.clear();
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& q : queues_) n += q.second.size();
    return n;
  }
  std::size_t num_clips() const { return queues_.size(); }
  std::vector<std::size_t> clip_ids() const {
    std::vector<std::size_t> ids;
    for (const auto& q : queues_) ids.push_back(q.first);
    return ids;
  }
  std::size_t clips_capacity() const { return k_; }

  // Draws walk a fresh random permutation of the stored items and reshuffle
  // once it is used up, so every draw is uniform and a batch never repeats
  // an item. Any push starts a new permutation.
  const T& sample_one(std::mt19937_64& rng) {
    const std::size_t n = size();
    if (n == 0) throw InvalidState("sampling from an empty replay store");
    if (order_.size() != n || cursor_ == n) {
      order_.resize(n);
      for (std::size_t i = 0; i < n; ++i) order_[i] = i;
      std::shuffle(order_.begin(), order_.end(), rng);
      cursor_ = 0;
    }
    return at(order_[cursor_++]);
  }

  // `count` draws without repeats.
  std::vector<T> sample(std::size_t count, std::mt19937_64& rng) {
    const std::size_t n = size();
    if (n == 0) throw InvalidState("sampling from an empty replay store");
    if (count > n) throw InvalidInput("batch larger than the replay store");
    order_.clear();
    std::vector<T> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(sample_one(rng));
    return out;
  }

  // Item `i` in insertion order across the held queues.
  const T& at(std::size_t i) const {
    for (const auto& q : queues_) {
      if (i < q.second.size()) return q.second[i];
      i -= q.second.size();
    }
    throw InvalidInput("replay store index out of range");
  }

 private:
  std::size_t k_, cap_;
  std::deque<std::pair<std::size_t, std::deque<T>>> queues_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

// Scores candidate states: backbone-shaped trunk, per-patch spatial mean,
// fully connected 256 -> relu -> scalar.
class QNet {
 public:
  QNet() = default;
  QNet(SrnConfig cfg, ParamStore params);

  // Trunk copied from the SRN backbone; head initialised from `rng`.
  static QNet from_srn(const SrnConfig& cfg, const ParamStore& srn_params, std::mt19937_64& rng,
                       std::size_t hidden = 256);

  double q(const MdpState& s) const;
  std::array<double, 3> q(const std::array<std::shared_ptr<const MdpState>, 3>& s) const;
  Var graph(ParamBinder& p, Var patches) const;

  const SrnConfig& config() const { return cfg_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }

 private:
  SrnConfig cfg_;
  ParamStore params_;
};

struct DqnConfig {
  double gamma = 0.9;
  double epsilon = 0.1;
  std::size_t batch_size = 32;
  std::size_t warmup = 64;  // experiences seen before the first update
  std::size_t replay_clips = 3;
  std::size_t clip_capacity = 512;
  double learning_rate = 1e-4;
  double occlusion_fraction = 0.15;
  bool squared_reward = true;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static DqnConfig from_json(const nlohmann::json& j);
};

// One gradient step on mean (Q(S) - target)^2 with target = r + gamma max Q(S')
// (just r when terminal) held constant. Returns the loss before the step.
double bellman_update(std::span<const Experience> batch, QNet& qnet, Adam& opt, double gamma = 0.9);

struct HofsStep {
  std::size_t frame;
  std::size_t index;
  MdpAction action = MdpAction::stay;
  double reward;
};

struct HardClip {
  std::vector<FaceImage> frames;
  std::vector<HofsStep> trace;
  std::vector<Experience> experiences;
};

// Scores a frame's three candidates.
using CandidateScorer = std::function<std::array<double, 3>(const std::array<Candidate, 3>&)>;

CandidateScorer qnet_scorer(const QNet& qnet);
// All-zero scores; with epsilon = 1 this is the uniformly random policy.
CandidateScorer null_scorer();

// Runs the MDP over a clip: start index drawn from `rng`, one decision per frame.
HardClip synthesize_hard_clip(const Clip& clip, const Predictor& predictor,
                              const CandidateScorer& scorer, double epsilon,
                              std::size_t patch_size, double occlusion_fraction,
                              bool squared_reward, std::mt19937_64& rng);

struct DqnReport {
  std::vector<double> clip_mean_reward;
  std::vector<double> losses;
};

// Deep Q-learning over `clips` against a frozen predictor.
DqnReport train_dqn(std::span<const Clip> clips, const Predictor& predictor, QNet& qnet,
                    const DqnConfig& cfg);

Predictor frozen_predictor(const SrnModel& model);

// Reward trace CSV: frame,index,action,reward.
void write_reward_trace(const std::filesystem::path& path, std::span<const HofsStep> trace);

// Tabular Q-learning on a small deterministic MDP.
struct TabularMdp {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::vector<std::vector<std::size_t>> next;   // [s][a]
  std::vector<std::vector<double>> rewards;     // [s][a]
  std::vector<bool> terminal;                   // episode ends on reaching s
};

class TabularQ {
 public:
  TabularQ(std::size_t states, std::size_t actions) : q_(states, std::vector<double>(actions, 0.0)) {}
  // Q(s,a) += alpha (r + gamma max Q(s') - Q(s,a)); the bootstrap term is dropped when terminal.
  void update(std::size_t s, std::size_t a, double r, std::size_t s_next, bool terminal, double alpha,
              double gamma);
  double value(std::size_t s) const;
  double at(std::size_t s, std::size_t a) const { return q_.at(s).at(a); }

 private:
  std::vector<std::vector<double>> q_;
};

// `sweeps` passes over every non-terminal (s, a) pair.
TabularQ q_learning(const TabularMdp& mdp, double gamma, std::size_t sweeps, double alpha);

}  // namespace srn
