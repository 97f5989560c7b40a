#include "srn/occlusion_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "srn/evalkit.hpp"
#include "srn/ops.hpp"

namespace srn {

std::string_view action_name(MdpAction a) {
  switch (a) {
    case MdpAction::shift_minus: return "shift_minus";
    case MdpAction::stay: return "stay";
    case MdpAction::shift_plus: return "shift_plus";
  }
  return "?";
}

std::size_t next_index(std::size_t index, MdpAction a, std::size_t n) {
  if (n == 0 || index >= n) throw InvalidInput("occlusion index out of range");
  switch (a) {
    case MdpAction::shift_minus: return (index + n - 1) % n;
    case MdpAction::stay: return index;
    case MdpAction::shift_plus: return (index + 1) % n;
  }
  throw InvalidInput("unknown action");
}

std::array<Candidate, 3> candidate_states(const FaceImage& frame, const FaceShape& gt,
                                          std::size_t index, std::size_t t,
                                          std::size_t patch_size, double half_extent,
                                          std::uint64_t noise_seed) {
  std::array<Candidate, 3> out;
  for (std::size_t p = 0; p < 3; ++p) {
    const MdpAction a = kActions[p];
    const std::size_t idx = next_index(index, a, gt.size());
    FaceImage occluded = insert_occlusion(frame, {idx, half_extent, noise_seed}, gt);
    MdpState s{extract_patches(occluded, gt, patch_size), idx, t};
    out[p] = {a, std::move(occluded), std::move(s)};
  }
  return out;
}

MdpAction select_action(const std::array<double, 3>& q, double epsilon, std::mt19937_64& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidInput("epsilon must lie in [0, 1]");
  for (double v : q)
    if (!std::isfinite(v)) throw InvalidState("Q-value is not finite");
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (u < epsilon) return kActions[std::uniform_int_distribution<std::size_t>(0, 2)(rng)];
  std::size_t best = 0;
  for (std::size_t p = 1; p < 3; ++p)
    if (q[p] > q[best]) best = p;
  return kActions[best];
}

double reward(const FaceShape& predicted, const FaceShape& gt, double eta, bool squared) {
  if (!(eta > 0.0)) throw InvalidInput("reward normalizer must be positive");
  if (predicted.size() != gt.size()) throw InvalidInput("reward: landmark count mismatch");
  double s = 0.0;
  for (std::size_t n = 0; n < gt.size(); ++n) {
    const double dx = predicted[n].x - gt[n].x, dy = predicted[n].y - gt[n].y;
    s += squared ? dx * dx + dy * dy : std::sqrt(dx * dx + dy * dy);
  }
  return s / (static_cast<double>(gt.size()) * eta);
}

double reward(const Predictor& predictor, const FaceImage& occluded, const FaceShape& gt, double eta,
              bool squared) {
  return reward(predictor(occluded), gt, eta, squared);
}

// ---------------------------------------------------------------- Q-net

namespace {

Tensor stack_patches(std::span<const MdpState* const> states) {
  const Shape& s = states.front()->patches.patches.shape();
  const std::size_t per = shape_numel(s);
  Tensor out({states.size() * s[0], s[1], s[2], s[3]});
  for (std::size_t i = 0; i < states.size(); ++i) {
    const Tensor& p = states[i]->patches.patches;
    if (p.shape() != s) throw InvalidInput("Q-net batch mixes patch shapes");
    std::copy(p.raw(), p.raw() + per, out.raw() + i * per);
  }
  return out;
}

void fan_in_uniform(Tensor& t, std::size_t fan_in, std::mt19937_64& rng) {
  const double a = std::sqrt(3.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-a, a);
  for (auto& v : t.vec()) v = u(rng);
}

}  // namespace

QNet::QNet(SrnConfig cfg, ParamStore params) : cfg_(std::move(cfg)), params_(std::move(params)) {
  for (const char* n : {"qnet.conv1.weight", "qnet.conv3.bias", "qnet.fc1.weight", "qnet.fc2.bias"})
    if (!params_.contains(n)) throw InvalidInput(std::string("Q-net parameters lack ") + n);
}

QNet QNet::from_srn(const SrnConfig& cfg, const ParamStore& srn_params, std::mt19937_64& rng,
                    std::size_t hidden) {
  if (hidden == 0) throw InvalidInput("Q-net hidden width must be positive");
  ParamStore p;
  p.copy_prefix(srn_params, "backbone.", "qnet.");
  const std::size_t in = cfg.num_landmarks * cfg.feature_channels;
  Tensor w1({in, hidden}), w2({hidden, 1});
  fan_in_uniform(w1, in, rng);
  fan_in_uniform(w2, hidden, rng);
  p.add("qnet.fc1.weight", std::move(w1));
  p.add("qnet.fc1.bias", Tensor({hidden}, 0.0));
  p.add("qnet.fc2.weight", std::move(w2));
  p.add("qnet.fc2.bias", Tensor({1}, 0.0));
  return QNet(cfg, std::move(p));
}

Var QNet::graph(ParamBinder& p, Var patches) const {
  const std::size_t N = cfg_.num_landmarks;
  const Shape s = patches.shape();
  if (s.size() != 4 || s[0] % N != 0) throw InvalidInput("Q-net input must be [B*N, C, P, P]");
  const std::size_t B = s[0] / N;
  Var x = ops::mean_spatial(net::backbone(p, patches, "qnet"));  // [B*N, k]
  x = ops::reshape(x, {B, N * x.shape()[1]});
  x = ops::relu(ops::linear(x, p("qnet.fc1.weight"), p("qnet.fc1.bias")));
  return ops::linear(x, p("qnet.fc2.weight"), p("qnet.fc2.bias"));  // [B, 1]
}

double QNet::q(const MdpState& s) const {
  Graph g;
  ParamBinder p(g, params_, false);
  return graph(p, g.constant(s.patches.patches)).value()[0];
}

std::array<double, 3> QNet::q(const std::array<std::shared_ptr<const MdpState>, 3>& s) const {
  const std::array<const MdpState*, 3> ptrs{s[0].get(), s[1].get(), s[2].get()};
  Graph g;
  ParamBinder p(g, params_, false);
  const Tensor out = graph(p, g.constant(stack_patches(ptrs))).value();
  return {out[0], out[1], out[2]};
}

// ---------------------------------------------------------------- learning

void DqnConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidInput("gamma must lie in [0, 1)");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidInput("epsilon must lie in [0, 1]");
  if (batch_size == 0) throw InvalidInput("batch_size must be positive");
  if (replay_clips == 0 || clip_capacity == 0) throw InvalidInput("replay sizes must be positive");
  if (!(learning_rate > 0.0)) throw InvalidInput("learning_rate must be positive");
}

nlohmann::json DqnConfig::to_json() const {
  return {{"gamma", gamma},
          {"epsilon", epsilon},
          {"batch_size", batch_size},
          {"warmup", warmup},
          {"replay_clips", replay_clips},
          {"clip_capacity", clip_capacity},
          {"learning_rate", learning_rate},
          {"occlusion_fraction", occlusion_fraction},
          {"squared_reward", squared_reward},
          {"epochs", epochs},
          {"seed", seed}};
}

DqnConfig DqnConfig::from_json(const nlohmann::json& j) {
  DqnConfig c;
  c.gamma = j.value("gamma", c.gamma);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.warmup = j.value("warmup", c.warmup);
  c.replay_clips = j.value("replay_clips", c.replay_clips);
  c.clip_capacity = j.value("clip_capacity", c.clip_capacity);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.occlusion_fraction = j.value("occlusion_fraction", c.occlusion_fraction);
  c.squared_reward = j.value("squared_reward", c.squared_reward);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

double bellman_update(std::span<const Experience> batch, QNet& qnet, Adam& opt, double gamma) {
  if (batch.empty()) throw InvalidInput("bellman_update needs a non-empty batch");
  const std::size_t B = batch.size();
  Tensor target({B, 1});
  std::vector<const MdpState*> states(B);
  for (std::size_t i = 0; i < B; ++i) {
    const Experience& e = batch[i];
    if (!e.state) throw InvalidInput("experience without a state");
    double t = e.reward;
    if (!e.terminal) {
      const auto next = qnet.q(e.next);
      t += gamma * *std::max_element(next.begin(), next.end());
    }
    target[i] = t;
    states[i] = e.state.get();
  }
  Graph g;
  ParamBinder p(g, qnet.params());
  Var q = qnet.graph(p, g.constant(stack_patches(states)));
  Var loss = ops::scale(ops::squared_error(q, target), 1.0 / static_cast<double>(B));
  const double value = loss.value()[0];
  if (!std::isfinite(value)) throw DivergedTraining("Q-net loss is not finite");
  g.backward(loss);
  ParamStore grads;
  p.accumulate_grads(grads);
  opt.step(qnet.params(), grads);
  return value;
}

CandidateScorer qnet_scorer(const QNet& qnet) {
  return [&qnet](const std::array<Candidate, 3>& c) {
    std::array<std::shared_ptr<const MdpState>, 3> s;
    for (std::size_t p = 0; p < 3; ++p)
      s[p] = std::shared_ptr<const MdpState>(std::shared_ptr<void>(), &c[p].state);
    return qnet.q(s);
  };
}

CandidateScorer null_scorer() {
  return [](const std::array<Candidate, 3>&) { return std::array<double, 3>{0.0, 0.0, 0.0}; };
}

namespace {

double reward_normalizer(const FaceShape& gt) {
  return normalizer(gt, gt.size() == 68 ? NormalizationRule::inter_ocular()
                                        : NormalizationRule::bbox_geomean());
}

}  // namespace

HardClip synthesize_hard_clip(const Clip& clip, const Predictor& predictor,
                              const CandidateScorer& scorer, double epsilon,
                              std::size_t patch_size, double occlusion_fraction,
                              bool squared_reward, std::mt19937_64& rng) {
  if (clip.frames.empty()) throw InvalidInput("cannot synthesize an empty clip");
  const std::size_t T = clip.frames.size();
  const std::size_t N = clip.frames.front().gt.size();
  std::size_t index = std::uniform_int_distribution<std::size_t>(0, N - 1)(rng);
  HardClip out;
  std::optional<Experience> pending;
  for (std::size_t t = 0; t < T; ++t) {
    const auto& f = clip.frames[t];
    if (f.gt.size() != N) throw InvalidInput("clip mixes landmark counts");
    auto cands = candidate_states(f.image, f.gt, index, t, patch_size,
                                  occlusion_half_extent(f.gt, occlusion_fraction), rng());
    const auto q = scorer(cands);
    const MdpAction a = select_action(q, epsilon, rng);
    std::array<std::shared_ptr<const MdpState>, 3> states;
    for (std::size_t p = 0; p < 3; ++p) states[p] = std::make_shared<const MdpState>(std::move(cands[p].state));
    if (pending) {
      pending->next = states;
      out.experiences.push_back(std::move(*pending));
    }
    const std::size_t p = static_cast<std::size_t>(a);
    const double r = predictor ? reward(predictor, cands[p].frame, f.gt, reward_normalizer(f.gt), squared_reward)
                               : 0.0;
    index = states[p]->index;
    out.trace.push_back({t, index, a, r});
    out.frames.push_back(std::move(cands[p].frame));
    pending = Experience{states[p], a, r, {}, t + 1 == T};
  }
  out.experiences.push_back(std::move(*pending));
  return out;
}

DqnReport train_dqn(std::span<const Clip> clips, const Predictor& predictor, QNet& qnet,
                    const DqnConfig& cfg) {
  cfg.validate();
  if (clips.empty()) throw InvalidInput("DQN training needs at least one clip");
  std::mt19937_64 rng(cfg.seed);
  Adam opt({cfg.learning_rate, 0.9, 0.999, 1e-8});
  ReplayStore<Experience> store(cfg.replay_clips, cfg.clip_capacity);
  const CandidateScorer scorer = qnet_scorer(qnet);
  DqnReport report;
  std::size_t clip_serial = 0, seen = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const Clip& clip : clips) {
      HardClip hc = synthesize_hard_clip(clip, predictor, scorer, cfg.epsilon, qnet.config().patch_size,
                                         cfg.occlusion_fraction, cfg.squared_reward, rng);
      double sum = 0.0;
      for (const auto& s : hc.trace) sum += s.reward;
      report.clip_mean_reward.push_back(sum / static_cast<double>(hc.trace.size()));
      for (auto& e : hc.experiences) {
        store.push(clip_serial, std::move(e));
        if (++seen >= cfg.warmup) {
          const auto batch = store.sample(std::min(cfg.batch_size, store.size()), rng);
          report.losses.push_back(bellman_update(batch, qnet, opt, cfg.gamma));
        }
      }
      ++clip_serial;
    }
  }
  return report;
}

Predictor frozen_predictor(const SrnModel& model) {
  auto m = std::make_shared<const SrnModel>(model);
  return [m](const FaceImage& img) { return predict(img, *m).final_shape(); };
}

void write_reward_trace(const std::filesystem::path& path, std::span<const HofsStep> trace) {
  std::string text = "frame,index,action,reward\n";
  for (const auto& s : trace)
    text += std::to_string(s.frame) + "," + std::to_string(s.index) + "," +
            std::to_string(static_cast<std::size_t>(s.action)) + "," + format_double(s.reward) + "\n";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------- tabular

void TabularQ::update(std::size_t s, std::size_t a, double r, std::size_t s_next, bool terminal,
                      double alpha, double gamma) {
  const double target = terminal ? r : r + gamma * value(s_next);
  double& q = q_.at(s).at(a);
  q += alpha * (target - q);
}

double TabularQ::value(std::size_t s) const {
  const auto& row = q_.at(s);
  return *std::max_element(row.begin(), row.end());
}

TabularQ q_learning(const TabularMdp& mdp, double gamma, std::size_t sweeps, double alpha) {
  if (mdp.num_states == 0 || mdp.num_actions == 0) throw InvalidInput("empty MDP");
  if (mdp.next.size() != mdp.num_states || mdp.rewards.size() != mdp.num_states ||
      mdp.terminal.size() != mdp.num_states)
    throw InvalidInput("MDP tables do not match the state count");
  TabularQ q(mdp.num_states, mdp.num_actions);
  for (std::size_t sweep = 0; sweep < sweeps; ++sweep)
    for (std::size_t s = 0; s < mdp.num_states; ++s) {
      if (mdp.terminal[s]) continue;
      for (std::size_t a = 0; a < mdp.num_actions; ++a) {
        const std::size_t n = mdp.next[s].at(a);
        q.update(s, a, mdp.rewards[s].at(a), n, mdp.terminal.at(n), alpha, gamma);
      }
    }
  return q;
}

}  // namespace srn
