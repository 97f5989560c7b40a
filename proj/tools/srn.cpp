#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "srn/cascade.hpp"
#include "srn/datakit.hpp"
#include "srn/error.hpp"
#include "srn/evalkit.hpp"
#include "srn/occlusion_mdp.hpp"
#include "srn/tracking.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace srn;

namespace {

constexpr int kUsage = 2;
constexpr int kFailure = 1;

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string log_config;
};

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidInput("config " + path + ": " + e.what());
  }
}

// --seed wins, then SRN_SEED, then whatever the config file says.
std::optional<std::uint64_t> resolve_seed(const Common& c) {
  if (c.seed) return c.seed;
  if (const char* env = std::getenv("SRN_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw CLI::ValidationError("SRN_SEED", std::string("not an unsigned integer: ") + env);
  }
  return std::nullopt;
}

void log_resolved(const Common& c, const json& resolved) {
  std::cerr << "resolved config: " << resolved.dump() << "\n";
  if (!c.log_config.empty()) {
    std::ofstream out(c.log_config);
    if (!out) throw InvalidInput("cannot write " + c.log_config);
    out << resolved.dump(2) << "\n";
  }
}

void add_common(CLI::App* sub, Common& c, bool config_required) {
  sub->add_option("--seed", c.seed, "RNG seed (falls back to $SRN_SEED)");
  auto* opt = sub->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  if (config_required) opt->required();
  sub->add_option("--log-config", c.log_config, "also write the resolved config here");
}

SrnModel load_model(const std::string& path) { return SrnModel::from_checkpoint(load_checkpoint(path)); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << text;
}

std::string frame_id(const Clip& c, std::size_t f) {
  return "clip_" + std::to_string(c.id) + "/frame_" + std::to_string(c.frames[f].frame_no.value_or(f));
}

// gen-data

struct GenArgs {
  Common common;
  std::string out;
  std::optional<std::size_t> count, frames, image_size;
  bool clips = false;
};

void run_gen(const GenArgs& a) {
  SynthConfig cfg = a.common.config.empty() ? SynthConfig{} : SynthConfig::from_json(read_json(a.common.config));
  if (auto s = resolve_seed(a.common)) cfg.seed = *s;
  if (a.count) cfg.count = *a.count;
  if (a.frames) cfg.frames_per_clip = *a.frames;
  if (a.image_size) cfg.image_size = *a.image_size;
  cfg.validate();
  log_resolved(a.common, {{"command", "gen-data"}, {"out", a.out}, {"clips", a.clips}, {"config", cfg.to_json()}});
  if (a.clips)
    save_clips(a.out, generate_clips(cfg));
  else
    save_dataset(a.out, generate_synthetic(cfg));
}

// train

struct TrainArgs {
  Common common;
  std::string data, out;
  std::optional<std::size_t> steps;
};

void run_train(const TrainArgs& a) {
  TrainConfig cfg = TrainConfig::from_json(read_json(a.common.config));
  if (auto s = resolve_seed(a.common)) cfg.seed = *s;
  if (a.steps) cfg.steps = *a.steps;
  cfg.validate();
  log_resolved(a.common, {{"command", "train"}, {"data", a.data}, {"out", a.out}, {"config", cfg.to_json()}});
  std::vector<TrainSample> samples;
  for (auto& s : load_dataset(a.data)) samples.push_back({std::move(s.image), std::move(s.gt)});
  const std::size_t every = std::max<std::size_t>(1, cfg.steps / 20);
  const Checkpoint ck = train(samples, cfg, nullptr, [&](std::size_t step, double l) {
    if (step % every == 0 || step + 1 == cfg.steps)
      std::cerr << "step " << step << " loss " << format_double(l) << "\n";
  });
  save_checkpoint(ck, a.out);
}

// eval

struct EvalArgs {
  Common common;
  std::string ckpt, data, norm = "interocular", report, ced_csv;
  double threshold = 0.08;
};

void run_eval(const EvalArgs& a) {
  const NormalizationRule rule = NormalizationRule::parse(a.norm);
  log_resolved(a.common, {{"command", "eval"},
                          {"ckpt", a.ckpt},
                          {"data", a.data},
                          {"norm", a.norm},
                          {"threshold", a.threshold},
                          {"report", a.report},
                          {"ced_csv", a.ced_csv}});
  const SrnModel model = load_model(a.ckpt);
  if (model.mode != RnnMode::spatial) throw InvalidInput("eval needs an image-mode checkpoint");
  const auto samples = load_dataset(a.data);
  std::vector<std::string> ids;
  std::vector<double> errors;
  char stem[32];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::snprintf(stem, sizeof stem, "sample_%05zu", i);
    ids.emplace_back(stem);
    errors.push_back(nme(predict(samples[i].image, model).final_shape(), samples[i].gt, rule));
  }
  if (!a.report.empty()) write_report_csv(a.report, ids, errors);
  if (!a.ced_csv.empty()) write_ced_csv(a.ced_csv, ced(errors, threshold_grid(0.1, 100)));
  std::cout << "images " << errors.size() << "\n"
            << "mean_nme " << format_double(mean(errors)) << "\n"
            << "failure_rate " << format_double(failure_rate(errors, a.threshold)) << "\n";
}

// track

struct TrackArgs {
  Common common;
  std::string ckpt, clips, out, norm = "interocular";
};

void run_track(const TrackArgs& a) {
  const NormalizationRule rule = NormalizationRule::parse(a.norm);
  log_resolved(a.common, {{"command", "track"}, {"ckpt", a.ckpt}, {"clips", a.clips}, {"out", a.out}, {"norm", a.norm}});
  SrnModel model = load_model(a.ckpt);
  if (model.mode == RnnMode::spatial) model = retask(model);
  std::vector<std::string> ids;
  std::vector<FaceShape> shapes;
  std::vector<double> errors;
  for (const auto& clip : load_clips(a.clips)) {
    std::vector<FaceImage> frames;
    for (const auto& f : clip.frames) frames.push_back(f.image);
    const auto traj = track(frames, model);
    for (std::size_t t = 0; t < frames.size(); ++t) {
      ids.push_back(frame_id(clip, t));
      shapes.push_back(traj.shapes[t]);
      errors.push_back(nme(traj.shapes[t], clip.frames[t].gt, rule));
    }
  }
  write_predictions_csv(a.out, ids, shapes);
  std::cout << "frames " << errors.size() << "\n"
            << "mean_nme " << format_double(mean(errors)) << "\n";
}

// synth-occ

struct OccArgs {
  Common common;
  std::string ckpt, clips, train_clips, out;
  std::optional<double> epsilon;
  std::size_t qnet_hidden = 256;
};

void run_occ(const OccArgs& a) {
  DqnConfig cfg = a.common.config.empty() ? DqnConfig{} : DqnConfig::from_json(read_json(a.common.config));
  if (auto s = resolve_seed(a.common)) cfg.seed = *s;
  const double epsilon = a.epsilon.value_or(cfg.epsilon);
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw CLI::ValidationError("--epsilon", "must lie in [0, 1]");
  cfg.validate();
  log_resolved(a.common, {{"command", "synth-occ"},
                          {"ckpt", a.ckpt},
                          {"clips", a.clips},
                          {"train_clips", a.train_clips},
                          {"out", a.out},
                          {"epsilon", epsilon},
                          {"qnet_hidden", a.qnet_hidden},
                          {"config", cfg.to_json()}});
  const SrnModel model = load_model(a.ckpt);
  if (model.mode != RnnMode::spatial) throw InvalidInput("synth-occ needs an image-mode checkpoint");
  const Predictor predictor = frozen_predictor(model);
  std::mt19937_64 rng(derive_seed(cfg.seed, 0));
  QNet qnet = QNet::from_srn(model.net, model.params, rng, a.qnet_hidden);
  if (!a.train_clips.empty()) {
    const auto train_set = load_clips(a.train_clips);
    const DqnReport rep = train_dqn(train_set, predictor, qnet, cfg);
    if (!rep.losses.empty())
      std::cerr << "dqn updates " << rep.losses.size() << " last loss " << format_double(rep.losses.back()) << "\n";
  }
  const CandidateScorer scorer = qnet_scorer(qnet);
  double total = 0.0;
  std::size_t steps = 0;
  for (const auto& clip : load_clips(a.clips)) {
    std::mt19937_64 clip_rng(derive_seed(cfg.seed, 1 + clip.id));
    const HardClip hard = synthesize_hard_clip(clip, predictor, scorer, epsilon, model.net.patch_size,
                                               cfg.occlusion_fraction, cfg.squared_reward, clip_rng);
    Clip occluded = clip;
    for (std::size_t t = 0; t < clip.frames.size(); ++t) occluded.frames[t].image = hard.frames[t];
    save_clips(a.out, {occluded});
    write_reward_trace(fs::path(a.out) / ("clip_" + std::to_string(clip.id)) / "rewards.csv", hard.trace);
    for (const auto& s : hard.trace) total += s.reward;
    steps += hard.trace.size();
  }
  if (steps == 0) throw InvalidInput("no frames to occlude");
  std::cout << "frames " << steps << "\n"
            << "mean_reward " << format_double(total / static_cast<double>(steps)) << "\n";
}

// plot-ced

struct CedArgs {
  Common common;
  std::vector<std::string> reports, labels;
  std::string out, csv;
  double max = 0.1;
  std::size_t bins = 100;
};

void run_ced(const CedArgs& a) {
  if (!a.labels.empty() && a.labels.size() != a.reports.size())
    throw CLI::ValidationError("--label", "give one label per report");
  if (!a.csv.empty() && a.reports.size() != 1) throw CLI::ValidationError("--csv", "needs exactly one report");
  log_resolved(a.common, {{"command", "plot-ced"},
                          {"reports", a.reports},
                          {"labels", a.labels},
                          {"out", a.out},
                          {"csv", a.csv},
                          {"max", a.max},
                          {"bins", a.bins}});
  const auto grid = threshold_grid(a.max, a.bins);
  std::vector<std::pair<std::string, std::vector<CedPoint>>> curves;
  for (std::size_t i = 0; i < a.reports.size(); ++i) {
    std::vector<double> errors;
    for (const auto& row : read_report_csv(a.reports[i])) errors.push_back(row.second);
    const std::string label = a.labels.empty() ? fs::path(a.reports[i]).stem().string() : a.labels[i];
    curves.emplace_back(label, ced(errors, grid));
  }
  if (!a.csv.empty()) write_ced_csv(a.csv, curves.front().second);
  if (!a.out.empty()) write_text(a.out, ced_svg(curves));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structural relation network for facial landmarks"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "render synthetic faces or clips");
  add_common(gen_cmd, gen.common, false);
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_flag("--clips", gen.clips, "write clip_<id>/frame_<n> directories");
  gen_cmd->add_option("--count", gen.count, "number of faces (or clips)");
  gen_cmd->add_option("--frames", gen.frames, "frames per clip");
  gen_cmd->add_option("--image-size", gen.image_size, "image side in pixels");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "train an image-mode model");
  add_common(train_cmd, tr.common, true);
  train_cmd->add_option("--data", tr.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", tr.out, "checkpoint path")->required();
  train_cmd->add_option("--steps", tr.steps, "override the step count");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on a dataset");
  add_common(eval_cmd, ev.common, false);
  eval_cmd->add_option("--ckpt", ev.ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", ev.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--norm", ev.norm, "interocular, interpupil, bbox or a number");
  eval_cmd->add_option("--report", ev.report, "per-image NME csv");
  eval_cmd->add_option("--ced", ev.ced_csv, "CED csv over [0, 0.1]");
  eval_cmd->add_option("--threshold", ev.threshold, "failure threshold");

  TrackArgs tk;
  auto* track_cmd = app.add_subcommand("track", "track clips in video mode");
  add_common(track_cmd, tk.common, false);
  track_cmd->add_option("--ckpt", tk.ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  track_cmd->add_option("--clips", tk.clips, "clip root")->required()->check(CLI::ExistingDirectory);
  track_cmd->add_option("--out", tk.out, "predictions csv")->required();
  track_cmd->add_option("--norm", tk.norm, "normalizer for the printed NME");

  OccArgs oc;
  auto* occ_cmd = app.add_subcommand("synth-occ", "synthesize hard occluded clips");
  add_common(occ_cmd, oc.common, false);
  occ_cmd->add_option("--ckpt", oc.ckpt, "frozen image-mode checkpoint")->required()->check(CLI::ExistingFile);
  occ_cmd->add_option("--clips", oc.clips, "clips to occlude")->required()->check(CLI::ExistingDirectory);
  occ_cmd->add_option("--out", oc.out, "output clip root")->required();
  occ_cmd->add_option("--train-clips", oc.train_clips, "train the Q-net on these clips first")
      ->check(CLI::ExistingDirectory);
  occ_cmd->add_option("--epsilon", oc.epsilon, "exploration rate while synthesizing");
  occ_cmd->add_option("--qnet-hidden", oc.qnet_hidden, "Q-net head width")->check(CLI::PositiveNumber);

  CedArgs cd;
  auto* ced_cmd = app.add_subcommand("plot-ced", "CED curves from report csvs");
  add_common(ced_cmd, cd.common, false);
  ced_cmd->add_option("--report", cd.reports, "report csv (repeatable)")->required()->check(CLI::ExistingFile);
  ced_cmd->add_option("--label", cd.labels, "legend label per report");
  ced_cmd->add_option("--out", cd.out, "svg path");
  ced_cmd->add_option("--csv", cd.csv, "threshold,fraction csv");
  ced_cmd->add_option("--max", cd.max, "largest threshold");
  ced_cmd->add_option("--bins", cd.bins, "grid intervals");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kUsage;
  }

  try {
    if (*gen_cmd) run_gen(gen);
    if (*train_cmd) run_train(tr);
    if (*eval_cmd) run_eval(ev);
    if (*track_cmd) run_track(tk);
    if (*occ_cmd) run_occ(oc);
    if (*ced_cmd) run_ced(cd);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return 0;
}
