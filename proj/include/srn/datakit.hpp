#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "srn/geometry.hpp"

namespace srn {

struct AnnotatedSample {
  FaceImage image;
  FaceShape gt;
  std::optional<std::size_t> clip_id;
  std::optional<std::size_t> frame_no;
};

struct Clip {
  std::size_t id = 0;
  std::vector<AnnotatedSample> frames;
};

// pts annotation files: "version: 1", "n_points: k", "{", k "x y" lines, "}".
FaceShape parse_pts(std::string_view text);
std::string format_pts(const FaceShape& shape);
FaceShape read_pts(const std::filesystem::path& path);
void write_pts(const std::filesystem::path& path, const FaceShape& shape);

// 8-bit grayscale or RGB PNG. Writing is byte-deterministic.
FaceImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const FaceImage& image);

struct SynthConfig {
  std::size_t image_size = 80;
  std::size_t channels = 1;
  double face_scale = 22.0;    // face half-width in pixels
  double scale_range = 0.08;   // relative scale jitter
  double shift_range = 3.0;    // centre jitter in pixels
  double pose_range = 0.15;    // in-plane rotation, radians
  double jitter = 0.5;         // per-landmark noise, pixels
  double expression = 1.0;     // eye/mouth opening variation
  double pixel_noise = 0.02;
  std::uint64_t seed = 0;
  std::size_t count = 1;

  // Clip mode
  std::size_t frames_per_clip = 8;
  double motion_scale = 1.5;   // max per-frame landmark displacement, pixels

  void validate() const;
  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j);
};

// The canonical 68-point layout in face units (half-width 1, origin between the eyes).
const std::vector<Point>& ibug_template();

// Per-sample seed: a mix of the base seed and the index, so each sample is
// independent of generation order.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

std::vector<AnnotatedSample> generate_synthetic(const SynthConfig& cfg);
// cfg.count clips of cfg.frames_per_clip frames each.
std::vector<Clip> generate_clips(const SynthConfig& cfg);

// Renders a face sketch for 68 landmarks. Frames of one clip share a texture
// seed and differ in noise seed.
FaceImage render_face(const FaceShape& shape, const SynthConfig& cfg, std::uint64_t texture_seed,
                      std::uint64_t noise_seed);

// Flat datasets: <stem>.png next to <stem>.pts, loaded in sorted name order.
void save_dataset(const std::filesystem::path& dir, const std::vector<AnnotatedSample>& samples);
std::vector<AnnotatedSample> load_dataset(const std::filesystem::path& dir);

// Clip datasets: clip_<id>/frame_<n>.png + frame_<n>.pts.
void save_clips(const std::filesystem::path& dir, const std::vector<Clip>& clips);
std::vector<Clip> load_clips(const std::filesystem::path& dir);

}  // namespace srn
