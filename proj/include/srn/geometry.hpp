#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "srn/tensor.hpp"

namespace srn {

struct Point {
  double x = 0.0;  // column, pixels
  double y = 0.0;  // row, pixels
  bool operator==(const Point&) const = default;
};

// Ordered landmark coordinates in image pixels. Pixel centres sit on integer
// coordinates. Construction rejects N < 2 and non-finite coordinates.
class FaceShape {
 public:
  FaceShape() = default;
  explicit FaceShape(std::vector<Point> points);
  // Interleaved x0, y0, x1, y1, ...
  static FaceShape from_flat(std::span<const double> xy);

  std::size_t size() const noexcept { return points_.size(); }
  const Point& operator[](std::size_t i) const { return points_[i]; }
  const std::vector<Point>& points() const noexcept { return points_; }
  std::vector<double> flat() const;
  Tensor to_tensor() const;

  FaceShape translated(double dx, double dy) const;
  Point centroid(std::span<const std::size_t> indices) const;

  bool operator==(const FaceShape&) const = default;

 private:
  std::vector<Point> points_;
};

// H x W x C image with values in [0, 1], stored row-major with interleaved channels.
class FaceImage {
 public:
  FaceImage() = default;
  FaceImage(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0);
  FaceImage(std::size_t height, std::size_t width, std::size_t channels,
            std::vector<double> pixels);

  std::size_t height() const noexcept { return h_; }
  std::size_t width() const noexcept { return w_; }
  std::size_t channels() const noexcept { return c_; }
  double& at(std::size_t y, std::size_t x, std::size_t c = 0) { return px_[(y * w_ + x) * c_ + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c = 0) const {
    return px_[(y * w_ + x) * c_ + c];
  }
  const std::vector<double>& pixels() const noexcept { return px_; }
  std::vector<double>& pixels() noexcept { return px_; }
  bool in_range() const;

  bool operator==(const FaceImage&) const = default;

 private:
  std::size_t h_ = 0, w_ = 0, c_ = 0;
  std::vector<double> px_;
};

enum class Group : std::size_t { eyes, brows, nose, mouth, left_cheek, right_cheek };
enum class Neighborhood : std::size_t { ocular, snout, cheek };

inline constexpr std::array<Group, 6> kGroups = {Group::eyes,  Group::brows,      Group::nose,
                                                 Group::mouth, Group::left_cheek, Group::right_cheek};
inline constexpr std::array<Neighborhood, 3> kNeighborhoods = {
    Neighborhood::ocular, Neighborhood::snout, Neighborhood::cheek};

std::string_view group_name(Group g);
std::string_view neighborhood_name(Neighborhood n);
Neighborhood parent_of(Group g);
// The other group sharing the same neighborhood.
Group sibling_of(Group g);
// Neighborhood whose features each group also receives: ocular<->snout, cheek->snout.
Neighborhood paired_of(Neighborhood n);
std::array<Group, 2> children_of(Neighborhood n);

// Two-level partition of landmark indices: six disjoint groups covering
// {0..N-1}, each neighborhood the union of its two child groups.
class GroupSchema {
 public:
  using Sets = std::array<std::vector<std::size_t>, 6>;

  // Validates disjointness and coverage; groups may be empty for toy schemas.
  GroupSchema(std::size_t num_landmarks, Sets groups);

  std::size_t num_landmarks() const noexcept { return n_; }
  const std::vector<std::size_t>& group(Group g) const {
    return groups_[static_cast<std::size_t>(g)];
  }
  std::vector<std::size_t> neighborhood(Neighborhood n) const;
  const Sets& groups() const noexcept { return groups_; }

  bool operator==(const GroupSchema&) const = default;

 private:
  std::size_t n_;
  Sets groups_;
};

// Default iBUG 68-point schema for N == 68; other counts need `user`.
GroupSchema partition(std::size_t num_landmarks, std::optional<GroupSchema> user = std::nullopt);

// N patches [N, C, P, P] cropped around round(landmark), zero outside the image.
struct PatchSet {
  Tensor patches;
  FaceShape source_shape;
  std::size_t patch_size = 0;

  std::size_t count() const { return patches.rank() ? patches.dim(0) : 0; }
};

struct OcclusionSpec {
  std::size_t center_landmark = 0;
  double half_extent = 0.0;  // box radius in pixels; 0 gives a 1x1 box
  std::uint64_t noise_seed = 0;
};

struct PixelBox {
  long x0, y0, x1, y1;  // inclusive, already clamped to the image
  bool empty() const noexcept { return x1 < x0 || y1 < y0; }
};

FaceShape mean_shape(std::span<const FaceShape> shapes);

PatchSet extract_patches(const FaceImage& image, const FaceShape& shape, std::size_t patch_size);

PixelBox occlusion_box(const FaceImage& image, const OcclusionSpec& spec, const FaceShape& shape);
FaceImage insert_occlusion(const FaceImage& image, const OcclusionSpec& spec,
                           const FaceShape& shape);
// 0.15 x outer-eye-corner distance for 68-point shapes.
double default_occlusion_half_extent(const FaceShape& shape, double fraction = 0.15);

// Landmarks whose convex hull forms the synthetic surgical mask.
std::vector<std::size_t> mask_landmarks();
std::vector<Point> convex_hull(std::vector<Point> pts);
// True when p lies inside or on the boundary of a counter-clockwise convex polygon.
bool inside_convex(std::span<const Point> hull, Point p);
FaceImage synthesize_mask(const FaceImage& image, const FaceShape& shape, double color);

// Outer eye corners (36, 45) for 68-point shapes.
double outer_eye_distance(const FaceShape& shape);

}  // namespace srn
