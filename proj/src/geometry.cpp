#include "srn/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "srn/error.hpp"

namespace srn {

FaceShape::FaceShape(std::vector<Point> points) : points_(std::move(points)) {
  if (points_.size() < 2) throw InvalidInput("a face shape needs at least 2 landmarks");
  for (std::size_t i = 0; i < points_.size(); ++i)
    if (!std::isfinite(points_[i].x) || !std::isfinite(points_[i].y))
      throw InvalidInput("non-finite coordinate at landmark " + std::to_string(i));
}

FaceShape FaceShape::from_flat(std::span<const double> xy) {
  if (xy.size() % 2 != 0) throw InvalidInput("flat shape needs an even number of values");
  std::vector<Point> pts(xy.size() / 2);
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {xy[2 * i], xy[2 * i + 1]};
  return FaceShape(std::move(pts));
}

std::vector<double> FaceShape::flat() const {
  std::vector<double> out(points_.size() * 2);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    out[2 * i] = points_[i].x;
    out[2 * i + 1] = points_[i].y;
  }
  return out;
}

Tensor FaceShape::to_tensor() const { return Tensor({points_.size() * 2}, flat()); }

FaceShape FaceShape::translated(double dx, double dy) const {
  auto pts = points_;
  for (auto& p : pts) {
    p.x += dx;
    p.y += dy;
  }
  return FaceShape(std::move(pts));
}

Point FaceShape::centroid(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw InvalidInput("centroid of an empty index set");
  Point c;
  for (auto i : indices) {
    c.x += points_.at(i).x;
    c.y += points_.at(i).y;
  }
  c.x /= static_cast<double>(indices.size());
  c.y /= static_cast<double>(indices.size());
  return c;
}

FaceImage::FaceImage(std::size_t height, std::size_t width, std::size_t channels, double fill)
    : FaceImage(height, width, channels, std::vector<double>(height * width * channels, fill)) {}

FaceImage::FaceImage(std::size_t height, std::size_t width, std::size_t channels,
                     std::vector<double> pixels)
    : h_(height), w_(width), c_(channels), px_(std::move(pixels)) {
  if (channels != 1 && channels != 3) throw InvalidInput("image channels must be 1 or 3");
  if (height == 0 || width == 0) throw InvalidInput("image must be non-empty");
  if (px_.size() != h_ * w_ * c_) throw InvalidInput("pixel buffer size mismatch");
  if (!in_range()) throw InvalidInput("pixel values must lie in [0,1]");
}

bool FaceImage::in_range() const {
  return std::all_of(px_.begin(), px_.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

std::string_view group_name(Group g) {
  switch (g) {
    case Group::eyes: return "eyes";
    case Group::brows: return "brows";
    case Group::nose: return "nose";
    case Group::mouth: return "mouth";
    case Group::left_cheek: return "left_cheek";
    case Group::right_cheek: return "right_cheek";
  }
  return "?";
}

std::string_view neighborhood_name(Neighborhood n) {
  switch (n) {
    case Neighborhood::ocular: return "ocular";
    case Neighborhood::snout: return "snout";
    case Neighborhood::cheek: return "cheek";
  }
  return "?";
}

Neighborhood parent_of(Group g) {
  switch (g) {
    case Group::eyes:
    case Group::brows: return Neighborhood::ocular;
    case Group::nose:
    case Group::mouth: return Neighborhood::snout;
    default: return Neighborhood::cheek;
  }
}

Group sibling_of(Group g) {
  switch (g) {
    case Group::eyes: return Group::brows;
    case Group::brows: return Group::eyes;
    case Group::nose: return Group::mouth;
    case Group::mouth: return Group::nose;
    case Group::left_cheek: return Group::right_cheek;
    default: return Group::left_cheek;
  }
}

Neighborhood paired_of(Neighborhood n) {
  return n == Neighborhood::ocular ? Neighborhood::snout : n == Neighborhood::snout
                                                               ? Neighborhood::ocular
                                                               : Neighborhood::snout;
}

std::array<Group, 2> children_of(Neighborhood n) {
  switch (n) {
    case Neighborhood::ocular: return {Group::eyes, Group::brows};
    case Neighborhood::snout: return {Group::nose, Group::mouth};
    default: return {Group::left_cheek, Group::right_cheek};
  }
}

GroupSchema::GroupSchema(std::size_t num_landmarks, Sets groups)
    : n_(num_landmarks), groups_(std::move(groups)) {
  std::vector<int> seen(n_, 0);
  for (auto& g : groups_) {
    std::sort(g.begin(), g.end());
    for (auto i : g) {
      if (i >= n_) throw InvalidInput("group index " + std::to_string(i) + " out of range");
      if (seen[i]++) throw InvalidInput("landmark " + std::to_string(i) + " in two groups");
    }
  }
  for (std::size_t i = 0; i < n_; ++i)
    if (!seen[i]) throw InvalidInput("landmark " + std::to_string(i) + " not in any group");
}

std::vector<std::size_t> GroupSchema::neighborhood(Neighborhood n) const {
  auto [a, b] = children_of(n);
  std::vector<std::size_t> out = group(a);
  out.insert(out.end(), group(b).begin(), group(b).end());
  std::sort(out.begin(), out.end());
  return out;
}

namespace {
std::vector<std::size_t> range(std::size_t lo, std::size_t hi_inclusive) {
  std::vector<std::size_t> v(hi_inclusive - lo + 1);
  std::iota(v.begin(), v.end(), lo);
  return v;
}
}  // namespace

GroupSchema partition(std::size_t num_landmarks, std::optional<GroupSchema> user) {
  if (user) {
    if (user->num_landmarks() != num_landmarks)
      throw InvalidInput("user schema landmark count does not match N");
    return *user;
  }
  if (num_landmarks != 68)
    throw InvalidInput("no default group schema for N=" + std::to_string(num_landmarks) +
                       "; supply one explicitly");
  // iBUG 68: jaw 0-16 (chin 8 goes left), brows 17-26, nose 27-35, eyes 36-47, mouth 48-67.
  return GroupSchema(68, {range(36, 47), range(17, 26), range(27, 35), range(48, 67), range(0, 8),
                          range(9, 16)});
}

FaceShape mean_shape(std::span<const FaceShape> shapes) {
  if (shapes.empty()) throw InvalidInput("mean_shape of an empty list");
  const std::size_t n = shapes[0].size();
  std::vector<double> acc(2 * n, 0.0);
  for (const auto& s : shapes) {
    if (s.size() != n) throw InvalidInput("mean_shape over shapes with different N");
    for (std::size_t i = 0; i < n; ++i) {
      acc[2 * i] += s[i].x;
      acc[2 * i + 1] += s[i].y;
    }
  }
  for (auto& v : acc) v /= static_cast<double>(shapes.size());
  return FaceShape::from_flat(acc);
}

PatchSet extract_patches(const FaceImage& image, const FaceShape& shape, std::size_t patch_size) {
  if (patch_size == 0) throw InvalidInput("patch size must be at least 1");
  const std::size_t N = shape.size(), C = image.channels(), P = patch_size;
  const long H = static_cast<long>(image.height()), W = static_cast<long>(image.width());
  const long half = static_cast<long>(P / 2);
  Tensor out({N, C, P, P});
  for (std::size_t n = 0; n < N; ++n) {
    const long cx = std::lround(shape[n].x), cy = std::lround(shape[n].y);
    const long x0 = cx - half, y0 = cy - half;
    for (std::size_t c = 0; c < C; ++c) {
      double* dst = out.raw() + (n * C + c) * P * P;
      for (std::size_t py = 0; py < P; ++py) {
        const long iy = y0 + static_cast<long>(py);
        if (iy < 0 || iy >= H) continue;
        for (std::size_t px = 0; px < P; ++px) {
          const long ix = x0 + static_cast<long>(px);
          if (ix < 0 || ix >= W) continue;
          dst[py * P + px] = image.at(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), c);
        }
      }
    }
  }
  return PatchSet{std::move(out), shape, P};
}

PixelBox occlusion_box(const FaceImage& image, const OcclusionSpec& spec, const FaceShape& shape) {
  if (spec.center_landmark >= shape.size())
    throw InvalidInput("occlusion landmark index out of range");
  if (!(spec.half_extent >= 0.0)) throw InvalidInput("occlusion half extent must be >= 0");
  const Point& c = shape[spec.center_landmark];
  const long r = std::lround(spec.half_extent);
  const long cx = std::lround(c.x), cy = std::lround(c.y);
  PixelBox b{cx - r, cy - r, cx + r, cy + r};
  b.x0 = std::max(b.x0, 0L);
  b.y0 = std::max(b.y0, 0L);
  b.x1 = std::min(b.x1, static_cast<long>(image.width()) - 1);
  b.y1 = std::min(b.y1, static_cast<long>(image.height()) - 1);
  return b;
}

FaceImage insert_occlusion(const FaceImage& image, const OcclusionSpec& spec,
                           const FaceShape& shape) {
  const PixelBox b = occlusion_box(image, spec, shape);
  FaceImage out = image;
  if (b.empty()) return out;
  std::mt19937_64 rng(spec.noise_seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (long y = b.y0; y <= b.y1; ++y)
    for (long x = b.x0; x <= b.x1; ++x)
      for (std::size_t c = 0; c < out.channels(); ++c)
        out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = u(rng);
  return out;
}

double outer_eye_distance(const FaceShape& shape) {
  if (shape.size() != 68) throw InvalidInput("outer-eye distance needs a 68-point shape");
  return std::hypot(shape[36].x - shape[45].x, shape[36].y - shape[45].y);
}

double default_occlusion_half_extent(const FaceShape& shape, double fraction) {
  return fraction * outer_eye_distance(shape);
}

std::vector<std::size_t> mask_landmarks() {
  std::vector<std::size_t> idx = range(1, 15);
  idx.push_back(27);
  return idx;
}

std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(),
            [](const Point& a, const Point& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  };
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

bool inside_convex(std::span<const Point> hull, Point p) {
  if (hull.size() < 3) return false;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Point& a = hull[i];
    const Point& b = hull[(i + 1) % hull.size()];
    if ((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) < 0) return false;
  }
  return true;
}

FaceImage synthesize_mask(const FaceImage& image, const FaceShape& shape, double color) {
  if (shape.size() != 68) throw InvalidInput("mask synthesis needs a 68-point shape");
  if (!(color >= 0.0 && color <= 1.0)) throw InvalidInput("mask color must lie in [0,1]");
  std::vector<Point> pts;
  for (auto i : mask_landmarks()) pts.push_back(shape[i]);
  const auto hull = convex_hull(std::move(pts));
  FaceImage out = image;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& p : hull) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const long y0 = std::max(0L, static_cast<long>(std::floor(ymin)));
  const long y1 = std::min(static_cast<long>(image.height()) - 1, static_cast<long>(std::ceil(ymax)));
  const long x0 = std::max(0L, static_cast<long>(std::floor(xmin)));
  const long x1 = std::min(static_cast<long>(image.width()) - 1, static_cast<long>(std::ceil(xmax)));
  for (long y = y0; y <= y1; ++y)
    for (long x = x0; x <= x1; ++x)
      if (inside_convex(hull, {static_cast<double>(x), static_cast<double>(y)}))
        for (std::size_t c = 0; c < out.channels(); ++c)
          out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = color;
  return out;
}

}  // namespace srn
