#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "srn/error.hpp"
#include "srn/geometry.hpp"

using namespace srn;

namespace {

FaceShape random_shape(std::size_t n, std::mt19937_64& rng, double lo = 5.0, double hi = 75.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Point> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng)};
  return FaceShape(std::move(pts));
}

FaceImage random_image(std::size_t h, std::size_t w, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> px(h * w * c);
  for (auto& v : px) v = u(rng);
  return FaceImage(h, w, c, std::move(px));
}

// Even-odd ray casting; returns +1 strictly inside, -1 strictly outside, 0 within eps of an edge.
int classify(const std::vector<Point>& poly, Point p, double eps = 1e-6) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = poly[i], b = poly[(i + 1) % n];
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double t = std::clamp(((p.x - a.x) * vx + (p.y - a.y) * vy) / (vx * vx + vy * vy), 0.0, 1.0);
    if (std::hypot(p.x - a.x - t * vx, p.y - a.y - t * vy) < eps) return 0;
  }
  bool in = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point a = poly[i], b = poly[j];
    if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) in = !in;
  }
  return in ? 1 : -1;
}

}  // namespace

TEST_CASE("face shape rejects too few or non-finite landmarks") {
  CHECK_THROWS_AS(FaceShape({{1.0, 2.0}}), InvalidInput);
  CHECK_THROWS_AS(FaceShape({{1.0, 2.0}, {NAN, 0.0}}), InvalidInput);
  CHECK_THROWS_AS(FaceShape::from_flat(std::vector<double>{1.0, 2.0, 3.0}), InvalidInput);
}

TEST_CASE("partition(68) has the published group sizes and is a partition") {
  const GroupSchema s = partition(68);
  const std::array<std::size_t, 6> sizes{12, 10, 9, 20, 9, 8};
  std::set<std::size_t> all;
  std::size_t total = 0;
  for (std::size_t g = 0; g < 6; ++g) {
    CHECK(s.group(kGroups[g]).size() == sizes[g]);
    total += s.group(kGroups[g]).size();
    all.insert(s.group(kGroups[g]).begin(), s.group(kGroups[g]).end());
  }
  CHECK(total == 68);
  CHECK(all.size() == 68);
  CHECK(*all.begin() == 0);
  CHECK(*all.rbegin() == 67);
  std::vector<std::size_t> eyes(12);
  std::iota(eyes.begin(), eyes.end(), 36);
  CHECK(s.group(Group::eyes) == eyes);
}

TEST_CASE("neighborhoods are the unions of their child groups") {
  const GroupSchema s = partition(68);
  CHECK(parent_of(Group::eyes) == Neighborhood::ocular);
  CHECK(parent_of(Group::brows) == Neighborhood::ocular);
  CHECK(parent_of(Group::nose) == Neighborhood::snout);
  CHECK(parent_of(Group::mouth) == Neighborhood::snout);
  CHECK(parent_of(Group::left_cheek) == Neighborhood::cheek);
  CHECK(parent_of(Group::right_cheek) == Neighborhood::cheek);
  for (auto n : kNeighborhoods) {
    std::vector<std::size_t> u;
    for (auto g : children_of(n)) u.insert(u.end(), s.group(g).begin(), s.group(g).end());
    std::sort(u.begin(), u.end());
    auto got = s.neighborhood(n);
    std::sort(got.begin(), got.end());
    CHECK(got == u);
  }
}

TEST_CASE("partition needs a user schema for other landmark counts") {
  CHECK_THROWS_AS(partition(5), InvalidInput);
  GroupSchema::Sets sets{{{0}, {1}, {2}, {3}, {}, {}}};
  CHECK(partition(4, GroupSchema(4, sets)).group(Group::nose) == std::vector<std::size_t>{2});
  GroupSchema::Sets overlap{{{0, 1}, {1}, {2}, {3}, {}, {}}};
  CHECK_THROWS_AS(GroupSchema(4, overlap), InvalidInput);
  GroupSchema::Sets missing{{{0}, {1}, {2}, {}, {}, {}}};
  CHECK_THROWS_AS(GroupSchema(4, missing), InvalidInput);
}

TEST_CASE("mean_shape") {
  std::mt19937_64 rng(1);
  const FaceShape a = random_shape(7, rng);
  const std::vector<FaceShape> one{a};
  CHECK(mean_shape(one) == a);

  const std::vector<FaceShape> two{FaceShape(std::vector<Point>(3, {0.0, 0.0})),
                                   FaceShape(std::vector<Point>(3, {2.0, 2.0}))};
  CHECK(mean_shape(two) == FaceShape(std::vector<Point>(3, {1.0, 1.0})));

  std::vector<FaceShape> five;
  for (int i = 0; i < 5; ++i) five.push_back(random_shape(6, rng));
  const FaceShape m = mean_shape(five);
  for (std::size_t n = 0; n < 6; ++n) {
    double sx = 0.0, sy = 0.0;
    for (const auto& s : five) {
      sx += s[n].x;
      sy += s[n].y;
    }
    CHECK(m[n].x == sx / 5.0);
    CHECK(m[n].y == sy / 5.0);
  }

  std::vector<FaceShape> doubled = five;
  doubled.insert(doubled.end(), five.begin(), five.end());
  const FaceShape md = mean_shape(doubled);
  for (std::size_t n = 0; n < 6; ++n) {
    CHECK(md[n].x == doctest::Approx(m[n].x).epsilon(1e-15));
    CHECK(md[n].y == doctest::Approx(m[n].y).epsilon(1e-15));
  }

  CHECK_THROWS_AS(mean_shape(std::vector<FaceShape>{}), InvalidInput);
  CHECK_THROWS_AS(mean_shape(std::vector<FaceShape>{random_shape(3, rng), random_shape(4, rng)}),
                  InvalidInput);
}

TEST_CASE("extract_patches crops P x P around the rounded landmark") {
  std::mt19937_64 rng(2);
  const FaceImage img(80, 80, 1, 0.25);
  const FaceShape s = random_shape(68, rng);
  const PatchSet ps = extract_patches(img, s, 36);
  CHECK(ps.count() == 68);
  CHECK(ps.patches.shape() == Shape{68, 1, 36, 36});

  const FaceImage flat(41, 41, 1, 0.5);
  const PatchSet centre = extract_patches(flat, FaceShape({{20.0, 20.0}, {20.0, 20.0}}), 8);
  for (double v : centre.patches.data()) CHECK(v == 0.5);

  CHECK_THROWS_AS(extract_patches(img, s, 0), InvalidInput);
}

TEST_CASE("extract_patches zero-pads beyond the image") {
  std::mt19937_64 rng(3);
  const FaceImage img = random_image(10, 12, 3, rng);
  const std::size_t P = 4;
  const PatchSet ps = extract_patches(img, FaceShape({{0.0, 0.0}, {11.2, 9.4}}), P);
  for (std::size_t n = 0; n < 2; ++n) {
    const long cx = n == 0 ? 0 : 11, cy = n == 0 ? 0 : 9;
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t py = 0; py < P; ++py)
        for (std::size_t px = 0; px < P; ++px) {
          const long iy = cy - 2 + static_cast<long>(py), ix = cx - 2 + static_cast<long>(px);
          const bool in = iy >= 0 && iy < 10 && ix >= 0 && ix < 12;
          const double expect = in ? img.at(iy, ix, c) : 0.0;
          CHECK(ps.patches[((n * 3 + c) * P + py) * P + px] == expect);
        }
  }
}

TEST_CASE("extract_patches is translation consistent") {
  std::mt19937_64 rng(4);
  const FaceImage img = random_image(60, 60, 1, rng);
  const FaceShape s = random_shape(10, rng, 15.0, 35.0);
  for (auto [dx, dy] : {std::pair{3, 5}, std::pair{-4, 2}, std::pair{7, -6}}) {
    std::vector<double> px(60 * 60, 0.0);
    FaceImage shifted(60, 60, 1, px);
    for (long y = 0; y < 60; ++y)
      for (long x = 0; x < 60; ++x) {
        const long sy = y - dy, sx = x - dx;
        if (sy >= 0 && sy < 60 && sx >= 0 && sx < 60) shifted.at(y, x) = img.at(sy, sx);
      }
    const auto a = extract_patches(img, s, 8);
    const auto b = extract_patches(shifted, s.translated(dx, dy), 8);
    CHECK(a.patches == b.patches);
  }
}

TEST_CASE("insert_occlusion replaces exactly the clamped box") {
  const FaceImage img(10, 10, 1, 0.5);
  const FaceShape s({{5.0, 5.0}, {0.0, 0.0}});
  const FaceImage out = insert_occlusion(img, {0, 2.0, 9}, s);
  std::size_t changed = 0;
  for (std::size_t y = 0; y < 10; ++y)
    for (std::size_t x = 0; x < 10; ++x) {
      const bool inside = y >= 3 && y <= 7 && x >= 3 && x <= 7;
      if (!inside) CHECK(out.at(y, x) == img.at(y, x));
      changed += out.at(y, x) != img.at(y, x);
    }
  CHECK(changed == 25);
  CHECK(out == insert_occlusion(img, {0, 2.0, 9}, s));
  CHECK(out != insert_occlusion(img, {0, 2.0, 10}, s));

  const FaceImage point = insert_occlusion(img, {0, 0.0, 1}, s);
  std::size_t diff = 0;
  for (std::size_t i = 0; i < 100; ++i) diff += point.pixels()[i] != img.pixels()[i];
  CHECK(diff <= 1);
}

TEST_CASE("insert_occlusion leaves every pixel outside the box bit-identical") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const FaceImage img = random_image(24, 30, 3, rng);
    const FaceShape s = random_shape(4, rng, -3.0, 32.0);
    const OcclusionSpec spec{static_cast<std::size_t>(trial % 4), 1.0 + trial % 6, rng()};
    const PixelBox b = occlusion_box(img, spec, s);
    CHECK(b.x0 >= 0);
    CHECK(b.y0 >= 0);
    CHECK(b.x1 <= 29);
    CHECK(b.y1 <= 23);
    const FaceImage out = insert_occlusion(img, spec, s);
    for (long y = 0; y < 24; ++y)
      for (long x = 0; x < 30; ++x)
        for (std::size_t c = 0; c < 3; ++c) {
          const bool in = x >= b.x0 && x <= b.x1 && y >= b.y0 && y <= b.y1;
          if (!in) CHECK(out.at(y, x, c) == img.at(y, x, c));
          if (in) CHECK((out.at(y, x, c) >= 0.0 && out.at(y, x, c) < 1.0));
        }
  }
}

TEST_CASE("synthesize_mask fills the lower-face hull and nothing else") {
  std::mt19937_64 rng(6);
  const FaceImage img = random_image(80, 80, 1, rng);
  std::vector<Point> pts(68, {40.0, 10.0});
  for (std::size_t i = 0; i <= 16; ++i) {
    const double a = 3.14159265358979 * static_cast<double>(i) / 16.0;
    pts[i] = {40.0 - 25.0 * std::cos(a), 30.0 + 30.0 * std::sin(a)};
  }
  pts[27] = {40.3, 22.7};
  const FaceShape s(pts);
  const FaceImage out = synthesize_mask(img, s, 0.75);

  // The hull oracle: the polygon of landmarks 1..15 with the bridge point, whose
  // convex hull here is exactly that ring (jaw arc is convex, bridge above it).
  std::vector<Point> ring;
  for (std::size_t i = 1; i <= 15; ++i) ring.push_back(pts[i]);
  ring.push_back(pts[27]);
  std::size_t inside = 0;
  for (std::size_t y = 0; y < 80; ++y)
    for (std::size_t x = 0; x < 80; ++x) {
      const int c = classify(ring, {static_cast<double>(x), static_cast<double>(y)});
      if (c > 0) {
        CHECK(out.at(y, x) == 0.75);
        ++inside;
      } else if (c < 0) {
        CHECK(out.at(y, x) == img.at(y, x));
      }
    }
  CHECK(inside > 100);
  CHECK_THROWS_AS(synthesize_mask(img, random_shape(10, rng), 0.5), InvalidInput);
}

TEST_CASE("convex hull and inclusive inside test") {
  const std::vector<Point> square{{0, 0}, {2, 0}, {2, 2}, {0, 2}, {1, 1}, {1, 0}};
  const auto hull = convex_hull(square);
  CHECK(hull.size() == 4);
  CHECK(inside_convex(hull, {1.0, 1.0}));
  CHECK(inside_convex(hull, {2.0, 1.0}));
  CHECK_FALSE(inside_convex(hull, {2.1, 1.0}));
}

TEST_CASE("outer eye distance uses landmarks 36 and 45") {
  std::vector<Point> pts(68, {0.0, 0.0});
  pts[36] = {10.0, 20.0};
  pts[45] = {40.0, 60.0};
  CHECK(outer_eye_distance(FaceShape(pts)) == 50.0);
  CHECK(default_occlusion_half_extent(FaceShape(pts)) == doctest::Approx(7.5));
}
