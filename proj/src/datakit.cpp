#include "srn/datakit.hpp"

#include <png.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "srn/error.hpp"

namespace srn {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- pts

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

double parse_number(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v))
    throw ParseError("malformed number '" + std::string(tok) + "'", line);
  return v;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

FaceShape parse_pts(std::string_view text) {
  enum class Stage { header, body, done } stage = Stage::header;
  std::optional<std::size_t> n_points;
  bool has_version = false;
  std::vector<Point> pts;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto line = trim(raw);
    if (line.empty()) continue;
    switch (stage) {
      case Stage::header: {
        if (line == "{") {
          if (!has_version) throw ParseError("missing version header", line_no);
          if (!n_points) throw ParseError("missing n_points header", line_no);
          stage = Stage::body;
          break;
        }
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) throw ParseError("expected 'key: value' header", line_no);
        const auto key = trim(line.substr(0, colon));
        const auto val = trim(line.substr(colon + 1));
        if (key == "version") {
          parse_number(val, line_no);
          has_version = true;
        } else if (key == "n_points") {
          std::size_t n = 0;
          auto [ptr, ec] = std::from_chars(val.data(), val.data() + val.size(), n);
          if (ec != std::errc() || ptr != val.data() + val.size())
            throw ParseError("malformed n_points '" + std::string(val) + "'", line_no);
          n_points = n;
        }
        break;
      }
      case Stage::body: {
        if (line == "}") {
          if (pts.size() != *n_points)
            throw ParseError("expected " + std::to_string(*n_points) + " points, found " +
                                 std::to_string(pts.size()),
                             line_no);
          stage = Stage::done;
          break;
        }
        const auto toks = split_ws(line);
        if (toks.size() != 2) throw ParseError("expected 'x y'", line_no);
        if (pts.size() == *n_points)
          throw ParseError("more than " + std::to_string(*n_points) + " points", line_no);
        pts.push_back({parse_number(toks[0], line_no), parse_number(toks[1], line_no)});
        break;
      }
      case Stage::done:
        throw ParseError("unexpected content after closing brace", line_no);
    }
  }
  if (stage == Stage::header) throw ParseError("missing opening brace", line_no);
  if (stage == Stage::body) throw ParseError("missing closing brace", line_no);
  try {
    return FaceShape(std::move(pts));
  } catch (const InvalidInput& e) {
    throw ParseError(e.what(), line_no);
  }
}

std::string format_pts(const FaceShape& shape) {
  std::string out = "version: 1\nn_points: " + std::to_string(shape.size()) + "\n{\n";
  char buf[64];
  for (const auto& p : shape.points()) {
    auto r = std::to_chars(buf, buf + sizeof buf, p.x);
    *r.ptr++ = ' ';
    r = std::to_chars(r.ptr, buf + sizeof buf, p.y);
    out.append(buf, r.ptr);
    out += '\n';
  }
  out += "}\n";
  return out;
}

FaceShape read_pts(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_pts(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

void write_pts(const fs::path& path, const FaceShape& shape) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << format_pts(shape);
}

// ---------------------------------------------------------------- png

FaceImage read_png(const fs::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw InvalidInput("cannot read " + path.string() + ": " + img.message);
  const bool color = img.format & PNG_FORMAT_FLAG_COLOR;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw InvalidInput("cannot decode " + path.string() + ": " + img.message);
  }
  std::vector<double> px(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) px[i] = buf[i] / 255.0;
  return FaceImage(img.height, img.width, color ? 3 : 1, std::move(px));
}

void write_png(const fs::path& path, const FaceImage& image) {
  std::vector<png_byte> buf(image.pixels().size());
  for (std::size_t i = 0; i < buf.size(); ++i)
    buf[i] = static_cast<png_byte>(std::lround(std::clamp(image.pixels()[i], 0.0, 1.0) * 255.0));
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr))
    throw InvalidInput("cannot write " + path.string() + ": " + img.message);
}

// ---------------------------------------------------------------- synthesis

void SynthConfig::validate() const {
  if (image_size < 16) throw InvalidInput("image_size must be at least 16");
  if (channels != 1 && channels != 3) throw InvalidInput("channels must be 1 or 3");
  if (!(face_scale > 0.0) || face_scale * 2.2 > static_cast<double>(image_size))
    throw InvalidInput("face_scale does not fit the image");
  if (count < 1) throw InvalidInput("count must be at least 1");
  if (frames_per_clip < 1) throw InvalidInput("frames_per_clip must be at least 1");
  for (double v : {scale_range, shift_range, pose_range, jitter, expression, pixel_noise, motion_scale})
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidInput("synthesis ranges must be finite and >= 0");
}

nlohmann::json SynthConfig::to_json() const {
  return {{"image_size", image_size},   {"channels", channels},       {"face_scale", face_scale},
          {"scale_range", scale_range}, {"shift_range", shift_range}, {"pose_range", pose_range},
          {"jitter", jitter},           {"expression", expression},   {"pixel_noise", pixel_noise},
          {"seed", seed},               {"count", count},             {"frames_per_clip", frames_per_clip},
          {"motion_scale", motion_scale}};
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.image_size = j.value("image_size", c.image_size);
  c.channels = j.value("channels", c.channels);
  c.face_scale = j.value("face_scale", c.face_scale);
  c.scale_range = j.value("scale_range", c.scale_range);
  c.shift_range = j.value("shift_range", c.shift_range);
  c.pose_range = j.value("pose_range", c.pose_range);
  c.jitter = j.value("jitter", c.jitter);
  c.expression = j.value("expression", c.expression);
  c.pixel_noise = j.value("pixel_noise", c.pixel_noise);
  c.seed = j.value("seed", c.seed);
  c.count = j.value("count", c.count);
  c.frames_per_clip = j.value("frames_per_clip", c.frames_per_clip);
  c.motion_scale = j.value("motion_scale", c.motion_scale);
  c.validate();
  return c;
}

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<Point> build_template() {
  std::vector<Point> t(68);
  // jaw, from the image-left ear round the chin to the image-right ear
  for (int j = 0; j <= 16; ++j) {
    const double a = kPi * j / 16.0;
    t[j] = {-0.95 * std::cos(a), -0.1 + 1.1 * std::sin(a)};
  }
  for (int k = 0; k < 5; ++k) {
    const double u = k / 4.0;
    const double lift = 0.1 * std::sin(kPi * u);
    t[17 + k] = {-0.75 + 0.6 * u, -0.55 - lift};
    t[22 + k] = {0.15 + 0.6 * u, -0.55 - lift};
  }
  for (int k = 0; k < 4; ++k) t[27 + k] = {0.0, -0.3 + 0.15 * k};
  for (int k = 0; k < 5; ++k) t[31 + k] = {-0.2 + 0.1 * k, 0.28 + 0.04 * (k == 2)};
  auto ring = [&](int first, int count, Point c, double hw, double hh) {
    for (int k = 0; k < count; ++k) {
      const double a = kPi - 2.0 * kPi * k / count;
      t[first + k] = {c.x + hw * std::cos(a), c.y - hh * std::sin(a)};
    }
  };
  ring(36, 6, {-0.4, -0.3}, 0.17, 0.08);
  ring(42, 6, {0.4, -0.3}, 0.17, 0.08);
  ring(48, 12, {0.0, 0.6}, 0.35, 0.15);
  ring(60, 8, {0.0, 0.6}, 0.25, 0.06);
  return t;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct FaceParams {
  double scale, theta, cx, cy, eye_open, mouth_open;
};

FaceParams sample_params(const SynthConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FaceParams p;
  p.scale = cfg.face_scale * (1.0 + cfg.scale_range * u(rng));
  p.theta = cfg.pose_range * u(rng);
  const double mid = (static_cast<double>(cfg.image_size) - 1.0) / 2.0;
  p.cx = mid + cfg.shift_range * u(rng);
  p.cy = mid + cfg.shift_range * u(rng);
  p.eye_open = 1.0 + 0.3 * cfg.expression * u(rng);
  p.mouth_open = 1.0 + 0.6 * cfg.expression * u(rng);
  return p;
}

// Places the template; (cx, cy) is the centre of the face's vertical extent.
std::vector<Point> pose_template(const FaceParams& p) {
  std::vector<Point> t = ibug_template();
  auto open = [&](int first, int count, double f) {
    double cy = 0.0;
    for (int k = 0; k < count; ++k) cy += t[first + k].y;
    cy /= count;
    for (int k = 0; k < count; ++k) t[first + k].y = cy + f * (t[first + k].y - cy);
  };
  open(36, 6, p.eye_open);
  open(42, 6, p.eye_open);
  open(60, 8, p.mouth_open);
  constexpr double kMidY = 0.175;
  const double c = std::cos(p.theta), s = std::sin(p.theta);
  for (auto& q : t) {
    const double x = q.x, y = q.y - kMidY;
    q = {p.cx + p.scale * (c * x - s * y), p.cy + p.scale * (s * x + c * y)};
  }
  return t;
}

bool inside_image(const std::vector<Point>& pts, std::size_t size) {
  const double hi = static_cast<double>(size) - 1.0;
  return std::all_of(pts.begin(), pts.end(),
                     [hi](const Point& q) { return q.x >= 0.0 && q.y >= 0.0 && q.x <= hi && q.y <= hi; });
}

double seg_dist(Point p, Point a, Point b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double wx = p.x - a.x, wy = p.y - a.y;
  const double len2 = vx * vx + vy * vy;
  const double t = len2 > 0.0 ? std::clamp((wx * vx + wy * vy) / len2, 0.0, 1.0) : 0.0;
  const double dx = wx - t * vx, dy = wy - t * vy;
  return std::sqrt(dx * dx + dy * dy);
}

struct Layer {
  std::vector<Point> pts;
  bool closed;       // filled polygon when true, stroked polyline otherwise
  double width;      // stroke width
  double value;
  Point lo{}, hi{};  // bounding box, filled by bound()
};

Layer bound(Layer l) {
  l.lo = l.hi = l.pts.front();
  for (const auto& q : l.pts) {
    l.lo = {std::min(l.lo.x, q.x), std::min(l.lo.y, q.y)};
    l.hi = {std::max(l.hi.x, q.x), std::max(l.hi.y, q.y)};
  }
  return l;
}

double coverage(const Layer& l, Point p) {
  const double margin = l.width / 2.0 + 1.0;
  if (p.x < l.lo.x - margin || p.x > l.hi.x + margin || p.y < l.lo.y - margin || p.y > l.hi.y + margin)
    return 0.0;
  double d = 1e300;
  const std::size_t n = l.pts.size();
  const std::size_t edges = l.closed ? n : n - 1;
  for (std::size_t i = 0; i < edges; ++i) d = std::min(d, seg_dist(p, l.pts[i], l.pts[(i + 1) % n]));
  if (!l.closed) return std::clamp(l.width / 2.0 + 0.5 - d, 0.0, 1.0);
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point a = l.pts[i], b = l.pts[j];
    if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x)
      inside = !inside;
  }
  return std::clamp(0.5 + (inside ? d : -d), 0.0, 1.0);
}

std::vector<Point> slice(const FaceShape& s, int first, int last) {
  return {s.points().begin() + first, s.points().begin() + last + 1};
}

}  // namespace

const std::vector<Point>& ibug_template() {
  static const std::vector<Point> t = build_template();
  return t;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) { return splitmix64(seed ^ splitmix64(index)); }

FaceImage render_face(const FaceShape& shape, const SynthConfig& cfg, std::uint64_t texture_seed,
                      std::uint64_t noise_seed) {
  if (shape.size() != 68) throw InvalidInput("render_face needs a 68-point shape");
  const std::size_t S = cfg.image_size, C = cfg.channels;
  std::mt19937_64 tex(texture_seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  struct Wave { double kx, ky, phase, amp; };
  std::array<Wave, 3> bg{}, skin{};
  for (auto* set : {&bg, &skin})
    for (auto& w : *set) {
      const double a = 2.0 * kPi * u(tex), f = 0.05 + 0.15 * u(tex);
      w = {f * std::cos(a), f * std::sin(a), 2.0 * kPi * u(tex), 0.03 + 0.04 * u(tex)};
    }
  const double bg_level = 0.15 + 0.2 * u(tex);
  const double skin_level = 0.55 + 0.15 * u(tex);
  std::array<double, 3> tint{1.0, 1.0, 1.0};
  if (C == 3) tint = {1.0, 0.85 + 0.1 * u(tex), 0.7 + 0.15 * u(tex)};

  // Face outline: jaw plus a forehead arc lifted above the brows.
  std::vector<Point> outline = slice(shape, 0, 16);
  const Point anchor = shape[30];
  for (int k = 26; k >= 17; --k)
    outline.push_back({shape[k].x + 0.45 * (shape[k].x - anchor.x), shape[k].y + 0.45 * (shape[k].y - anchor.y)});

  const std::vector<Layer> features = {
      bound({slice(shape, 0, 16), false, 0.9, skin_level - 0.2}),
      bound({slice(shape, 17, 21), false, 1.4, 0.18}),
      bound({slice(shape, 22, 26), false, 1.4, 0.18}),
      bound({slice(shape, 27, 30), false, 0.9, skin_level - 0.25}),
      bound({slice(shape, 31, 35), false, 1.0, 0.28}),
      bound({slice(shape, 36, 41), true, 0.0, 0.1}),
      bound({slice(shape, 42, 47), true, 0.0, 0.1}),
      bound({slice(shape, 48, 59), true, 0.0, 0.38}),
      bound({slice(shape, 60, 67), true, 0.0, 0.08}),
  };
  const Layer face = bound({outline, true, 0.0, 0.0});

  std::mt19937_64 noise(noise_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  FaceImage img(S, S, C);
  for (std::size_t y = 0; y < S; ++y)
    for (std::size_t x = 0; x < S; ++x) {
      const Point p{static_cast<double>(x), static_cast<double>(y)};
      auto texture = [&](const std::array<Wave, 3>& ws) {
        double t = 0.0;
        for (const auto& w : ws) t += w.amp * std::sin(w.kx * p.x + w.ky * p.y + w.phase);
        return t;
      };
      double v = bg_level + texture(bg);
      const double fc = coverage(face, p);
      v = v * (1.0 - fc) + (skin_level + texture(skin)) * fc;
      if (fc > 0.0)
        for (const auto& l : features) {
          const double c = coverage(l, p) * fc;
          v = v * (1.0 - c) + l.value * c;
        }
      for (std::size_t c = 0; c < C; ++c)
        img.at(y, x, c) = std::clamp(v * tint[c] + cfg.pixel_noise * gauss(noise), 0.0, 1.0);
    }
  return img;
}

namespace {

std::vector<Point> jittered(const FaceParams& p, const std::vector<Point>& offsets) {
  auto pts = pose_template(p);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    pts[i].x += offsets[i].x;
    pts[i].y += offsets[i].y;
  }
  return pts;
}

std::vector<Point> draw_offsets(const SynthConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Point> off(68);
  for (auto& o : off) o = {cfg.jitter * n(rng), cfg.jitter * n(rng)};
  return off;
}

// Draws pose and jitter until every landmark lands inside the image.
std::pair<FaceParams, std::vector<Point>> draw_face(const SynthConfig& cfg, std::mt19937_64& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    FaceParams p = sample_params(cfg, rng);
    auto off = draw_offsets(cfg, rng);
    if (inside_image(jittered(p, off), cfg.image_size)) return {p, off};
  }
  throw InvalidInput("synthesis ranges leave no face inside the image");
}

}  // namespace

std::vector<AnnotatedSample> generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<AnnotatedSample> out(cfg.count);
  for (std::size_t i = 0; i < cfg.count; ++i) {
    const std::uint64_t s = derive_seed(cfg.seed, i);
    std::mt19937_64 rng(s);
    auto [p, off] = draw_face(cfg, rng);
    FaceShape shape(jittered(p, off));
    out[i].image = render_face(shape, cfg, rng(), rng());
    out[i].gt = std::move(shape);
  }
  return out;
}

std::vector<Clip> generate_clips(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<Clip> clips(cfg.count);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t ci = 0; ci < cfg.count; ++ci) {
    std::mt19937_64 rng(derive_seed(cfg.seed, ci));
    auto [p, off] = draw_face(cfg, rng);
    const std::uint64_t texture_seed = rng();
    Clip& clip = clips[ci];
    clip.id = ci;
    std::vector<Point> prev = jittered(p, off);
    // Velocity in pose space, re-drawn a little each frame for smooth motion.
    FaceParams vel{0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    for (std::size_t f = 0; f < cfg.frames_per_clip; ++f) {
      if (f > 0) {
        const double m = cfg.motion_scale;
        vel.cx = 0.6 * vel.cx + 0.5 * m * u(rng);
        vel.cy = 0.6 * vel.cy + 0.5 * m * u(rng);
        vel.theta = 0.6 * vel.theta + 0.01 * u(rng);
        vel.scale = 0.6 * vel.scale + 0.005 * cfg.face_scale * u(rng);
        vel.eye_open = 0.6 * vel.eye_open + 0.05 * cfg.expression * u(rng);
        vel.mouth_open = 0.6 * vel.mouth_open + 0.1 * cfg.expression * u(rng);
        // Shrink the step until the motion bound and image bounds hold.
        double lambda = 1.0;
        std::vector<Point> next;
        FaceParams q = p;
        for (int h = 0; h < 60; ++h, lambda *= 0.5) {
          q = {p.scale + lambda * vel.scale,       p.theta + lambda * vel.theta,
               p.cx + lambda * vel.cx,             p.cy + lambda * vel.cy,
               p.eye_open + lambda * vel.eye_open, p.mouth_open + lambda * vel.mouth_open};
          next = jittered(q, off);
          double worst = 0.0;
          for (std::size_t i = 0; i < next.size(); ++i)
            worst = std::max(worst, std::hypot(next[i].x - prev[i].x, next[i].y - prev[i].y));
          const bool face_ok = std::abs(q.theta) <= cfg.pose_range + 1e-12 &&
                               std::abs(q.scale / cfg.face_scale - 1.0) <= cfg.scale_range + 1e-12 &&
                               q.eye_open > 0.4 && q.mouth_open > 0.2;
          if (worst <= m && face_ok && inside_image(next, cfg.image_size)) break;
          next = prev;
          q = p;
        }
        if (lambda < 1.0) vel = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
        p = q;
        prev = std::move(next);
      }
      AnnotatedSample s;
      s.gt = FaceShape(prev);
      s.image = render_face(s.gt, cfg, texture_seed, derive_seed(texture_seed, f));
      s.clip_id = ci;
      s.frame_no = f;
      clip.frames.push_back(std::move(s));
    }
  }
  return clips;
}

// ---------------------------------------------------------------- directories

void save_dataset(const fs::path& dir, const std::vector<AnnotatedSample>& samples) {
  fs::create_directories(dir);
  char stem[32];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::snprintf(stem, sizeof stem, "sample_%05zu", i);
    write_png(dir / (std::string(stem) + ".png"), samples[i].image);
    write_pts(dir / (std::string(stem) + ".pts"), samples[i].gt);
  }
}

std::vector<AnnotatedSample> load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InvalidInput("not a directory: " + dir.string());
  std::vector<fs::path> pts;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".pts") pts.push_back(e.path());
  std::sort(pts.begin(), pts.end());
  std::vector<AnnotatedSample> out;
  for (const auto& p : pts) {
    auto png = p;
    png.replace_extension(".png");
    if (!fs::exists(png)) throw InvalidInput("missing image for " + p.string());
    out.push_back({read_png(png), read_pts(p), std::nullopt, std::nullopt});
  }
  if (out.empty()) throw InvalidInput("no annotated samples in " + dir.string());
  return out;
}

void save_clips(const fs::path& dir, const std::vector<Clip>& clips) {
  for (const auto& c : clips) {
    const fs::path cd = dir / ("clip_" + std::to_string(c.id));
    fs::create_directories(cd);
    for (std::size_t f = 0; f < c.frames.size(); ++f) {
      const std::string stem = "frame_" + std::to_string(c.frames[f].frame_no.value_or(f));
      write_png(cd / (stem + ".png"), c.frames[f].image);
      write_pts(cd / (stem + ".pts"), c.frames[f].gt);
    }
  }
}

namespace {

std::optional<std::size_t> numeric_suffix(const std::string& name, std::string_view prefix) {
  if (name.rfind(prefix, 0) != 0 || name.size() == prefix.size()) return std::nullopt;
  std::size_t v = 0;
  const char* b = name.data() + prefix.size();
  const char* e = name.data() + name.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) return std::nullopt;
  return v;
}

}  // namespace

std::vector<Clip> load_clips(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InvalidInput("not a directory: " + dir.string());
  std::map<std::size_t, fs::path> clip_dirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory())
      if (auto id = numeric_suffix(e.path().filename().string(), "clip_")) clip_dirs[*id] = e.path();
  std::vector<Clip> clips;
  for (const auto& [id, cd] : clip_dirs) {
    std::map<std::size_t, fs::path> frames;
    for (const auto& e : fs::directory_iterator(cd))
      if (e.is_regular_file() && e.path().extension() == ".pts")
        if (auto n = numeric_suffix(e.path().stem().string(), "frame_")) frames[*n] = e.path();
    Clip clip;
    clip.id = id;
    std::size_t expect = frames.empty() ? 0 : frames.begin()->first;
    for (const auto& [n, p] : frames) {
      if (n != expect++) throw InvalidInput("frame numbers in " + cd.string() + " are not contiguous");
      auto png = p;
      png.replace_extension(".png");
      if (!fs::exists(png)) throw InvalidInput("missing image for " + p.string());
      clip.frames.push_back({read_png(png), read_pts(p), id, n});
    }
    if (clip.frames.empty()) throw InvalidInput("clip without frames: " + cd.string());
    clips.push_back(std::move(clip));
  }
  if (clips.empty()) throw InvalidInput("no clip_<id> directories in " + dir.string());
  return clips;
}

}  // namespace srn
