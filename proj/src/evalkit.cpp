#include "srn/evalkit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "srn/error.hpp"

namespace srn {

namespace fs = std::filesystem;

NormalizationRule NormalizationRule::parse(const std::string& text) {
  if (text == "interocular" || text == "inter_ocular") return inter_ocular();
  if (text == "interpupil" || text == "inter_pupil") return inter_pupil();
  if (text == "bbox" || text == "bbox_geomean") return bbox_geomean();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !(v > 0.0) || !std::isfinite(v))
    throw InvalidInput("unknown normalization '" + text + "'");
  return explicit_value(v);
}

double normalizer(const FaceShape& gt, const NormalizationRule& rule) {
  double d = 0.0;
  switch (rule.kind) {
    case NormalizationRule::Kind::inter_ocular:
      d = outer_eye_distance(gt);
      break;
    case NormalizationRule::Kind::inter_pupil: {
      if (gt.size() != 68) throw InvalidInput("inter-pupil normalization needs 68 landmarks");
      static constexpr std::size_t left[] = {36, 37, 38, 39, 40, 41};
      static constexpr std::size_t right[] = {42, 43, 44, 45, 46, 47};
      const Point a = gt.centroid(left), b = gt.centroid(right);
      d = std::hypot(a.x - b.x, a.y - b.y);
      break;
    }
    case NormalizationRule::Kind::bbox_geomean: {
      double x0 = gt[0].x, x1 = x0, y0 = gt[0].y, y1 = y0;
      for (const auto& p : gt.points()) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
      }
      d = std::sqrt((x1 - x0) * (y1 - y0));
      break;
    }
    case NormalizationRule::Kind::explicit_value:
      d = rule.value;
      break;
  }
  if (!(d > 0.0) || !std::isfinite(d)) throw InvalidInput("normalizer must be strictly positive");
  return d;
}

double nme(const FaceShape& pred, const FaceShape& gt, const NormalizationRule& rule) {
  if (pred.size() != gt.size())
    throw InvalidInput("nme: prediction has " + std::to_string(pred.size()) + " landmarks, ground truth " +
                       std::to_string(gt.size()));
  const double norm = normalizer(gt, rule);
  double sum = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) sum += std::hypot(pred[i].x - gt[i].x, pred[i].y - gt[i].y);
  return sum / static_cast<double>(gt.size()) / norm;
}

std::vector<CedPoint> ced(std::span<const double> errors, std::span<const double> thresholds) {
  if (errors.empty()) throw InvalidInput("ced: no errors");
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<CedPoint> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    const auto n = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    out.push_back({t, static_cast<double>(n) / static_cast<double>(sorted.size())});
  }
  return out;
}

std::vector<double> threshold_grid(double max, std::size_t count) {
  if (count == 0 || !(max > 0.0)) throw InvalidInput("threshold grid needs count > 0 and max > 0");
  std::vector<double> t(count + 1);
  for (std::size_t i = 0; i <= count; ++i) t[i] = max * static_cast<double>(i) / static_cast<double>(count);
  return t;
}

double failure_rate(std::span<const double> errors, double threshold) {
  if (errors.empty()) throw InvalidInput("failure_rate: no errors");
  const auto n = std::count_if(errors.begin(), errors.end(), [&](double e) { return e > threshold; });
  return static_cast<double>(n) / static_cast<double>(errors.size());
}

double mean(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("mean of an empty list");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

std::string format_double(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace {

std::vector<std::vector<std::string>> read_csv(const fs::path& path, std::string_view header) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != header) throw ParseError("expected header '" + std::string(header) + "'", 1);
  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 2) throw ParseError("expected 2 columns", line_no);
    rows.push_back(std::move(cells));
  }
  return rows;
}

double to_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw InvalidInput("malformed number '" + s + "'");
  return v;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << text;
}

}  // namespace

void write_report_csv(const fs::path& path, std::span<const std::string> ids, std::span<const double> errors) {
  if (ids.size() != errors.size()) throw InvalidInput("report: ids and errors differ in length");
  std::string text = "id,nme\n";
  for (std::size_t i = 0; i < ids.size(); ++i) text += ids[i] + "," + format_double(errors[i]) + "\n";
  write_text(path, text);
}

std::vector<std::pair<std::string, double>> read_report_csv(const fs::path& path) {
  std::vector<std::pair<std::string, double>> out;
  for (auto& r : read_csv(path, "id,nme")) out.emplace_back(r[0], to_double(r[1]));
  return out;
}

void write_ced_csv(const fs::path& path, std::span<const CedPoint> curve) {
  std::string text = "threshold,fraction\n";
  for (const auto& p : curve) text += format_double(p.threshold) + "," + format_double(p.fraction) + "\n";
  write_text(path, text);
}

std::vector<CedPoint> read_ced_csv(const fs::path& path) {
  std::vector<CedPoint> out;
  for (auto& r : read_csv(path, "threshold,fraction")) out.push_back({to_double(r[0]), to_double(r[1])});
  if (out.empty()) throw InvalidInput("empty CED file " + path.string());
  return out;
}

std::string ced_svg(std::span<const std::pair<std::string, std::vector<CedPoint>>> curves) {
  constexpr double W = 480, H = 360, L = 50, R = 130, T = 20, B = 40;
  double tmax = 0.0;
  for (const auto& [name, c] : curves)
    for (const auto& p : c) tmax = std::max(tmax, p.threshold);
  if (tmax <= 0.0) tmax = 1.0;
  static constexpr const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  auto sx = [&](double t) { return L + (W - L - R) * t / tmax; };
  auto sy = [&](double f) { return H - B - (H - T - B) * f; };
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n"
    << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 8 << "\" text-anchor=\"middle\" font-size=\"12\">NME</text>\n"
    << "<text x=\"12\" y=\"" << (T + H - B) / 2 << "\" font-size=\"12\" transform=\"rotate(-90 12 "
    << (T + H - B) / 2 << ")\" text-anchor=\"middle\">fraction of images</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double f = i / 4.0, t = tmax * i / 4.0;
    s << "<text x=\"" << L - 6 << "\" y=\"" << sy(f) + 4 << "\" text-anchor=\"end\" font-size=\"10\">" << f
      << "</text>\n"
      << "<text x=\"" << sx(t) << "\" y=\"" << H - B + 14 << "\" text-anchor=\"middle\" font-size=\"10\">"
      << std::setprecision(3) << t << std::setprecision(2) << "</text>\n";
  }
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const auto& [name, c] = curves[k];
    const char* col = colors[k % std::size(colors)];
    s << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : c) s << sx(p.threshold) << "," << sy(p.fraction) << " ";
    s << "\"/>\n"
      << "<text x=\"" << W - R + 8 << "\" y=\"" << T + 14 + 16.0 * k << "\" font-size=\"11\" fill=\"" << col
      << "\">" << name << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace srn
