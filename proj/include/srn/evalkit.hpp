#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "srn/geometry.hpp"

namespace srn {

struct NormalizationRule {
  enum class Kind { inter_ocular, inter_pupil, bbox_geomean, explicit_value };
  Kind kind = Kind::inter_ocular;
  double value = 0.0;  // used by explicit_value

  static NormalizationRule inter_ocular() { return {Kind::inter_ocular, 0.0}; }
  static NormalizationRule inter_pupil() { return {Kind::inter_pupil, 0.0}; }
  static NormalizationRule bbox_geomean() { return {Kind::bbox_geomean, 0.0}; }
  static NormalizationRule explicit_value(double v) { return {Kind::explicit_value, v}; }
  // "interocular", "interpupil", "bbox", or a positive number.
  static NormalizationRule parse(const std::string& text);
};

// Normalizer resolved from the ground truth; throws InvalidInput unless strictly positive.
double normalizer(const FaceShape& gt, const NormalizationRule& rule);

double nme(const FaceShape& pred, const FaceShape& gt,
           const NormalizationRule& rule = NormalizationRule::inter_ocular());

struct CedPoint {
  double threshold;
  double fraction;
};

// Fraction of errors <= each threshold.
std::vector<CedPoint> ced(std::span<const double> errors, std::span<const double> thresholds);
// count + 1 evenly spaced thresholds in [0, max].
std::vector<double> threshold_grid(double max, std::size_t count);

// Fraction of errors strictly above the threshold.
double failure_rate(std::span<const double> errors, double threshold = 0.08);

double mean(std::span<const double> values);

// Shortest round-trip decimal form.
std::string format_double(double v);

// id,nme rows.
void write_report_csv(const std::filesystem::path& path, std::span<const std::string> ids,
                      std::span<const double> errors);
std::vector<std::pair<std::string, double>> read_report_csv(const std::filesystem::path& path);
void write_ced_csv(const std::filesystem::path& path, std::span<const CedPoint> curve);
std::vector<CedPoint> read_ced_csv(const std::filesystem::path& path);

// Plain SVG line plot of one or more named curves.
std::string ced_svg(std::span<const std::pair<std::string, std::vector<CedPoint>>> curves);

}  // namespace srn
