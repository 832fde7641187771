/*
 * Copyright 2026 The Petal-X Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// SVG output for Petal-X flowers and graphical score charts.
//
// Element ids: petal-<factor>, grid-<factor>-<level>, label-<factor>,
// legend-color, legend-lobe, overlay, and for charts
// gsc-cell-<smoking>-<age bin>-<sbp bin>-<non-HDL bin>.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "petalx/error.hpp"
#include "petalx/geometry.hpp"
#include "petalx/model_core.hpp"
#include "petalx/surrogate.hpp"

namespace petalx {

enum class RiskColorClass { kGreen, kOrange, kRed };

inline std::string_view to_string(RiskColorClass c) {
  switch (c) {
    case RiskColorClass::kGreen:
      return "green";
    case RiskColorClass::kOrange:
      return "orange";
    case RiskColorClass::kRed:
      return "red";
  }
  return "green";
}

// Risks in [lower, upper) are orange, risks >= upper red; ages in
// [min_age, max_age).
struct ColorBand {
  double min_age = 0.0;
  double max_age = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct ColorThresholds {
  std::string provenance;
  std::vector<ColorBand> bands;

  const ColorBand& band_for(double age) const {
    for (const ColorBand& b : bands) {
      if (age >= b.min_age && age < b.max_age) return b;
    }
    std::ostringstream msg;
    msg << "age " << age << " is outside the configured color bands";
    throw ValidationError("age", msg.str());
  }
};

inline ColorThresholds load_color_thresholds(std::string_view text,
                                             std::string_view source = "color thresholds") {
  const toml::table root = detail::parse_toml(text, source);
  ColorThresholds out;
  out.provenance = detail::require_provenance(root, source);
  const toml::array* bands = root["band"].as_array();
  if (bands == nullptr || bands->empty()) {
    throw ParseError(std::string(source) + ": no [[band]] entries");
  }
  for (const toml::node& node : *bands) {
    const toml::table* t = node.as_table();
    if (t == nullptr) throw ParseError(std::string(source) + ": band is not a table");
    const std::string where = std::string(source) + ".band";
    ColorBand b{
        detail::require_number(*t, "min_age", where), detail::require_number(*t, "max_age", where),
        detail::require_number(*t, "lower", where), detail::require_number(*t, "upper", where)};
    if (!(b.min_age < b.max_age) || !(0.0 < b.lower && b.lower < b.upper && b.upper < 1.0)) {
      throw ValidationError("band", where + ": thresholds must be strictly increasing");
    }
    out.bands.push_back(b);
  }
  return out;
}

inline ColorThresholds load_color_thresholds_file(const std::string& path) {
  return load_color_thresholds(detail::read_file(path), path);
}

inline RiskColorClass risk_color(double risk, double age, const ColorThresholds& thresholds) {
  const ColorBand& band = thresholds.band_for(age);
  if (risk >= band.upper) return RiskColorClass::kRed;
  if (risk >= band.lower) return RiskColorClass::kOrange;
  return RiskColorClass::kGreen;
}

inline std::string_view color_hex(RiskColorClass c) {
  switch (c) {
    case RiskColorClass::kGreen:
      return "#3f9b4a";
    case RiskColorClass::kOrange:
      return "#f0a030";
    case RiskColorClass::kRed:
      return "#cc2936";
  }
  return "#3f9b4a";
}

struct RenderLabels {
  std::array<std::string, kNumFactors> factor_names = {"Age", "Systolic BP", "Smoking",
                                                       "Non-HDL cholesterol"};
  std::array<std::string, kNumFactors> units = {"years", "mmHg", "", "mmol/L"};
  std::string yes = "Yes";
  std::string no = "No";
  std::string title = "10-year CVD risk explanation";
  std::string green = "Low-to-moderate risk (treatment not recommended)";
  std::string orange = "High risk (treatment to be considered)";
  std::string red = "Very high risk (treatment recommended)";
  std::string lobe_legend = "Risk of one lobe";
  std::string total_risk = "10-year CVD risk";
  std::string non_smoking = "Non-smoking";
  std::string smoking = "Smoking";
  std::string gsc_title = "SCORE2 10-year CVD risk chart";
  std::string gsc_row_axis = "Age / SBP (mmHg)";
};

struct RenderOptions {
  int width = 600;
  int height = 600;
  double flower_radius = 170.0;  // pixels for a petal of length 1
  ColorThresholds color_thresholds;
  bool show_numeric_overlay = false;
  std::vector<double> grid_levels = {0.0, 0.25, 0.5, 0.75, 1.0};
  int samples_per_lobe = 128;
  RenderLabels labels;
};

inline void validate(const RenderOptions& o) {
  if (o.width <= 0 || o.height <= 0 || !(o.flower_radius > 0.0)) {
    throw ValidationError("canvas", "canvas size and flower radius must be positive");
  }
  for (std::size_t i = 0; i < o.grid_levels.size(); ++i) {
    const double l = o.grid_levels[i];
    if (!(l >= 0.0 && l <= 1.0) || (i > 0 && !(l > o.grid_levels[i - 1]))) {
      throw ValidationError("grid_levels", "grid levels must be increasing within [0, 1]");
    }
  }
}

namespace detail {

inline std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  std::string s(buf);
  return s == "-0.000" ? "0.000" : s;
}

inline std::string coord(double v) { return fmt("%.3f", v); }

// Shortest of %.0f/%.1f/%.2f that represents v to two decimals.
inline std::string trim_number(double v) {
  std::string s = fmt("%.2f", v);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s == "-0" ? "0" : s;
}

inline std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

inline std::string percent(double risk) { return fmt("%.1f", 100.0 * risk) + "%"; }

inline std::string level_id(double level) { return trim_number(level); }

struct Canvas {
  double cx;
  double cy;
  double scale;

  double x(const Point& p) const { return cx + p.x * scale; }
  double y(const Point& p) const { return cy - p.y * scale; }
};

inline std::string path_data(std::span<const Point> pts, const Canvas& c, bool close) {
  std::string d;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    d += (i == 0 ? "M" : " L");
    d += coord(c.x(pts[i])) + " " + coord(c.y(pts[i]));
  }
  if (close) d += " Z";
  return d;
}

inline std::size_t factor_index(const std::string& id) {
  const auto& names = factor_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == id) return i;
  }
  throw ValidationError("factor_id", "unknown factor '" + id + "'");
}

inline std::string factor_value_text(std::size_t factor, const PatientRecord& p,
                                     const RenderLabels& labels) {
  switch (factor) {
    case 0:
      return trim_number(p.age) + " " + labels.units[0];
    case 1:
      return trim_number(p.sbp) + " " + labels.units[1];
    case 2:
      return p.smoking ? labels.yes : labels.no;
    default:
      return trim_number(non_hdl(p.total_chol, p.hdl_chol)) + " " + labels.units[3];
  }
}

inline double denormalized_level(std::size_t factor, double level, const FactorRanges& r) {
  switch (factor) {
    case 0:
      return r.age.min + level * r.age.width();
    case 1:
      return r.sbp.min + level * r.sbp.width();
    case 2:
      return level;
    default:
      return r.non_hdl.min + level * r.non_hdl.width();
  }
}

inline void check_layout_matches(const FlowerLayout& layout, const SurrogateModel& model) {
  if (layout.petals.size() != kNumFactors) {
    throw ValidationError("layout", "layout must have one petal per surrogate factor");
  }
  std::array<bool, kNumFactors> seen{};
  for (const FlowerPetal& p : layout.petals) {
    const std::size_t i = factor_index(p.factor_id);
    if (seen[i]) throw ValidationError("layout", "duplicate petal '" + p.factor_id + "'");
    seen[i] = true;
    if (!model.etas.empty() &&
        (model.total_lobes != layout.total_lobes || model.etas[i] != p.eta)) {
      throw ValidationError("layout", "layout lobes do not match the surrogate model");
    }
  }
}

}  // namespace detail

// Flower of a quantized surrogate for one patient: lobes from the model,
// petal lengths sqrt(z).
inline FlowerLayout flower_for(const SurrogateModel& quantized, const PatientRecord& patient,
                               FlowerOptions options = {},
                               const FactorRanges& ranges = FactorRanges::canonical()) {
  if (quantized.etas.size() != kNumFactors || quantized.total_lobes <= 0) {
    throw ModelError("flower_for needs a quantized surrogate model");
  }
  std::vector<double> weights(quantized.etas.begin(), quantized.etas.end());
  const FactorVector z = normalize(patient, ranges).values();
  options.total_lobes = quantized.total_lobes;
  FlowerLayout layout = build_flower(weights, z, factor_names(), options);
  for (const FlowerPetal& p : layout.petals) {
    if (p.eta != quantized.etas[detail::factor_index(p.factor_id)]) {
      throw ModelError("lobe allocation does not reproduce the quantized model");
    }
  }
  return layout;
}

// Petal-X flower for `patient`. `model` is the quantized surrogate the layout
// encodes; `risk` picks the flower color and feeds the optional overlay.
inline std::string render_petalx_svg(const FlowerLayout& layout, const PatientRecord& patient,
                                     const SurrogateModel& model, double risk,
                                     const RenderOptions& options,
                                     const FactorRanges& ranges = FactorRanges::canonical()) {
  validate(options);
  detail::check_layout_matches(layout, model);
  const RenderLabels& L = options.labels;
  const double R = options.flower_radius;
  const detail::Canvas canvas{options.width / 2.0, options.height / 2.0, R};
  const RiskColorClass color = risk_color(risk, patient.age, options.color_thresholds);
  const NormalizedFactors z = normalize(patient, ranges);

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << options.width
      << "\" height=\"" << options.height << "\" viewBox=\"0 0 " << options.width << " "
      << options.height << "\" font-family=\"sans-serif\">\n"
      << "<title>" << detail::xml_escape(L.title) << "</title>\n";

  // Grid: one petal-shaped line per level, drawn under the petals.
  svg << "<g id=\"grid\" fill=\"none\" stroke=\"#8c8c8c\" stroke-width=\"1\" "
         "stroke-dasharray=\"2,3\">\n";
  for (const FlowerPetal& petal : layout.petals) {
    const std::size_t f = detail::factor_index(petal.factor_id);
    svg << "<g id=\"grid-" << petal.factor_id << "\">\n";
    std::vector<double> levels = options.grid_levels;
    if (f == 2) levels = {0.0, 1.0};
    const double mid = petal.start_angle + 0.5 * petal.gamma;
    for (double level : levels) {
      const double a = std::sqrt(level);
      std::vector<Point> pts;
      if (petal.eta > 0 && a > 0.0) {
        pts = sample_outline(layout, petal, options.samples_per_lobe, a);
        pts = std::vector<Point>(pts.begin() + 1, pts.end() - 1);
      } else {
        pts = {Point{0.0, 0.0}};
      }
      const double value = detail::denormalized_level(f, level, ranges);
      svg << "<path id=\"grid-" << petal.factor_id << "-" << detail::level_id(level)
          << "\" class=\"grid-line\" data-level=\"" << detail::trim_number(level) << "\" d=\""
          << detail::path_data(pts, canvas, false) << "\"/>\n";
      const Point at = polar_to_point(a, mid, layout.winding);
      const std::string text = f == 2 ? (level > 0.5 ? L.yes : L.no) : detail::trim_number(value);
      svg << "<text class=\"grid-label\" data-factor=\"" << petal.factor_id << "\" data-level=\""
          << detail::trim_number(level) << "\" data-value=\"" << detail::fmt("%.17g", value)
          << "\" x=\"" << detail::coord(canvas.x(at)) << "\" y=\"" << detail::coord(canvas.y(at))
          << "\" font-size=\"9\" fill=\"#555555\" stroke=\"none\" "
          << "text-anchor=\"middle\">" << detail::xml_escape(text) << "</text>\n";
    }
    svg << "</g>\n";
  }
  svg << "</g>\n";

  svg << "<g id=\"petals\" fill=\"" << color_hex(color) << "\" fill-opacity=\"0.85\" "
      << "stroke=\"#333333\" stroke-width=\"1\" data-color-class=\"" << to_string(color) << "\">\n";
  for (const FlowerPetal& petal : layout.petals) {
    const auto pts = petal.eta > 0 ? sample_outline(layout, petal, options.samples_per_lobe)
                                   : std::vector<Point>{Point{0.0, 0.0}};
    svg << "<path id=\"petal-" << petal.factor_id << "\" class=\"petal\" data-lobes=\"" << petal.eta
        << "\" d=\"" << detail::path_data(pts, canvas, true) << "\"/>\n";
  }
  svg << "</g>\n";

  svg << "<g id=\"labels\" font-size=\"12\" fill=\"#222222\">\n";
  for (const FlowerPetal& petal : layout.petals) {
    const std::size_t f = detail::factor_index(petal.factor_id);
    const double mid = petal.start_angle + 0.5 * petal.gamma;
    const Point at = polar_to_point(1.0 + 24.0 / R, mid, layout.winding);
    const char* anchor = at.x > 0.15 ? "start" : (at.x < -0.15 ? "end" : "middle");
    svg << "<text id=\"label-" << petal.factor_id << "\" x=\"" << detail::coord(canvas.x(at))
        << "\" y=\"" << detail::coord(canvas.y(at)) << "\" text-anchor=\"" << anchor << "\">"
        << detail::xml_escape(L.factor_names[f]) << ": "
        << detail::xml_escape(detail::factor_value_text(f, patient, L)) << "</text>\n";
  }
  svg << "</g>\n";

  // Lobe legend: a single lobe at every grid level with the risk it carries.
  {
    double norm = 0.0;
    for (double a : model.alphas) norm += a;
    const double lobe_risk = norm / layout.total_lobes;
    const double legend_r = 84.0;
    const detail::Canvas lc{options.width - 80.0, 26.0 + legend_r, legend_r};
    FlowerLayout single;
    single.total_lobes = layout.total_lobes;
    single.kappa = layout.kappa;
    FlowerPetal lobe;
    lobe.eta = 1;
    lobe.gamma = single.lobe_angle();
    lobe.start_angle = -0.5 * lobe.gamma;
    svg << "<g id=\"legend-lobe\" font-size=\"9\" fill=\"#222222\">\n"
        << "<text x=\"" << detail::coord(lc.cx) << "\" y=\"14\" text-anchor=\"middle\">"
        << detail::xml_escape(L.lobe_legend) << "</text>\n";
    for (double level : options.grid_levels) {
      if (level <= 0.0) continue;
      const auto pts = sample_outline(single, lobe, 32, std::sqrt(level));
      svg << "<path d=\"" << detail::path_data(pts, lc, true)
          << "\" fill=\"none\" stroke=\"#8c8c8c\" stroke-dasharray=\"2,2\"/>\n";
      const Point top = polar_to_point(std::sqrt(level), 0.0, Winding::kClockwise);
      svg << "<text x=\"" << detail::coord(lc.cx + 24.0) << "\" y=\""
          << detail::coord(lc.y(top) + 3.0) << "\" text-anchor=\"start\">"
          << detail::percent(level * lobe_risk) << "</text>\n";
    }
    svg << "</g>\n";
  }

  {
    svg << "<g id=\"legend-color\" font-size=\"9\" fill=\"#222222\">\n";
    const RiskColorClass classes[] = {RiskColorClass::kRed, RiskColorClass::kOrange,
                                      RiskColorClass::kGreen};
    const std::string* texts[] = {&L.red, &L.orange, &L.green};
    for (int i = 0; i < 3; ++i) {
      const double y = options.height - 58.0 + 18.0 * i;
      svg << "<rect x=\"12\" y=\"" << detail::coord(y) << "\" width=\"10\" height=\"10\" fill=\""
          << color_hex(classes[i]) << "\"/>\n"
          << "<text x=\"26\" y=\"" << detail::coord(y + 9.0) << "\">"
          << detail::xml_escape(*texts[i]) << "</text>\n";
    }
    svg << "</g>\n";
  }

  if (options.show_numeric_overlay) {
    const FactorVector c = contributions(model, z);
    svg << "<g id=\"overlay\" font-size=\"11\" fill=\"#000000\">\n"
        << "<text x=\"" << detail::coord(canvas.cx) << "\" y=\"22\" text-anchor=\"middle\">"
        << detail::xml_escape(L.total_risk) << ": " << detail::percent(risk) << "</text>\n";
    for (const FlowerPetal& petal : layout.petals) {
      const std::size_t f = detail::factor_index(petal.factor_id);
      const Point at = polar_to_point(0.5 * std::max(petal.length, 0.3),
                                      petal.start_angle + 0.5 * petal.gamma, layout.winding);
      svg << "<text class=\"contribution\" data-factor=\"" << petal.factor_id << "\" x=\""
          << detail::coord(canvas.x(at)) << "\" y=\"" << detail::coord(canvas.y(at))
          << "\" text-anchor=\"middle\">+" << detail::percent(c[f]) << "</text>\n";
    }
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

// Score chart in the ESC layout: non-smoking and smoking panels, age blocks
// from oldest (top) to youngest, SBP rows from highest, non-HDL columns
// ascending. Cells show the midpoint risk in whole percents.
inline std::string render_gsc_svg(const Score2Bundle& bundle, RiskRegion region, Sex sex,
                                  const GscSpec& spec, const RenderOptions& options) {
  const auto age_bins = bins(spec.ranges.age, spec.age_width);
  const auto sbp_bins = bins(spec.ranges.sbp, spec.sbp_width);
  const auto nh_bins = bins(spec.ranges.non_hdl, spec.non_hdl_width);
  const RenderLabels& L = options.labels;
  const double cell_w = 30.0, cell_h = 18.0, block_gap = 8.0, panel_gap = 40.0;
  const double left = 110.0, top = 56.0;
  const double panel_w = cell_w * nh_bins.size();
  const double block_h = cell_h * sbp_bins.size();
  const double width = left + 2 * panel_w + panel_gap + 20.0;
  const double height = top + age_bins.size() * (block_h + block_gap) + 40.0;

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\""
      << detail::trim_number(width) << "\" height=\"" << detail::trim_number(height)
      << "\" viewBox=\"0 0 " << detail::trim_number(width) << " " << detail::trim_number(height)
      << "\" font-family=\"sans-serif\">\n"
      << "<title>" << detail::xml_escape(L.gsc_title) << " (" << to_string(sex) << ", "
      << to_string(region) << ")</title>\n";

  for (int smoking = 0; smoking < 2; ++smoking) {
    const double x0 = left + smoking * (panel_w + panel_gap);
    if (smoking == 0) {
      svg << "<text x=\"8\" y=\"" << detail::coord(top - 6.0) << "\" font-size=\"8\">"
          << detail::xml_escape(L.gsc_row_axis) << "</text>\n";
    }
    svg << "<g id=\"gsc-panel-" << smoking << "\" font-size=\"10\">\n"
        << "<text x=\"" << detail::coord(x0 + panel_w / 2) << "\" y=\"20\" text-anchor=\"middle\">"
        << detail::xml_escape(smoking ? L.smoking : L.non_smoking) << "</text>\n";
    for (std::size_t k = 0; k < nh_bins.size(); ++k) {
      svg << "<text x=\"" << detail::coord(x0 + (k + 0.5) * cell_w) << "\" y=\""
          << detail::coord(top - 6.0) << "\" text-anchor=\"middle\" font-size=\"8\">"
          << detail::trim_number(nh_bins[k].lower) << "</text>\n";
    }
    for (std::size_t ai = 0; ai < age_bins.size(); ++ai) {
      const std::size_t a = age_bins.size() - 1 - ai;
      const double by = top + ai * (block_h + block_gap);
      for (std::size_t si = 0; si < sbp_bins.size(); ++si) {
        const std::size_t s = sbp_bins.size() - 1 - si;
        for (std::size_t n = 0; n < nh_bins.size(); ++n) {
          PatientRecord mid;
          mid.sex = sex;
          mid.smoking = smoking == 1;
          mid.age = age_bins[a].midpoint();
          mid.sbp = sbp_bins[s].midpoint();
          mid.hdl_chol = spec.reference_hdl;
          mid.total_chol = spec.reference_hdl + nh_bins[n].midpoint();
          const double risk = evaluate_score2(mid, bundle, region);
          const RiskColorClass color = risk_color(risk, mid.age, options.color_thresholds);
          const double x = x0 + n * cell_w;
          const double y = by + si * cell_h;
          svg << "<g id=\"gsc-cell-" << smoking << "-" << a << "-" << s << "-" << n
              << "\" class=\"gsc-cell\" data-risk=\"" << detail::fmt("%.17g", risk) << "\">"
              << "<rect x=\"" << detail::coord(x) << "\" y=\"" << detail::coord(y) << "\" width=\""
              << detail::coord(cell_w) << "\" height=\"" << detail::coord(cell_h) << "\" fill=\""
              << color_hex(color) << "\" stroke=\"#ffffff\"/>"
              << "<text x=\"" << detail::coord(x + cell_w / 2) << "\" y=\""
              << detail::coord(y + cell_h - 5.0) << "\" text-anchor=\"middle\">"
              << static_cast<long>(std::lround(100.0 * risk)) << "</text></g>\n";
        }
        if (smoking == 0) {
          svg << "<text x=\"" << detail::coord(left - 6.0) << "\" y=\""
              << detail::coord(by + si * cell_h + cell_h - 5.0)
              << "\" text-anchor=\"end\" font-size=\"8\">" << detail::trim_number(sbp_bins[s].lower)
              << "-" << detail::trim_number(sbp_bins[s].upper) << "</text>\n";
        }
      }
      if (smoking == 0) {
        svg << "<text x=\"8\" y=\"" << detail::coord(by + block_h / 2 + 4.0) << "\">"
            << detail::trim_number(age_bins[a].lower) << "-"
            << detail::trim_number(age_bins[a].upper) << "</text>\n";
      }
    }
    svg << "<text x=\"" << detail::coord(x0 + panel_w / 2) << "\" y=\""
        << detail::coord(height - 18.0) << "\" text-anchor=\"middle\" font-size=\"8\">"
        << detail::xml_escape(L.factor_names[3]) << " (" << detail::xml_escape(L.units[3])
        << ")</text>\n";
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace petalx
