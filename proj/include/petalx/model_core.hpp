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

// SCORE2 10-year cardiovascular risk: patient records, validity ranges,
// coefficient bundles loaded from TOML, and model evaluation.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "petalx/error.hpp"
#include "toml.hpp"

namespace petalx {

enum class Sex { kMale, kFemale };

enum class RiskRegion { kLow, kModerate, kHigh, kVeryHigh };

inline constexpr std::array<Sex, 2> kAllSexes = {Sex::kMale, Sex::kFemale};
inline constexpr std::array<RiskRegion, 4> kAllRegions = {RiskRegion::kLow, RiskRegion::kModerate,
                                                          RiskRegion::kHigh, RiskRegion::kVeryHigh};

inline std::string_view to_string(Sex sex) { return sex == Sex::kMale ? "male" : "female"; }

inline std::string_view to_string(RiskRegion region) {
  switch (region) {
    case RiskRegion::kLow:
      return "low";
    case RiskRegion::kModerate:
      return "moderate";
    case RiskRegion::kHigh:
      return "high";
    case RiskRegion::kVeryHigh:
      return "very_high";
  }
  return "moderate";
}

// Accepts "male"/"female", "m"/"f" and the Framingham codes "1"/"2".
inline Sex parse_sex(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "male" || s == "m" || s == "1") return Sex::kMale;
  if (s == "female" || s == "f" || s == "2") return Sex::kFemale;
  throw ParseError("unknown sex '" + std::string(text) + "'");
}

inline RiskRegion parse_region(std::string_view text) {
  for (RiskRegion r : kAllRegions) {
    if (to_string(r) == text) return r;
  }
  if (text == "very-high" || text == "veryhigh") return RiskRegion::kVeryHigh;
  throw ParseError("unknown risk region '" + std::string(text) + "'");
}

struct PatientRecord {
  double age = 0.0;  // years
  Sex sex = Sex::kMale;
  bool smoking = false;
  double sbp = 0.0;         // mmHg
  double total_chol = 0.0;  // mmol/L
  double hdl_chol = 0.0;    // mmol/L

  friend bool operator==(const PatientRecord&, const PatientRecord&) = default;
};

enum class FactorId { kAge, kSbp, kNonHdl, kTotalChol, kHdlChol };

inline std::string_view to_string(FactorId id) {
  switch (id) {
    case FactorId::kAge:
      return "age";
    case FactorId::kSbp:
      return "sbp";
    case FactorId::kNonHdl:
      return "non_hdl";
    case FactorId::kTotalChol:
      return "total_chol";
    case FactorId::kHdlChol:
      return "hdl_chol";
  }
  return "age";
}

struct FactorRange {
  FactorId factor_id;
  double min;
  double max;

  double width() const { return max - min; }
  bool contains(double x) const { return x >= min && x <= max; }
  double clamp(double x) const { return std::clamp(x, min, max); }
};

// Validity envelope of the model. The canonical table mirrors the ranges of
// the ESC score charts, with the minimum age raised from 40 to 45.
struct FactorRanges {
  FactorRange age{FactorId::kAge, 45.0, 70.0};
  FactorRange sbp{FactorId::kSbp, 100.0, 180.0};
  FactorRange non_hdl{FactorId::kNonHdl, 3.0, 7.0};
  FactorRange total_chol{FactorId::kTotalChol, 3.0, 9.0};
  FactorRange hdl_chol{FactorId::kHdlChol, 0.7, 2.5};

  static const FactorRanges& canonical() {
    static const FactorRanges ranges{};
    return ranges;
  }

  std::array<FactorRange, 5> all() const { return {age, sbp, non_hdl, total_chol, hdl_chol}; }
};

// Non-HDL cholesterol, the single lipid treatment target.
// Differences within 1e-12 of a multiple of 1e-9 mmol/L are snapped to it,
// so that e.g. 4.6 - 1.6 lands on 3.0 and not just below the range minimum.
inline double non_hdl(double total_chol, double hdl_chol) {
  double value = total_chol - hdl_chol;
  const double grid = std::round(value * 1e9) / 1e9;
  if (std::abs(value - grid) < 1e-12) value = grid;
  if (!(value > 0.0)) {
    throw ValidationError("hdl_chol", "HDL cholesterol must be below total cholesterol");
  }
  return value;
}

namespace detail {

inline void check_in_range(const FactorRange& range, double value) {
  if (!std::isfinite(value) || !range.contains(value)) {
    std::ostringstream msg;
    msg << to_string(range.factor_id) << " = " << value << " is outside the valid range ["
        << range.min << ", " << range.max << "]";
    throw ValidationError(std::string(to_string(range.factor_id)), msg.str());
  }
}

}  // namespace detail

// Throws ValidationError naming the first offending field.
inline void validate_patient(const PatientRecord& p,
                             const FactorRanges& ranges = FactorRanges::canonical()) {
  detail::check_in_range(ranges.age, p.age);
  detail::check_in_range(ranges.sbp, p.sbp);
  detail::check_in_range(ranges.total_chol, p.total_chol);
  detail::check_in_range(ranges.hdl_chol, p.hdl_chol);
  detail::check_in_range(ranges.non_hdl, non_hdl(p.total_chol, p.hdl_chol));
}

struct ClampResult {
  PatientRecord patient;
  std::vector<std::string> clamped_fields;

  bool clamped() const { return !clamped_fields.empty(); }
};

// Pulls every continuous factor into its range. Non-HDL is fixed last by
// moving total cholesterol (HDL is kept), then HDL if total hits its bound.
inline ClampResult clamp_patient(const PatientRecord& p,
                                 const FactorRanges& ranges = FactorRanges::canonical()) {
  ClampResult out{p, {}};
  auto clamp_field = [&](const FactorRange& range, double& value) {
    const double c = std::isfinite(value) ? range.clamp(value) : range.min;
    if (c != value) {
      value = c;
      out.clamped_fields.emplace_back(to_string(range.factor_id));
    }
  };
  PatientRecord& q = out.patient;
  clamp_field(ranges.age, q.age);
  clamp_field(ranges.sbp, q.sbp);
  clamp_field(ranges.total_chol, q.total_chol);
  clamp_field(ranges.hdl_chol, q.hdl_chol);
  const double nh = q.total_chol - q.hdl_chol;
  const double nh_clamped = ranges.non_hdl.clamp(nh);
  if (nh != nh_clamped) {
    out.clamped_fields.emplace_back(to_string(FactorId::kNonHdl));
    q.total_chol = ranges.total_chol.clamp(q.hdl_chol + nh_clamped);
    q.hdl_chol = q.total_chol - nh_clamped;
  }
  return out;
}

// Coefficients of one (sex, region) SCORE2 model. Each term contributes
// beta * (x - center) / scale.
struct Score2Coefficients {
  double s1 = 0.0;
  double s2 = 1.0;
  double baseline_survival = 0.0;  // lambda
  std::map<std::string, double> betas;
  std::map<std::string, double> centers;
  std::map<std::string, double> scales;

  double scale(const std::string& term) const {
    auto it = scales.find(term);
    return it == scales.end() ? 1.0 : it->second;
  }
};

class Score2Bundle {
 public:
  Score2Bundle() = default;
  Score2Bundle(std::string provenance, std::string version,
               std::map<std::pair<Sex, RiskRegion>, Score2Coefficients> models)
      : provenance_(std::move(provenance)),
        version_(std::move(version)),
        models_(std::move(models)) {}

  const std::string& provenance() const { return provenance_; }
  const std::string& version() const { return version_; }

  bool covers(Sex sex, RiskRegion region) const { return models_.count({sex, region}) > 0; }

  const Score2Coefficients& at(Sex sex, RiskRegion region) const {
    auto it = models_.find({sex, region});
    if (it == models_.end()) {
      throw ModelError("coefficient bundle has no model for " + std::string(to_string(sex)) + "." +
                       std::string(to_string(region)));
    }
    return it->second;
  }

  const std::map<std::pair<Sex, RiskRegion>, Score2Coefficients>& models() const { return models_; }

 private:
  std::string provenance_;
  std::string version_;
  std::map<std::pair<Sex, RiskRegion>, Score2Coefficients> models_;
};

namespace detail {

inline constexpr std::string_view kInteractionSuffix = "_x_age";
inline constexpr std::string_view kAgeTerm = "cage";

// Raw patient value behind a main-effect term, or false if the name is unknown.
inline bool term_variable(std::string_view term, const PatientRecord& p, double& value) {
  if (term == "cage") {
    value = p.age;
  } else if (term == "smoking") {
    value = p.smoking ? 1.0 : 0.0;
  } else if (term == "csbp") {
    value = p.sbp;
  } else if (term == "ctchol") {
    value = p.total_chol;
  } else if (term == "chdl") {
    value = p.hdl_chol;
  } else {
    return false;
  }
  return true;
}

inline bool is_known_term(std::string_view term) {
  PatientRecord dummy;
  double v = 0.0;
  if (term.size() > kInteractionSuffix.size() &&
      term.substr(term.size() - kInteractionSuffix.size()) == kInteractionSuffix) {
    term.remove_suffix(kInteractionSuffix.size());
    return term != kAgeTerm && term_variable(term, dummy, v);
  }
  return term_variable(term, dummy, v);
}

inline std::string_view interaction_base(std::string_view term) {
  if (term.size() > kInteractionSuffix.size() &&
      term.substr(term.size() - kInteractionSuffix.size()) == kInteractionSuffix) {
    return term.substr(0, term.size() - kInteractionSuffix.size());
  }
  return {};
}

inline double transformed(const Score2Coefficients& c, const std::string& term,
                          const PatientRecord& p) {
  double x = 0.0;
  term_variable(term, p, x);
  auto center = c.centers.find(term);
  if (center == c.centers.end()) {
    throw ModelError("missing center for term '" + term + "'");
  }
  return (x - center->second) / c.scale(term);
}

inline void validate_coefficients(const Score2Coefficients& c, const std::string& where) {
  if (!(c.baseline_survival > 0.0 && c.baseline_survival < 1.0)) {
    std::ostringstream msg;
    msg << where << ".lambda = " << c.baseline_survival << " must lie strictly inside (0, 1)";
    throw ValidationError(where + ".lambda", msg.str());
  }
  if (!(c.s2 > 0.0)) {
    throw ValidationError(where + ".s2", where + ".s2 must be positive");
  }
  for (const auto& [term, beta] : c.betas) {
    if (!is_known_term(term)) {
      throw ParseError(where + ".betas: unknown term '" + term + "'");
    }
    if (!c.centers.count(term)) {
      throw ModelError(where + ".centers: missing term '" + term + "'");
    }
    if (!std::isfinite(beta)) {
      throw ValidationError(where + ".betas." + term, "non-finite coefficient");
    }
    const std::string_view base = interaction_base(term);
    if (!base.empty()) {
      for (std::string_view needed : {base, kAgeTerm}) {
        if (!c.centers.count(std::string(needed))) {
          throw ModelError(where + ": interaction '" + term + "' needs a center for '" +
                           std::string(needed) + "'");
        }
      }
    }
  }
  for (const auto& [term, center] : c.centers) {
    if (!c.betas.count(term)) {
      throw ModelError(where + ".betas: missing term '" + term + "'");
    }
  }
  for (const auto& [term, scale] : c.scales) {
    if (!c.betas.count(term)) {
      throw ParseError(where + ".scales: unknown term '" + term + "'");
    }
    if (!(scale > 0.0)) {
      throw ValidationError(where + ".scales." + term, "scale must be positive");
    }
  }
}

inline double require_number(const toml::table& t, std::string_view key, const std::string& where) {
  const toml::node* node = t.get(key);
  if (node == nullptr) {
    throw ModelError(where + ": missing key '" + std::string(key) + "'");
  }
  auto value = node->value<double>();
  if (!value) {
    throw ParseError(where + "." + std::string(key) + " is not a number");
  }
  return *value;
}

inline std::map<std::string, double> number_table(const toml::table& t, std::string_view key,
                                                  const std::string& where, bool required) {
  std::map<std::string, double> out;
  const toml::node* node = t.get(key);
  if (node == nullptr) {
    if (required) {
      throw ModelError(where + ": missing table '" + std::string(key) + "'");
    }
    return out;
  }
  const toml::table* table = node->as_table();
  if (table == nullptr) {
    throw ParseError(where + "." + std::string(key) + " is not a table");
  }
  for (const auto& [name, value] : *table) {
    auto number = value.value<double>();
    if (!number) {
      throw ParseError(where + "." + std::string(key) + "." + std::string(name.str()) +
                       " is not a number");
    }
    out.emplace(std::string(name.str()), *number);
  }
  return out;
}

inline toml::table parse_toml(std::string_view text, std::string_view source) {
  try {
    return toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "cannot parse " << source << ": " << e.description() << " (line "
        << e.source().begin.line << ")";
    throw ParseError(msg.str());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string require_provenance(const toml::table& root, std::string_view source) {
  auto provenance = root["provenance"].value<std::string>();
  if (!provenance || provenance->empty()) {
    throw ParseError(std::string(source) + ": mandatory 'provenance' string is missing");
  }
  return *provenance;
}

}  // namespace detail

// Parses a coefficient file. Sections are `[<sex>.<region>]` with keys `s1`,
// `s2`, `lambda` and sub-tables `betas`, `centers` and optional `scales`.
inline Score2Bundle load_coefficient_bundle(std::string_view text,
                                            std::string_view source = "coefficients") {
  const toml::table root = detail::parse_toml(text, source);
  std::string provenance = detail::require_provenance(root, source);
  std::string version = root["version"].value_or(std::string{});

  std::map<std::pair<Sex, RiskRegion>, Score2Coefficients> models;
  for (const auto& [sex_key, sex_node] : root) {
    const std::string sex_name(sex_key.str());
    if (sex_name == "provenance" || sex_name == "version") continue;
    const toml::table* sex_table = sex_node.as_table();
    if (sex_table == nullptr) {
      throw ParseError(std::string(source) + ": unexpected top-level key '" + sex_name + "'");
    }
    const Sex sex = parse_sex(sex_name);
    for (const auto& [region_key, region_node] : *sex_table) {
      const std::string where = sex_name + "." + std::string(region_key.str());
      const RiskRegion region = parse_region(region_key.str());
      const toml::table* t = region_node.as_table();
      if (t == nullptr) throw ParseError(where + " is not a table");
      Score2Coefficients c;
      c.s1 = detail::require_number(*t, "s1", where);
      c.s2 = detail::require_number(*t, "s2", where);
      c.baseline_survival = detail::require_number(*t, "lambda", where);
      c.betas = detail::number_table(*t, "betas", where, true);
      c.centers = detail::number_table(*t, "centers", where, true);
      c.scales = detail::number_table(*t, "scales", where, false);
      detail::validate_coefficients(c, where);
      models.emplace(std::make_pair(sex, region), std::move(c));
    }
  }
  for (Sex sex : kAllSexes) {
    if (!models.count({sex, RiskRegion::kModerate})) {
      throw ModelError(std::string(source) + ": no moderate-region model for " +
                       std::string(to_string(sex)));
    }
  }
  return Score2Bundle(std::move(provenance), std::move(version), std::move(models));
}

inline Score2Bundle load_coefficient_bundle_file(const std::string& path) {
  return load_coefficient_bundle(detail::read_file(path), path);
}

// Sum of beta * (x - x_cen) over every term of the (sex, region) model.
inline double linear_predictor(const PatientRecord& patient, const Score2Bundle& bundle,
                               RiskRegion region) {
  const Score2Coefficients& c = bundle.at(patient.sex, region);
  double lp = 0.0;
  for (const auto& [term, beta] : c.betas) {
    const std::string_view base = detail::interaction_base(term);
    double x = 0.0;
    if (base.empty()) {
      x = detail::transformed(c, term, patient);
    } else {
      const double product = detail::transformed(c, std::string(base), patient) *
                             detail::transformed(c, std::string(detail::kAgeTerm), patient);
      x = (product - c.centers.at(term)) / c.scale(term);
    }
    lp += beta * x;
  }
  return lp;
}

// Recalibrated risk for a given linear predictor:
// 1 - exp(-exp(s1 + s2 * ln(-ln(lambda^exp(lp))))).
// ln(-ln(lambda^exp(lp))) is evaluated as lp + ln(-ln(lambda)).
inline double score2_from_linear_predictor(double lp, const Score2Coefficients& c) {
  const double log_cum_hazard = lp + std::log(-std::log(c.baseline_survival));
  return -std::expm1(-std::exp(c.s1 + c.s2 * log_cum_hazard));
}

// 10-year risk as a fraction in (0, 1).
inline double evaluate_score2(const PatientRecord& patient, const Score2Bundle& bundle,
                              RiskRegion region) {
  return score2_from_linear_predictor(linear_predictor(patient, bundle, region),
                                      bundle.at(patient.sex, region));
}

// Region from the age-standardized CVD mortality rate per 100,000. Bands are
// right-open: [0,100) low, [100,150) moderate, [150,300) high, else very high.
inline RiskRegion region_from_mortality(double deaths_per_100k) {
  if (deaths_per_100k < 100.0) return RiskRegion::kLow;
  if (deaths_per_100k < 150.0) return RiskRegion::kModerate;
  if (deaths_per_100k < 300.0) return RiskRegion::kHigh;
  return RiskRegion::kVeryHigh;
}

}  // namespace petalx
