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

// Global linear surrogate of SCORE2 over four min-max normalized factors,
//   y = a_age z_age + a_sbp z_sbp + a_smoking z_smoking + a_nonhdl z_nonhdl,
// fitted without intercept. Also hosts the graphical score chart emulation
// and the treatment-goal what-if scenarios.

#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "petalx/error.hpp"
#include "petalx/geometry.hpp"
#include "petalx/model_core.hpp"

namespace petalx {

inline constexpr std::size_t kNumFactors = 4;
using FactorVector = std::array<double, kNumFactors>;

// Default petal order: age, SBP, smoking, non-HDL.
inline const std::array<std::string, kNumFactors>& factor_names() {
  static const std::array<std::string, kNumFactors> names = {"age", "sbp", "smoking", "nonhdl"};
  return names;
}

struct NormalizedFactors {
  double age = 0.0;
  double sbp = 0.0;
  double smoking = 0.0;
  double nonhdl = 0.0;

  FactorVector values() const { return {age, sbp, smoking, nonhdl}; }
  static NormalizedFactors from_values(const FactorVector& v) { return {v[0], v[1], v[2], v[3]}; }
};

struct RawFactors {
  double age = 0.0;
  double sbp = 0.0;
  bool smoking = false;
  double non_hdl = 0.0;
};

// z = (x - min) / (max - min); smoking maps to 0/1.
inline NormalizedFactors normalize(const PatientRecord& p,
                                   const FactorRanges& ranges = FactorRanges::canonical()) {
  auto scale = [](const FactorRange& r, double x) { return (x - r.min) / r.width(); };
  return {scale(ranges.age, p.age), scale(ranges.sbp, p.sbp), p.smoking ? 1.0 : 0.0,
          scale(ranges.non_hdl, non_hdl(p.total_chol, p.hdl_chol))};
}

inline RawFactors denormalize(const NormalizedFactors& z,
                              const FactorRanges& ranges = FactorRanges::canonical()) {
  auto unscale = [](const FactorRange& r, double v) { return r.min + v * r.width(); };
  return {unscale(ranges.age, z.age), unscale(ranges.sbp, z.sbp), z.smoking >= 0.5,
          unscale(ranges.non_hdl, z.nonhdl)};
}

enum class SurrogateProvenance { kFitted, kQuantized, kTranscribed };

inline std::string_view to_string(SurrogateProvenance p) {
  switch (p) {
    case SurrogateProvenance::kFitted:
      return "fitted";
    case SurrogateProvenance::kQuantized:
      return "quantized";
    case SurrogateProvenance::kTranscribed:
      return "transcribed";
  }
  return "fitted";
}

inline SurrogateProvenance parse_surrogate_provenance(std::string_view text) {
  for (auto p : {SurrogateProvenance::kFitted, SurrogateProvenance::kQuantized,
                 SurrogateProvenance::kTranscribed}) {
    if (to_string(p) == text) return p;
  }
  throw ParseError("unknown surrogate provenance '" + std::string(text) + "'");
}

struct SurrogateModel {
  Sex sex = Sex::kMale;
  FactorVector alphas{};  // age, sbp, smoking, nonhdl
  SurrogateProvenance provenance = SurrogateProvenance::kFitted;
  // Set for quantized models only.
  int total_lobes = 0;
  std::vector<int> etas;

  bool non_negative() const {
    for (double a : alphas) {
      if (!(a >= 0.0)) return false;
    }
    return true;
  }
};

// Plots need b_i >= 0; anything else is reported with the offending factor.
inline void require_plottable(const SurrogateModel& model) {
  for (std::size_t i = 0; i < kNumFactors; ++i) {
    if (!(model.alphas[i] >= 0.0)) {
      std::ostringstream msg;
      msg << "surrogate coefficient for '" << factor_names()[i] << "' is " << model.alphas[i]
          << "; Petal-X needs non-negative coefficients";
      throw ModelError(msg.str());
    }
  }
}

// Least squares without an intercept column, solved through the normal
// equations (Z^T Z) a = Z^T y after a rank check on Z.
inline SurrogateModel fit_no_intercept(std::span<const NormalizedFactors> design,
                                       std::span<const double> targets, Sex sex = Sex::kMale) {
  if (design.empty()) throw ModelError("cannot fit a surrogate to an empty design");
  if (design.size() != targets.size()) {
    throw ModelError("design and target lengths differ");
  }
  if (design.size() < kNumFactors) {
    throw ModelError("need at least 4 rows to fit 4 coefficients");
  }
  const auto rows = static_cast<Eigen::Index>(design.size());
  Eigen::MatrixXd z(rows, static_cast<Eigen::Index>(kNumFactors));
  Eigen::VectorXd y(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const FactorVector v = design[static_cast<std::size_t>(r)].values();
    for (std::size_t c = 0; c < kNumFactors; ++c) {
      z(r, static_cast<Eigen::Index>(c)) = v[c];
    }
    y(r) = targets[static_cast<std::size_t>(r)];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
  qr.setThreshold(1e-10);
  if (qr.rank() < static_cast<Eigen::Index>(kNumFactors)) {
    throw ModelError("design matrix is rank deficient (rank " + std::to_string(qr.rank()) +
                     " < 4)");
  }
  const Eigen::MatrixXd gram = z.transpose() * z;
  const Eigen::VectorXd rhs = z.transpose() * y;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success) {
    throw ModelError("normal equations could not be factorized");
  }
  const Eigen::VectorXd alpha = ldlt.solve(rhs);

  SurrogateModel model;
  model.sex = sex;
  model.provenance = SurrogateProvenance::kFitted;
  for (std::size_t c = 0; c < kNumFactors; ++c) {
    model.alphas[c] = alpha(static_cast<Eigen::Index>(c));
  }
  return model;
}

// Per-factor terms a_i z_i.
inline FactorVector contributions(const SurrogateModel& model, const NormalizedFactors& z) {
  const FactorVector v = z.values();
  FactorVector out{};
  for (std::size_t i = 0; i < kNumFactors; ++i) out[i] = model.alphas[i] * v[i];
  return out;
}

// Sum of contributions, accumulated in factor order so the two agree exactly.
inline double predict(const SurrogateModel& model, const NormalizedFactors& z) {
  double y = 0.0;
  for (double c : contributions(model, z)) y += c;
  return y;
}

// Lobe count for a model: `total_lobes`, or with `raise_until_all_present`
// the smallest N >= total_lobes giving every factor at least one lobe.
inline int choose_total_lobes(const SurrogateModel& model, int total_lobes,
                              bool raise_until_all_present) {
  require_plottable(model);
  if (!raise_until_all_present) return total_lobes;
  for (double a : model.alphas) {
    if (a == 0.0) {
      throw ModelError("a zero coefficient can never receive a lobe");
    }
  }
  constexpr int kMaxLobes = 1000;
  for (int n = total_lobes; n <= kMaxLobes; ++n) {
    const LobeAllocation alloc = hamilton_apportion(model.alphas, n);
    bool all_present = true;
    for (int eta : alloc.etas) all_present = all_present && eta > 0;
    if (all_present) return n;
  }
  throw ModelError("no lobe count up to 1000 gives every factor a lobe");
}

// The model encoded by a Petal-X plot with `total_lobes` lobes.
inline SurrogateModel quantize_surrogate(const SurrogateModel& model, int total_lobes) {
  require_plottable(model);
  const LobeAllocation alloc = hamilton_apportion(model.alphas, total_lobes);
  const std::vector<double> q = quantized_coefficients(model.alphas, alloc);
  SurrogateModel out;
  out.sex = model.sex;
  out.provenance = SurrogateProvenance::kQuantized;
  out.total_lobes = total_lobes;
  out.etas = alloc.etas;
  for (std::size_t i = 0; i < kNumFactors; ++i) out.alphas[i] = q[i];
  return out;
}

// ---------------------------------------------------------------------------
// Graphical score chart emulation.

struct GscSpec {
  FactorRanges ranges = FactorRanges::canonical();
  double age_width = 5.0;
  double sbp_width = 20.0;
  double non_hdl_width = 1.0;
  // The chart is indexed by non-HDL only; SCORE2 is evaluated with this HDL
  // and total = HDL + non-HDL.
  double reference_hdl = 1.5;
};

struct Bin {
  int index = 0;
  double lower = 0.0;
  double upper = 0.0;

  double midpoint() const { return 0.5 * (lower + upper); }
};

namespace detail {

inline int bin_count(const FactorRange& range, double width) {
  const double n = range.width() / width;
  const double rounded = std::round(n);
  if (!(width > 0.0) || std::abs(n - rounded) > 1e-9 || rounded < 1.0) {
    throw ValidationError(std::string(to_string(range.factor_id)),
                          "bin width does not tile the factor range");
  }
  return static_cast<int>(rounded);
}

}  // namespace detail

inline std::vector<Bin> bins(const FactorRange& range, double width) {
  const int n = detail::bin_count(range, width);
  std::vector<Bin> out;
  for (int i = 0; i < n; ++i) {
    out.push_back({i, range.min + i * width, i + 1 == n ? range.max : range.min + (i + 1) * width});
  }
  return out;
}

// Right-open bins, the last one closed at the range maximum.
inline Bin bin_of(const FactorRange& range, double width, double value) {
  if (!range.contains(value)) {
    std::ostringstream msg;
    msg << to_string(range.factor_id) << " = " << value << " lies outside the chart bins";
    throw ValidationError(std::string(to_string(range.factor_id)), msg.str());
  }
  const std::vector<Bin> all = bins(range, width);
  for (const Bin& b : all) {
    if (value < b.upper) return b;
  }
  return all.back();
}

// Patient at the midpoints of the chart cell containing `patient`.
inline PatientRecord gsc_cell_patient(const PatientRecord& patient, const GscSpec& spec) {
  PatientRecord mid = patient;
  mid.age = bin_of(spec.ranges.age, spec.age_width, patient.age).midpoint();
  mid.sbp = bin_of(spec.ranges.sbp, spec.sbp_width, patient.sbp).midpoint();
  const double nh =
      bin_of(spec.ranges.non_hdl, spec.non_hdl_width, non_hdl(patient.total_chol, patient.hdl_chol))
          .midpoint();
  mid.hdl_chol = spec.reference_hdl;
  mid.total_chol = spec.reference_hdl + nh;
  return mid;
}

// Chart cell risk: SCORE2 evaluated at the cell midpoints, smoking as given.
inline double gsc_surrogate(const PatientRecord& patient, const Score2Bundle& bundle,
                            RiskRegion region, const GscSpec& spec = {}) {
  return evaluate_score2(gsc_cell_patient(patient, spec), bundle, region);
}

// Cell values are shown as whole percents.
inline double round_to_percent(double risk) { return std::round(100.0 * risk) / 100.0; }

// ---------------------------------------------------------------------------
// What-if scenarios from the treatment goals.

enum class WhatIfKind { kSbpTo130, kSbpTo110, kStopSmoking, kNonHdlTo3_4 };

inline std::string_view to_string(WhatIfKind kind) {
  switch (kind) {
    case WhatIfKind::kSbpTo130:
      return "sbp_to_130";
    case WhatIfKind::kSbpTo110:
      return "sbp_to_110";
    case WhatIfKind::kStopSmoking:
      return "stop_smoking";
    case WhatIfKind::kNonHdlTo3_4:
      return "non_hdl_to_3_4";
  }
  return "";
}

inline WhatIfKind parse_whatif_kind(std::string_view text) {
  for (auto k : {WhatIfKind::kSbpTo130, WhatIfKind::kSbpTo110, WhatIfKind::kStopSmoking,
                 WhatIfKind::kNonHdlTo3_4}) {
    if (to_string(k) == text) return k;
  }
  throw ParseError("unknown scenario '" + std::string(text) + "'");
}

struct WhatIfScenario {
  WhatIfKind kind;
  std::string description;
  PatientRecord modified_patient;
};

inline constexpr double kNonHdlGoal = 3.4;

// The scenario applied to `patient`, or nullopt when its condition fails.
inline std::optional<WhatIfScenario> apply_scenario(const PatientRecord& patient, WhatIfKind kind) {
  PatientRecord m = patient;
  switch (kind) {
    case WhatIfKind::kSbpTo130:
      if (patient.sbp < 140.0) return std::nullopt;
      m.sbp = 130.0;
      return WhatIfScenario{kind, "Lower systolic blood pressure to 130 mmHg", m};
    case WhatIfKind::kSbpTo110:
      if (!(patient.sbp >= 120.0 && patient.sbp < 140.0)) return std::nullopt;
      m.sbp = 110.0;
      return WhatIfScenario{kind, "Lower systolic blood pressure to 110 mmHg", m};
    case WhatIfKind::kStopSmoking:
      if (!patient.smoking) return std::nullopt;
      m.smoking = false;
      return WhatIfScenario{kind, "Stop smoking", m};
    case WhatIfKind::kNonHdlTo3_4:
      if (!(non_hdl(patient.total_chol, patient.hdl_chol) > 4.0)) return std::nullopt;
      // HDL is kept; total cholesterol carries the reduction.
      m.total_chol = patient.hdl_chol + kNonHdlGoal;
      return WhatIfScenario{kind, "Reduce non-HDL cholesterol to 3.4 mmol/L", m};
  }
  return std::nullopt;
}

// Every applicable scenario, in the order blood pressure, smoking, lipids.
inline std::vector<WhatIfScenario> applicable_scenarios(const PatientRecord& patient) {
  std::vector<WhatIfScenario> out;
  for (auto kind : {WhatIfKind::kSbpTo130, WhatIfKind::kSbpTo110, WhatIfKind::kStopSmoking,
                    WhatIfKind::kNonHdlTo3_4}) {
    if (auto s = apply_scenario(patient, kind)) out.push_back(std::move(*s));
  }
  return out;
}

struct RiskReduction {
  double before = 0.0;
  double after = 0.0;
  double delta = 0.0;  // before - after
};

namespace detail {

inline void require_applicable(const PatientRecord& patient, const WhatIfScenario& scenario) {
  const auto expected = apply_scenario(patient, scenario.kind);
  if (!expected || !(expected->modified_patient == scenario.modified_patient)) {
    throw ValidationError("scenario", "scenario '" + std::string(to_string(scenario.kind)) +
                                          "' does not apply to this patient");
  }
}

}  // namespace detail

inline RiskReduction risk_reduction(const PatientRecord& patient, const WhatIfScenario& scenario,
                                    const SurrogateModel& model,
                                    const FactorRanges& ranges = FactorRanges::canonical()) {
  detail::require_applicable(patient, scenario);
  const double before = predict(model, normalize(patient, ranges));
  const double after = predict(model, normalize(scenario.modified_patient, ranges));
  return {before, after, before - after};
}

inline RiskReduction risk_reduction(const PatientRecord& patient, const WhatIfScenario& scenario,
                                    const Score2Bundle& bundle, RiskRegion region) {
  detail::require_applicable(patient, scenario);
  const double before = evaluate_score2(patient, bundle, region);
  const double after = evaluate_score2(scenario.modified_patient, bundle, region);
  return {before, after, before - after};
}

// ---------------------------------------------------------------------------
// Model files: `[surrogate.<sex>]` sections in the coefficient-file format.

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, end);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

inline std::string toml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace detail

inline std::string write_surrogate_models(std::span<const SurrogateModel> models,
                                          std::string_view provenance) {
  std::ostringstream out;
  out << "provenance = \"" << detail::toml_escape(provenance) << "\"\n";
  for (const SurrogateModel& m : models) {
    out << "\n[surrogate." << to_string(m.sex) << "]\n";
    out << "provenance = \"" << to_string(m.provenance) << "\"\n";
    for (std::size_t i = 0; i < kNumFactors; ++i) {
      out << factor_names()[i] << " = " << detail::format_double(m.alphas[i]) << "\n";
    }
    if (m.provenance == SurrogateProvenance::kQuantized) {
      out << "total_lobes = " << m.total_lobes << "\n";
      out << "etas = [";
      for (std::size_t i = 0; i < m.etas.size(); ++i) {
        out << (i ? ", " : "") << m.etas[i];
      }
      out << "]\n";
    }
  }
  return out.str();
}

struct SurrogateSet {
  std::string provenance;
  std::map<Sex, SurrogateModel> models;

  const SurrogateModel& at(Sex sex) const {
    auto it = models.find(sex);
    if (it == models.end()) {
      throw ModelError("no surrogate model for " + std::string(to_string(sex)));
    }
    return it->second;
  }
};

inline SurrogateSet load_surrogate_models(std::string_view text,
                                          std::string_view source = "surrogates") {
  const toml::table root = detail::parse_toml(text, source);
  SurrogateSet set;
  set.provenance = detail::require_provenance(root, source);
  const toml::table* surrogates = root["surrogate"].as_table();
  if (surrogates == nullptr) {
    throw ParseError(std::string(source) + ": missing [surrogate.<sex>] sections");
  }
  for (const auto& [key, node] : *surrogates) {
    const std::string where = "surrogate." + std::string(key.str());
    const toml::table* t = node.as_table();
    if (t == nullptr) throw ParseError(where + " is not a table");
    SurrogateModel m;
    m.sex = parse_sex(key.str());
    auto prov = (*t)["provenance"].value<std::string>();
    if (!prov) throw ParseError(where + ": mandatory 'provenance' is missing");
    m.provenance = parse_surrogate_provenance(*prov);
    for (std::size_t i = 0; i < kNumFactors; ++i) {
      m.alphas[i] = detail::require_number(*t, factor_names()[i], where);
    }
    if (m.provenance == SurrogateProvenance::kQuantized) {
      m.total_lobes = static_cast<int>(detail::require_number(*t, "total_lobes", where));
      const toml::array* etas = (*t)["etas"].as_array();
      if (etas == nullptr || etas->size() != kNumFactors) {
        throw ParseError(where + ": quantized models need 4 'etas'");
      }
      int sum = 0;
      for (const toml::node& e : *etas) {
        auto v = e.value<int64_t>();
        if (!v || *v < 0) throw ParseError(where + ": etas must be non-negative integers");
        m.etas.push_back(static_cast<int>(*v));
        sum += static_cast<int>(*v);
      }
      if (sum != m.total_lobes) throw ParseError(where + ": etas must sum to total_lobes");
    }
    set.models[m.sex] = std::move(m);
  }
  return set;
}

inline SurrogateSet load_surrogate_models_file(const std::string& path) {
  return load_surrogate_models(detail::read_file(path), path);
}

}  // namespace petalx
