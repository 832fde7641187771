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

// Cohorts and surrogate fidelity: CSV ingestion with the exclusion rules,
// seeded synthetic cohorts, and the Spearman / R^2 / RMSE / MAE battery.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "petalx/error.hpp"
#include "petalx/model_core.hpp"
#include "petalx/surrogate.hpp"

namespace petalx {

struct CohortRow {
  std::string source_id;
  PatientRecord patient;
  bool prior_cvd = false;
  bool diabetes = false;
};

struct ExclusionReport {
  std::size_t total_rows = 0;
  std::size_t prior_cvd_or_diabetes = 0;
  std::size_t missing_value = 0;
  std::size_t out_of_range = 0;
  std::size_t included = 0;

  bool balanced() const {
    return prior_cvd_or_diabetes + missing_value + out_of_range + included == total_rows;
  }
};

struct IngestResult {
  std::vector<CohortRow> rows;
  ExclusionReport report;
};

inline const std::vector<std::string>& cohort_columns() {
  static const std::vector<std::string> cols = {
      "id", "sex", "age", "smoking", "sbp", "total_chol", "hdl_chol", "prior_cvd", "diabetes"};
  return cols;
}

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view cell = line.substr(
        start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) {
      cell.remove_suffix(1);
    }
    out.emplace_back(cell);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double parse_number(const std::string& cell, const std::string& column, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != cell.size() || !std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line) + ": column '" + column +
                     "' has non-numeric value '" + cell + "'");
  }
  return v;
}

inline bool parse_flag(const std::string& cell, const std::string& column, std::size_t line) {
  const double v = parse_number(cell, column, line);
  if (v != 0.0 && v != 1.0) {
    throw ParseError("line " + std::to_string(line) + ": column '" + column + "' must be 0 or 1");
  }
  return v == 1.0;
}

}  // namespace detail

// Reads `id,sex,age,smoking,sbp,total_chol,hdl_chol,prior_cvd,diabetes` (any
// column order, empty cells are missing) and applies, in order: prior CVD or
// diabetes, missing value, out of range.
inline IngestResult ingest_csv(std::istream& in,
                               const FactorRanges& ranges = FactorRanges::canonical()) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("cohort CSV is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const std::vector<std::string> header = detail::split_csv_line(line);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto& known = cohort_columns();
    if (std::find(known.begin(), known.end(), header[i]) == known.end()) {
      throw ParseError("unknown column '" + header[i] + "'");
    }
    if (!index.emplace(header[i], i).second) {
      throw ParseError("duplicate column '" + header[i] + "'");
    }
  }
  for (const std::string& col : cohort_columns()) {
    if (!index.count(col)) throw ParseError("missing column '" + col + "'");
  }

  IngestResult result;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, found " +
                       std::to_string(cells.size()));
    }
    ++result.report.total_rows;
    auto cell = [&](const std::string& col) -> const std::string& { return cells[index.at(col)]; };

    const bool prior_cvd =
        !cell("prior_cvd").empty() && detail::parse_flag(cell("prior_cvd"), "prior_cvd", line_no);
    const bool diabetes =
        !cell("diabetes").empty() && detail::parse_flag(cell("diabetes"), "diabetes", line_no);
    if (prior_cvd || diabetes) {
      ++result.report.prior_cvd_or_diabetes;
      continue;
    }
    bool missing = false;
    for (const std::string& col : cohort_columns()) {
      if (col != "id" && cell(col).empty()) missing = true;
    }
    if (missing) {
      ++result.report.missing_value;
      continue;
    }
    CohortRow row;
    row.source_id = cell("id");
    try {
      row.patient.sex = parse_sex(cell("sex"));
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    row.patient.age = detail::parse_number(cell("age"), "age", line_no);
    row.patient.smoking = detail::parse_flag(cell("smoking"), "smoking", line_no);
    row.patient.sbp = detail::parse_number(cell("sbp"), "sbp", line_no);
    row.patient.total_chol = detail::parse_number(cell("total_chol"), "total_chol", line_no);
    row.patient.hdl_chol = detail::parse_number(cell("hdl_chol"), "hdl_chol", line_no);
    try {
      validate_patient(row.patient, ranges);
    } catch (const ValidationError&) {
      ++result.report.out_of_range;
      continue;
    }
    result.rows.push_back(std::move(row));
    ++result.report.included;
  }
  return result;
}

inline IngestResult ingest_csv_file(const std::string& path,
                                    const FactorRanges& ranges = FactorRanges::canonical()) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return ingest_csv(in, ranges);
}

inline std::string write_cohort_csv(std::span<const CohortRow> rows) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (std::size_t i = 0; i < cohort_columns().size(); ++i) {
    out << (i ? "," : "") << cohort_columns()[i];
  }
  out << "\n";
  for (const CohortRow& r : rows) {
    out << r.source_id << "," << to_string(r.patient.sex) << "," << r.patient.age << ","
        << (r.patient.smoking ? 1 : 0) << "," << r.patient.sbp << "," << r.patient.total_chol << ","
        << r.patient.hdl_chol << "," << (r.prior_cvd ? 1 : 0) << "," << (r.diabetes ? 1 : 0)
        << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Synthetic cohorts.

struct TruncatedNormal {
  double mean = 0.0;
  double sd = 1.0;
};

// Factor distributions are normal shapes truncated to the validity ranges.
// HDL is drawn around `hdl.mean + hdl_slope_per_non_hdl * (non_hdl - non_hdl.mean)`
// so that HDL and non-HDL are inversely related, as in observed cohorts.
struct SyntheticCohortConfig {
  std::size_t size_per_sex = 1000;
  std::uint64_t seed = 7;
  TruncatedNormal age{57.5, 7.0};
  TruncatedNormal sbp{140.0, 20.0};
  TruncatedNormal non_hdl{5.0, 1.0};
  TruncatedNormal hdl{1.5, 0.35};
  double hdl_slope_per_non_hdl = -0.15;
  double smoking_prevalence = 0.3;
  FactorRanges ranges = FactorRanges::canonical();
};

namespace detail {

// Platform-independent uniform/normal draws from a 64-bit Mersenne Twister.
class SyntheticSampler {
 public:
  explicit SyntheticSampler(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    // Box-Muller; the second variate is discarded to keep draws aligned.
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double truncated(double mean, double sd, const FactorRange& range) {
    constexpr int kMaxAttempts = 10000;
    for (int i = 0; i < kMaxAttempts; ++i) {
      const double x = mean + sd * normal();
      if (range.contains(x)) return x;
    }
    throw ValidationError(std::string(to_string(range.factor_id)),
                          "distribution is infeasible within the factor range");
  }

 private:
  std::mt19937_64 engine_;
};

inline void check_distribution(const TruncatedNormal& d, const char* name) {
  if (!(d.sd > 0.0) || !std::isfinite(d.mean) || !std::isfinite(d.sd)) {
    throw ValidationError(name, std::string(name) + ": standard deviation must be positive");
  }
}

}  // namespace detail

// Males first, then females; ids are "syn-m-<k>" / "syn-f-<k>".
inline std::vector<CohortRow> generate_synthetic(const SyntheticCohortConfig& config) {
  detail::check_distribution(config.age, "age");
  detail::check_distribution(config.sbp, "sbp");
  detail::check_distribution(config.non_hdl, "non_hdl");
  detail::check_distribution(config.hdl, "hdl_chol");
  if (!(config.smoking_prevalence >= 0.0 && config.smoking_prevalence <= 1.0)) {
    throw ValidationError("smoking_prevalence", "smoking prevalence must lie in [0, 1]");
  }
  detail::SyntheticSampler rng(config.seed);
  const FactorRanges& r = config.ranges;
  std::vector<CohortRow> rows;
  rows.reserve(2 * config.size_per_sex);
  for (Sex sex : kAllSexes) {
    for (std::size_t k = 0; k < config.size_per_sex; ++k) {
      CohortRow row;
      row.source_id = std::string(sex == Sex::kMale ? "syn-m-" : "syn-f-") + std::to_string(k);
      PatientRecord& p = row.patient;
      p.sex = sex;
      p.age = rng.truncated(config.age.mean, config.age.sd, r.age);
      p.sbp = rng.truncated(config.sbp.mean, config.sbp.sd, r.sbp);
      p.smoking = rng.uniform() < config.smoking_prevalence;
      constexpr int kMaxAttempts = 10000;
      int attempt = 0;
      for (;; ++attempt) {
        if (attempt == kMaxAttempts) {
          throw ValidationError("total_chol", "cholesterol distribution is infeasible");
        }
        const double nh = rng.truncated(config.non_hdl.mean, config.non_hdl.sd, r.non_hdl);
        const double hdl_mean =
            config.hdl.mean + config.hdl_slope_per_non_hdl * (nh - config.non_hdl.mean);
        p.hdl_chol = rng.truncated(hdl_mean, config.hdl.sd, r.hdl_chol);
        p.total_chol = p.hdl_chol + nh;
        if (r.total_chol.contains(p.total_chol)) break;
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Fidelity metrics.

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("y", "vectors differ in length");
  if (x.size() < 2) throw ValidationError("x", "need at least two observations");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw ValidationError(sxx == 0.0 ? "x" : "y", "correlation of a constant vector");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// 1-based ranks, ties get the mean of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("y", "vectors differ in length");
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  return pearson(rx, ry);
}

struct FidelityMetrics {
  double spearman = 0.0;
  double r2 = 0.0;  // squared Pearson correlation
  double rmse = 0.0;
  double mae = 0.0;
};

inline FidelityMetrics fidelity_metrics(std::span<const double> predictions,
                                        std::span<const double> references) {
  if (predictions.size() != references.size()) {
    throw ValidationError("predictions", "predictions and references differ in length");
  }
  if (predictions.empty()) throw ValidationError("predictions", "no observations");
  FidelityMetrics m;
  double se = 0.0, ae = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double e = predictions[i] - references[i];
    se += e * e;
    ae += std::abs(e);
  }
  const double n = static_cast<double>(predictions.size());
  m.rmse = std::sqrt(se / n);
  m.mae = ae / n;
  m.spearman = spearman(predictions, references);
  const double r = pearson(predictions, references);
  m.r2 = r * r;
  return m;
}

// ---------------------------------------------------------------------------
// Surrogate comparison.

struct FidelityRow {
  Sex sex;
  std::string surrogate;
  std::size_t n = 0;
  FidelityMetrics metrics;
};

struct FidelityReport {
  std::vector<FidelityRow> rows;

  const FidelityRow& row(Sex sex, std::string_view surrogate) const {
    for (const FidelityRow& r : rows) {
      if (r.sex == sex && r.surrogate == surrogate) return r;
    }
    throw ValidationError("surrogate", "no report row for '" + std::string(surrogate) + "'");
  }
};

inline constexpr std::string_view kGscRow = "Graphical Score Chart";
inline constexpr std::string_view kLinearRow = "Linear Regression";
inline constexpr std::string_view kPetalxRow = "Petal-X";
inline constexpr std::string_view kGscRoundedRow = "Graphical Score Chart (rounded)";

struct ComparedModels {
  std::map<Sex, SurrogateModel> linear;
  std::map<Sex, SurrogateModel> quantized;
  GscSpec gsc;
};

inline std::vector<const CohortRow*> stratum(std::span<const CohortRow> cohort, Sex sex) {
  std::vector<const CohortRow*> out;
  for (const CohortRow& r : cohort) {
    if (r.patient.sex == sex) out.push_back(&r);
  }
  return out;
}

// Fits one no-intercept surrogate per sex against SCORE2 targets.
inline std::map<Sex, SurrogateModel> fit_surrogates(
    std::span<const CohortRow> cohort, const Score2Bundle& bundle, RiskRegion region,
    const FactorRanges& ranges = FactorRanges::canonical()) {
  std::map<Sex, SurrogateModel> out;
  for (Sex sex : kAllSexes) {
    const auto rows = stratum(cohort, sex);
    if (rows.empty()) {
      throw ValidationError("sex", "cohort has no " + std::string(to_string(sex)) + " rows");
    }
    std::vector<NormalizedFactors> z;
    std::vector<double> y;
    for (const CohortRow* r : rows) {
      z.push_back(normalize(r->patient, ranges));
      y.push_back(evaluate_score2(r->patient, bundle, region));
    }
    out[sex] = fit_no_intercept(z, y, sex);
  }
  return out;
}

// Per sex (male first): GSC, linear, Petal-X, then the GSC with cell risks
// rounded to whole percents.
inline FidelityReport compare_surrogates(std::span<const CohortRow> cohort,
                                         const Score2Bundle& bundle, RiskRegion region,
                                         const ComparedModels& models,
                                         const FactorRanges& ranges = FactorRanges::canonical()) {
  FidelityReport report;
  for (Sex sex : kAllSexes) {
    const auto rows = stratum(cohort, sex);
    if (rows.empty()) {
      throw ValidationError("sex", "cohort has no " + std::string(to_string(sex)) + " rows");
    }
    const SurrogateModel& linear = models.linear.at(sex);
    const SurrogateModel& quantized = models.quantized.at(sex);
    std::vector<double> ref, gsc, gsc_rounded, lin, pet;
    for (const CohortRow* r : rows) {
      ref.push_back(evaluate_score2(r->patient, bundle, region));
      const double g = gsc_surrogate(r->patient, bundle, region, models.gsc);
      gsc.push_back(g);
      gsc_rounded.push_back(round_to_percent(g));
      const NormalizedFactors z = normalize(r->patient, ranges);
      lin.push_back(predict(linear, z));
      pet.push_back(predict(quantized, z));
    }
    const std::size_t n = rows.size();
    report.rows.push_back({sex, std::string(kGscRow), n, fidelity_metrics(gsc, ref)});
    report.rows.push_back({sex, std::string(kLinearRow), n, fidelity_metrics(lin, ref)});
    report.rows.push_back({sex, std::string(kPetalxRow), n, fidelity_metrics(pet, ref)});
    report.rows.push_back(
        {sex, std::string(kGscRoundedRow), n, fidelity_metrics(gsc_rounded, ref)});
  }
  return report;
}

inline std::string report_csv(const FidelityReport& report) {
  std::ostringstream out;
  out << "sex,surrogate,n,spearman,r2,rmse,mae\n";
  out << std::fixed << std::setprecision(6);
  for (const FidelityRow& r : report.rows) {
    out << to_string(r.sex) << "," << r.surrogate << "," << r.n << "," << r.metrics.spearman << ","
        << r.metrics.r2 << "," << r.metrics.rmse << "," << r.metrics.mae << "\n";
  }
  return out.str();
}

inline std::string report_table(const FidelityReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  std::optional<Sex> current;
  for (const FidelityRow& r : report.rows) {
    if (!current || *current != r.sex) {
      if (current) out << "\n";
      current = r.sex;
      std::string title = std::string(to_string(r.sex));
      title[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(title[0])));
      out << std::left << std::setw(34) << (title + " surrogate (n=" + std::to_string(r.n) + ")")
          << std::right << std::setw(10) << "Sp. Corr." << std::setw(8) << "R2" << std::setw(8)
          << "RMSE" << std::setw(8) << "MAE" << "\n";
    }
    out << std::left << std::setw(34) << r.surrogate << std::right << std::setw(10)
        << r.metrics.spearman << std::setw(8) << r.metrics.r2 << std::setw(8) << r.metrics.rmse
        << std::setw(8) << r.metrics.mae << "\n";
  }
  return out.str();
}

}  // namespace petalx
