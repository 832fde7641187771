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

// petalx: command-line front end.
//
// Exit status: 0 on success, 1 for usage errors, 2 for data or validation
// errors.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <unistd.h>

#include "petalx/evaluation.hpp"
#include "petalx/geometry.hpp"
#include "petalx/model_core.hpp"
#include "petalx/render.hpp"
#include "petalx/service.hpp"
#include "petalx/surrogate.hpp"

#include <CLI11.hpp>

namespace {

using namespace petalx;

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

struct DataPaths {
  std::string coefficients = std::string(PETALX_DATA_DIR) + "/score2_coefficients.toml";
  std::string surrogates = std::string(PETALX_DATA_DIR) + "/surrogate_models.toml";
  std::string thresholds = std::string(PETALX_DATA_DIR) + "/color_thresholds.toml";
};

struct PatientFlags {
  double age = 0.0;
  std::string sex;
  bool smoking = false;
  double sbp = 0.0;
  double total_chol = 0.0;
  double hdl_chol = 0.0;
  bool clamp = false;

  PatientRecord patient() const {
    PatientRecord p{age, parse_sex(sex), smoking, sbp, total_chol, hdl_chol};
    if (clamp) {
      const ClampResult c = clamp_patient(p);
      for (const std::string& f : c.clamped_fields) {
        std::cerr << "note: " << f << " clamped into range\n";
      }
      p = c.patient;
    }
    validate_patient(p);
    return p;
  }
};

struct CohortFlags {
  std::string cohort = "synthetic";
  std::uint64_t seed = 7;
  std::size_t n_per_sex = 1000;

  std::vector<CohortRow> load(bool print_report) const {
    if (cohort == "synthetic") {
      SyntheticCohortConfig config;
      config.seed = seed;
      config.size_per_sex = n_per_sex;
      return generate_synthetic(config);
    }
    IngestResult result = ingest_csv_file(cohort);
    if (print_report) {
      const ExclusionReport& r = result.report;
      std::cerr << "rows: " << r.total_rows << "\n"
                << "excluded (prior CVD or diabetes): " << r.prior_cvd_or_diabetes << "\n"
                << "excluded (missing value): " << r.missing_value << "\n"
                << "excluded (out of range): " << r.out_of_range << "\n"
                << "included: " << r.included << "\n";
    }
    return std::move(result.rows);
  }
};

const std::vector<std::string> kSexNames = {"male", "female", "m", "f", "1", "2"};
const std::vector<std::string> kRegionNames = {"low", "moderate", "high", "very_high"};

void add_data_paths(CLI::App* cmd, DataPaths& paths, bool surrogates, bool thresholds) {
  cmd->add_option("--coefficients", paths.coefficients, "SCORE2 coefficient bundle (TOML)")
      ->capture_default_str();
  if (surrogates) {
    cmd->add_option("--surrogates", paths.surrogates, "Surrogate model file (TOML)")
        ->capture_default_str();
  }
  if (thresholds) {
    cmd->add_option("--thresholds", paths.thresholds, "Color threshold table (TOML)")
        ->capture_default_str();
  }
}

void add_patient(CLI::App* cmd, PatientFlags& p) {
  cmd->add_option("--age", p.age, "Age in years")->required();
  cmd->add_option("--sex", p.sex, "male or female")->required()->check(CLI::IsMember(kSexNames));
  cmd->add_option("--smoking", p.smoking, "Current smoker (true/false)")->required();
  cmd->add_option("--sbp", p.sbp, "Systolic blood pressure in mmHg")->required();
  cmd->add_option("--total_chol", p.total_chol, "Total cholesterol in mmol/L")->required();
  cmd->add_option("--hdl_chol", p.hdl_chol, "HDL cholesterol in mmol/L")->required();
  cmd->add_flag("--clamp", p.clamp, "Clamp out-of-range values instead of failing");
}

void add_cohort(CLI::App* cmd, CohortFlags& c) {
  cmd->add_option("--cohort", c.cohort, "'synthetic' or a cohort CSV file")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Seed of the synthetic cohort")->capture_default_str();
  cmd->add_option("--n_per_sex", c.n_per_sex, "Synthetic patients per sex")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

void add_region(CLI::App* cmd, std::string& region) {
  cmd->add_option("--region", region, "SCORE2 risk region")
      ->capture_default_str()
      ->check(CLI::IsMember(kRegionNames));
}

// Writes to stdout, or atomically to `path` through a sibling temp file.
void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot write '" + tmp.string() + "'");
    out << text;
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw ParseError("cannot write '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw ParseError("cannot move output into '" + path + "': " + ec.message());
  }
}

int lobes_or_default(int lobes, Sex sex) {
  if (lobes > 0) return lobes;
  return sex == Sex::kMale ? 10 : 11;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Petal-X: SCORE2 risk, surrogate explanations and risk charts", "petalx"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "petalx 1.0.0");

  DataPaths paths;
  PatientFlags patient;
  CohortFlags cohort;
  std::string region = "moderate";
  std::string out;
  std::string format = "table";
  int lobes = 0;
  int male_lobes = 10;
  int female_lobes = 11;
  double kappa = 0.5;
  bool overlay = false;
  bool quantize = false;
  bool as_json = false;
  std::string sex;
  std::string host = "127.0.0.1";
  int port = 8080;

  CLI::App* score = app.add_subcommand("score", "Print SCORE2 and surrogate risk for one patient");
  add_patient(score, patient);
  add_region(score, region);
  add_data_paths(score, paths, true, true);
  score->add_flag("--json", as_json, "Print the result as JSON");
  score->add_option("--out", out, "Output file (default stdout)");

  CLI::App* fit = app.add_subcommand("fit", "Fit no-intercept surrogates and write a model file");
  add_cohort(fit, cohort);
  add_region(fit, region);
  add_data_paths(fit, paths, false, false);
  fit->add_flag("--quantize", quantize, "Write the quantized (lobe-count) models instead");
  fit->add_option("--male_lobes", male_lobes, "Total lobes for the male model")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  fit->add_option("--female_lobes", female_lobes, "Total lobes for the female model")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  fit->add_option("--out", out, "Output file (default stdout)");

  CLI::App* validate =
      app.add_subcommand("validate", "Fidelity report of the surrogates vs SCORE2");
  add_cohort(validate, cohort);
  add_region(validate, region);
  add_data_paths(validate, paths, false, false);
  validate->add_option("--male_lobes", male_lobes, "Total lobes for the male model")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  validate->add_option("--female_lobes", female_lobes, "Total lobes for the female model")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  validate->add_option("--format", format, "table or csv")
      ->capture_default_str()
      ->check(CLI::IsMember({"table", "csv"}));
  validate->add_option("--out", out, "Output file (default stdout)");

  CLI::App* render = app.add_subcommand("render", "Write the Petal-X SVG for one patient");
  add_patient(render, patient);
  add_region(render, region);
  add_data_paths(render, paths, true, true);
  render->add_option("--lobes", lobes, "Total lobes (default 10 male, 11 female)")
      ->check(CLI::PositiveNumber);
  render->add_option("--kappa", kappa, "Petal shape parameter in (0, 1)")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  render->add_flag("--overlay", overlay, "Print numeric risk values on the flower");
  render->add_option("--out", out, "Output file (default stdout)");

  CLI::App* gsc = app.add_subcommand("gsc", "Write a graphical score chart SVG");
  gsc->add_option("--sex", sex, "male or female")->required()->check(CLI::IsMember(kSexNames));
  add_region(gsc, region);
  add_data_paths(gsc, paths, false, true);
  gsc->add_option("--out", out, "Output file (default stdout)");

  CLI::App* cohort_cmd =
      app.add_subcommand("cohort", "Generate or filter a cohort; exclusions go to stderr");
  add_cohort(cohort_cmd, cohort);
  cohort_cmd->add_option("--out", out, "Output CSV file (default stdout)");

  CLI::App* serve = app.add_subcommand("serve", "Start the HTTP service");
  add_data_paths(serve, paths, true, true);
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--port", port, "Port")->capture_default_str()->check(CLI::Range(1, 65535));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    const RiskRegion risk_region = parse_region(region);

    if (*score) {
      const Score2Bundle bundle = load_coefficient_bundle_file(paths.coefficients);
      const SurrogateSet surrogates = load_surrogate_models_file(paths.surrogates);
      const ColorThresholds thresholds = load_color_thresholds_file(paths.thresholds);
      const PatientRecord p = patient.patient();
      const SurrogateModel q = quantize_surrogate(surrogates.at(p.sex), lobes_or_default(0, p.sex));
      const double exact = evaluate_score2(p, bundle, risk_region);
      const double approx = predict(q, normalize(p));
      const RiskColorClass color = risk_color(exact, p.age, thresholds);
      std::string text;
      if (as_json) {
        const Json j = {{"region", to_string(risk_region)},
                        {"risk_score2", exact},
                        {"risk_score2_percent", detail::percent(exact)},
                        {"risk_surrogate", approx},
                        {"risk_surrogate_percent", detail::percent(approx)},
                        {"color_class", to_string(color)}};
        text = j.dump(2) + "\n";
      } else {
        text = "SCORE2 (" + std::string(to_string(risk_region)) + "): " + detail::percent(exact) +
               "\nPetal-X surrogate: " + detail::percent(approx) +
               "\nColor class: " + std::string(to_string(color)) + "\n";
      }
      emit(text, out);
    } else if (*fit || *validate) {
      const Score2Bundle bundle = load_coefficient_bundle_file(paths.coefficients);
      const std::vector<CohortRow> rows = cohort.load(true);
      ComparedModels models;
      models.linear = fit_surrogates(rows, bundle, risk_region);
      for (Sex s : kAllSexes) {
        const int n = s == Sex::kMale ? male_lobes : female_lobes;
        models.quantized[s] = quantize_surrogate(models.linear.at(s), n);
      }
      if (*fit) {
        std::vector<SurrogateModel> list;
        for (Sex s : kAllSexes) {
          list.push_back(quantize ? models.quantized.at(s) : models.linear.at(s));
        }
        const std::string provenance =
            "fitted on cohort '" + cohort.cohort + "'" +
            (cohort.cohort == "synthetic" ? " (seed " + std::to_string(cohort.seed) + ", " +
                                                std::to_string(cohort.n_per_sex) + " per sex)"
                                          : std::string()) +
            ", region " + std::string(to_string(risk_region));
        emit(write_surrogate_models(list, provenance), out);
      } else {
        const FidelityReport report = compare_surrogates(rows, bundle, risk_region, models);
        emit(format == "csv" ? report_csv(report) : report_table(report), out);
      }
    } else if (*render) {
      const Score2Bundle bundle = load_coefficient_bundle_file(paths.coefficients);
      const SurrogateSet surrogates = load_surrogate_models_file(paths.surrogates);
      RenderOptions options;
      options.color_thresholds = load_color_thresholds_file(paths.thresholds);
      options.show_numeric_overlay = overlay;
      const PatientRecord p = patient.patient();
      const SurrogateModel q =
          quantize_surrogate(surrogates.at(p.sex), lobes_or_default(lobes, p.sex));
      FlowerOptions fo;
      fo.kappa = kappa;
      const FlowerLayout layout = flower_for(q, p, fo);
      emit(render_petalx_svg(layout, p, q, evaluate_score2(p, bundle, risk_region), options), out);
    } else if (*gsc) {
      const Score2Bundle bundle = load_coefficient_bundle_file(paths.coefficients);
      RenderOptions options;
      options.color_thresholds = load_color_thresholds_file(paths.thresholds);
      emit(render_gsc_svg(bundle, risk_region, parse_sex(sex), GscSpec{}, options), out);
    } else if (*cohort_cmd) {
      const std::vector<CohortRow> rows = cohort.load(true);
      emit(write_cohort_csv(rows), out);
    } else if (*serve) {
      const Service service(
          load_service_config(paths.coefficients, paths.surrogates, paths.thresholds));
      httplib::Server server;
      service.mount(server);
      if (!server.bind_to_port(host, port)) {
        std::cerr << "error: cannot bind " << host << ":" << port << "\n";
        return kDataError;
      }
      std::cerr << "listening on http://" << host << ":" << port << "\n";
      server.listen_after_bind();
    }
  } catch (const petalx::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return 0;
}
