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

// Stateless HTTP+JSON front end over the risk models.
//
//   GET  /health   liveness
//   GET  /models   coefficient bundle and surrogate provenance
//   POST /risk     SCORE2 and surrogate risk with color class
//   POST /explain  /risk plus per-factor contributions and flower geometry
//   POST /whatif   risk reduction for every applicable treatment goal
//
// Patient payloads carry age, sex, smoking, sbp, total_chol and hdl_chol,
// plus optional region, clamp, include_svg, include_outline and
// show_overlay. Errors have the shape {"error": {code, field?, message}}
// with status 400 for malformed input and 422 for out-of-range values.

#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

// Eigen must be seen before httplib.h: <resolv.h> defines a `_res` macro
// that collides with Eigen parameter names.
#include "petalx/error.hpp"
#include "petalx/geometry.hpp"
#include "petalx/model_core.hpp"
#include "petalx/render.hpp"
#include "petalx/surrogate.hpp"

#include <httplib.h>
#include <json.hpp>

namespace petalx {

using Json = nlohmann::json;

inline Json flower_to_json(const FlowerLayout& layout, bool include_outline = false,
                           int samples_per_lobe = 64) {
  Json petals = Json::array();
  for (const FlowerPetal& p : layout.petals) {
    Json j = {{"factor_id", p.factor_id},     {"eta", p.eta},       {"gamma", p.gamma},
              {"start_angle", p.start_angle}, {"length", p.length}, {"lobe_count", p.lobe_count}};
    if (include_outline) {
      Json pts = Json::array();
      if (p.eta > 0) {
        for (const Point& q : sample_outline(layout, p, samples_per_lobe)) {
          pts.push_back({q.x, q.y});
        }
      }
      j["outline"] = std::move(pts);
    }
    petals.push_back(std::move(j));
  }
  return {{"total_lobes", layout.total_lobes},
          {"kappa", layout.kappa},
          {"start_offset", layout.start_offset},
          {"winding", layout.winding == Winding::kClockwise ? "clockwise" : "counterclockwise"},
          {"lobe_angle", layout.lobe_angle()},
          {"petals", std::move(petals)}};
}

struct ServiceConfig {
  Score2Bundle bundle;
  SurrogateSet surrogates;
  ColorThresholds color_thresholds;
  FactorRanges ranges = FactorRanges::canonical();
  RiskRegion default_region = RiskRegion::kModerate;
  double kappa = 0.5;
  int male_lobes = 10;
  int female_lobes = 11;
};

struct Response {
  int status = 200;
  Json body;
};

class Service {
 public:
  explicit Service(ServiceConfig config) : config_(std::move(config)) {
    for (Sex sex : kAllSexes) {
      const SurrogateModel& m = config_.surrogates.at(sex);
      quantized_.emplace(sex, quantize_surrogate(m, lobes_for(sex)));
    }
    if (!(config_.kappa > 0.0 && config_.kappa < 1.0)) {
      throw ValidationError("kappa", "kappa must lie strictly inside (0, 1)");
    }
  }

  const ServiceConfig& config() const { return config_; }
  const SurrogateModel& quantized(Sex sex) const { return quantized_.at(sex); }

  Response health() const { return {200, {{"status", "ok"}}}; }

  Response models() const {
    Json score2_models = Json::array();
    for (const auto& [key, c] : config_.bundle.models()) {
      score2_models.push_back({{"sex", to_string(key.first)},
                               {"region", to_string(key.second)},
                               {"baseline_survival", c.baseline_survival}});
    }
    Json surrogates = Json::array();
    for (Sex sex : kAllSexes) {
      const SurrogateModel& m = config_.surrogates.at(sex);
      const SurrogateModel& q = quantized_.at(sex);
      surrogates.push_back(
          {{"sex", to_string(sex)},
           {"provenance", to_string(m.provenance)},
           {"alphas", alphas_json(m)},
           {"quantized",
            {{"total_lobes", q.total_lobes}, {"etas", q.etas}, {"alphas", alphas_json(q)}}}});
    }
    return {200,
            {{"score2",
              {{"provenance", config_.bundle.provenance()},
               {"version", config_.bundle.version()},
               {"models", std::move(score2_models)}}},
             {"surrogates",
              {{"provenance", config_.surrogates.provenance}, {"models", std::move(surrogates)}}},
             {"color_thresholds", {{"provenance", config_.color_thresholds.provenance}}},
             {"default_region", to_string(config_.default_region)},
             {"kappa", config_.kappa}}};
  }

  Response risk(const std::string& body) const {
    return guarded(body, [&](const Request& r) { return risk_json(r); });
  }

  Response explain(const std::string& body) const {
    return guarded(body, [&](const Request& r) {
      Json out = risk_json(r);
      const SurrogateModel& q = quantized_.at(r.patient.sex);
      const NormalizedFactors z = normalize(r.patient, config_.ranges);
      const FactorVector zv = z.values();
      const FactorVector c = contributions(q, z);
      Json items = Json::array();
      for (std::size_t i = 0; i < kNumFactors; ++i) {
        items.push_back({{"factor", factor_names()[i]},
                         {"z", zv[i]},
                         {"alpha", q.alphas[i]},
                         {"lobes", q.etas[i]},
                         {"contribution", c[i]},
                         {"contribution_percent", detail::percent(c[i])}});
      }
      out["contributions"] = std::move(items);
      const FlowerLayout layout = flower(r.patient);
      out["flower"] = flower_to_json(layout, r.include_outline);
      if (r.include_svg) {
        RenderOptions o;
        o.color_thresholds = config_.color_thresholds;
        o.show_numeric_overlay = r.show_overlay;
        out["svg"] = render_petalx_svg(layout, r.patient, q, out["risk_score2"].get<double>(), o,
                                       config_.ranges);
      }
      return out;
    });
  }

  Response whatif(const std::string& body) const {
    return guarded(body, [&](const Request& r) {
      const SurrogateModel& q = quantized_.at(r.patient.sex);
      Json out = risk_json(r);
      Json scenarios = Json::array();
      for (const WhatIfScenario& s : applicable_scenarios(r.patient)) {
        const RiskReduction exact = risk_reduction(r.patient, s, config_.bundle, r.region);
        const RiskReduction approx = risk_reduction(r.patient, s, q, config_.ranges);
        scenarios.push_back({{"kind", to_string(s.kind)},
                             {"description", s.description},
                             {"modified_patient", patient_json(s.modified_patient)},
                             {"score2", reduction_json(exact)},
                             {"surrogate", reduction_json(approx)},
                             {"flower_after", flower_to_json(flower(s.modified_patient))}});
      }
      out["scenarios"] = std::move(scenarios);
      return out;
    });
  }

  // Routing without a socket; the HTTP server mounts the same handlers.
  Response handle(const std::string& method, const std::string& path,
                  const std::string& body = "") const {
    static const std::set<std::string> kGet = {"/health", "/models"};
    static const std::set<std::string> kPost = {"/risk", "/explain", "/whatif"};
    const bool known = kGet.count(path) > 0 || kPost.count(path) > 0;
    if (!known) return error(404, "not_found", "", "no such endpoint: " + path);
    const bool get = kGet.count(path) > 0;
    if ((get && method != "GET") || (!get && method != "POST")) {
      return error(405, "method_not_allowed", "", method + " is not allowed on " + path);
    }
    if (path == "/health") return health();
    if (path == "/models") return models();
    if (path == "/risk") return risk(body);
    if (path == "/explain") return explain(body);
    return whatif(body);
  }

  void mount(httplib::Server& server) const {
    auto reply = [](httplib::Response& res, const Response& r) {
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    for (const char* path : {"/health", "/models"}) {
      server.Get(path, [this, reply, path](const httplib::Request&, httplib::Response& res) {
        reply(res, handle("GET", path));
      });
    }
    for (const char* path : {"/risk", "/explain", "/whatif"}) {
      server.Post(path, [this, reply, path](const httplib::Request& req, httplib::Response& res) {
        reply(res, handle("POST", path, req.body));
      });
    }
  }

 private:
  struct Request {
    PatientRecord patient;
    RiskRegion region = RiskRegion::kModerate;
    std::vector<std::string> clamped_fields;
    bool include_svg = false;
    bool include_outline = false;
    bool show_overlay = false;
  };

  // Thrown while reading a payload; becomes a 400 response.
  struct BadRequest {
    std::string code;
    std::string field;
    std::string message;
  };

  int lobes_for(Sex sex) const {
    return sex == Sex::kMale ? config_.male_lobes : config_.female_lobes;
  }

  static Response error(int status, const std::string& code, const std::string& field,
                        const std::string& message) {
    Json e = {{"code", code}, {"message", message}};
    if (!field.empty()) e["field"] = field;
    return {status, {{"error", std::move(e)}}};
  }

  template <class Fn>
  Response guarded(const std::string& body, Fn&& fn) const {
    try {
      return {200, fn(parse_request(body))};
    } catch (const BadRequest& e) {
      return error(400, e.code, e.field, e.message);
    } catch (const ValidationError& e) {
      return error(422, "out_of_range", e.field(), e.what());
    } catch (const Error& e) {
      return error(500, "model_error", "", e.what());
    }
  }

  static double number_field(const Json& j, const char* name) {
    if (!j.contains(name))
      throw BadRequest{"missing_field", name, std::string(name) + " is required"};
    const Json& v = j.at(name);
    if (!v.is_number()) {
      throw BadRequest{"invalid_type", name, std::string(name) + " must be a number"};
    }
    return v.get<double>();
  }

  static bool flag_field(const Json& j, const char* name, bool fallback, bool required = false) {
    if (!j.contains(name)) {
      if (required) throw BadRequest{"missing_field", name, std::string(name) + " is required"};
      return fallback;
    }
    const Json& v = j.at(name);
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_number_integer() && (v.get<long>() == 0 || v.get<long>() == 1)) {
      return v.get<long>() == 1;
    }
    throw BadRequest{"invalid_type", name, std::string(name) + " must be a boolean or 0/1"};
  }

  Request parse_request(const std::string& body) const {
    static const std::set<std::string> kFields = {
        "age",         "sex",    "smoking", "sbp",         "total_chol",
        "hdl_chol",    "region", "clamp",   "include_svg", "include_outline",
        "show_overlay"};
    Json j = Json::parse(body, nullptr, false);
    if (j.is_discarded()) throw BadRequest{"malformed_json", "", "request body is not valid JSON"};
    if (!j.is_object()) throw BadRequest{"malformed_json", "", "request body must be an object"};
    for (const auto& [key, value] : j.items()) {
      if (kFields.count(key) == 0) {
        throw BadRequest{"unknown_field", key, "unknown field '" + key + "'"};
      }
    }
    Request r;
    r.region = config_.default_region;
    if (!j.contains("sex")) throw BadRequest{"missing_field", "sex", "sex is required"};
    if (!j.at("sex").is_string()) {
      throw BadRequest{"invalid_type", "sex", "sex must be \"male\" or \"female\""};
    }
    try {
      r.patient.sex = parse_sex(j.at("sex").get<std::string>());
    } catch (const Error& e) {
      throw BadRequest{"invalid_value", "sex", e.what()};
    }
    r.patient.age = number_field(j, "age");
    r.patient.smoking = flag_field(j, "smoking", false, true);
    r.patient.sbp = number_field(j, "sbp");
    r.patient.total_chol = number_field(j, "total_chol");
    r.patient.hdl_chol = number_field(j, "hdl_chol");
    if (j.contains("region")) {
      if (!j.at("region").is_string()) {
        throw BadRequest{"invalid_type", "region", "region must be a string"};
      }
      try {
        r.region = parse_region(j.at("region").get<std::string>());
      } catch (const Error& e) {
        throw BadRequest{"invalid_value", "region", e.what()};
      }
      if (!config_.bundle.covers(r.patient.sex, r.region)) {
        throw BadRequest{"invalid_value", "region", "no coefficients loaded for this region"};
      }
    }
    r.include_svg = flag_field(j, "include_svg", false);
    r.include_outline = flag_field(j, "include_outline", false);
    r.show_overlay = flag_field(j, "show_overlay", false);
    if (flag_field(j, "clamp", false)) {
      ClampResult c = clamp_patient(r.patient, config_.ranges);
      r.patient = c.patient;
      r.clamped_fields = std::move(c.clamped_fields);
    }
    validate_patient(r.patient, config_.ranges);
    return r;
  }

  FlowerLayout flower(const PatientRecord& p) const {
    FlowerOptions o;
    o.kappa = config_.kappa;
    return flower_for(quantized_.at(p.sex), p, o, config_.ranges);
  }

  static Json alphas_json(const SurrogateModel& m) {
    Json out = Json::object();
    for (std::size_t i = 0; i < kNumFactors; ++i) out[factor_names()[i]] = m.alphas[i];
    return out;
  }

  static Json patient_json(const PatientRecord& p) {
    return {{"age", p.age}, {"sex", to_string(p.sex)},    {"smoking", p.smoking},
            {"sbp", p.sbp}, {"total_chol", p.total_chol}, {"hdl_chol", p.hdl_chol}};
  }

  static Json reduction_json(const RiskReduction& r) {
    return {{"before", r.before},
            {"after", r.after},
            {"delta", r.delta},
            {"before_percent", detail::percent(r.before)},
            {"after_percent", detail::percent(r.after)},
            {"delta_percent", detail::percent(r.delta)}};
  }

  Json risk_json(const Request& r) const {
    const double exact = evaluate_score2(r.patient, config_.bundle, r.region);
    const double approx =
        predict(quantized_.at(r.patient.sex), normalize(r.patient, config_.ranges));
    const RiskColorClass color = risk_color(exact, r.patient.age, config_.color_thresholds);
    return {{"patient", patient_json(r.patient)},
            {"region", to_string(r.region)},
            {"risk_score2", exact},
            {"risk_score2_percent", detail::percent(exact)},
            {"risk_surrogate", approx},
            {"risk_surrogate_percent", detail::percent(approx)},
            {"color_class", to_string(color)},
            {"clamped_fields", r.clamped_fields}};
  }

  ServiceConfig config_;
  std::map<Sex, SurrogateModel> quantized_;
};

// Service state from the three configuration files.
inline ServiceConfig load_service_config(const std::string& coefficients,
                                         const std::string& surrogates,
                                         const std::string& thresholds) {
  ServiceConfig c;
  c.bundle = load_coefficient_bundle_file(coefficients);
  c.surrogates = load_surrogate_models_file(surrogates);
  c.color_thresholds = load_color_thresholds_file(thresholds);
  return c;
}

}  // namespace petalx
