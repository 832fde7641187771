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

// Petal Product Plot geometry.
//
// A petal of angle beta and length a is the polar region
//   0 <= r <= kappa * a + (1 - kappa) * a * sin(pi * theta / beta),
//   0 <= theta <= beta,
// whose area is beta * a^2 * K(kappa). A multilobe petal stitches eta lobes of
// the common angle 2*pi/N together. Mapping coefficient b_i to the petal angle
// and value z_i to the length sqrt(z_i) makes each petal's area proportional to
// b_i * z_i. Lobe counts for real-valued b come from Hamilton (largest
// remainder) apportionment, which keeps every angle within 2*pi/N of exact.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "petalx/error.hpp"

namespace petalx {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct PetalSpec {
  double kappa = 0.5;   // (0, 1)
  double beta = 0.0;    // petal angle, radians in (0, 2*pi]
  double length = 0.0;  // a >= 0
};

inline void validate(const PetalSpec& spec) {
  if (!(spec.kappa > 0.0 && spec.kappa < 1.0)) {
    throw ValidationError("kappa", "kappa must lie strictly inside (0, 1)");
  }
  if (!(spec.beta > 0.0 && spec.beta <= kTwoPi)) {
    throw ValidationError("beta", "petal angle must lie in (0, 2*pi]");
  }
  if (!(spec.length >= 0.0) || !std::isfinite(spec.length)) {
    throw ValidationError("length", "petal length must be non-negative");
  }
}

// Boundary radius at polar angle theta in [0, beta].
inline double petal_boundary_radius(const PetalSpec& spec, double theta) {
  if (!(theta >= 0.0 && theta <= spec.beta)) {
    throw ValidationError("theta", "theta must lie in [0, beta]");
  }
  const double a = spec.length;
  return spec.kappa * a + (1.0 - spec.kappa) * a * std::sin(std::numbers::pi * theta / spec.beta);
}

// K(kappa) = (-8 kappa^2 + 8 kappa + pi (3 kappa^2 - 2 kappa + 1)) / (4 pi).
// Defined for the closed interval so the rhodonea (kappa = 0, K = 1/4) and
// circular sector (kappa = 1, K = 1/2) limits can be evaluated.
inline double area_constant(double kappa) {
  constexpr double pi = std::numbers::pi;
  return (-8.0 * kappa * kappa + 8.0 * kappa + pi * (3.0 * kappa * kappa - 2.0 * kappa + 1.0)) /
         (4.0 * pi);
}

inline double petal_area(const PetalSpec& spec) {
  validate(spec);
  return spec.beta * spec.length * spec.length * area_constant(spec.kappa);
}

// Integer lobe counts summing to total_lobes.
struct LobeAllocation {
  int total_lobes = 0;
  std::vector<int> etas;

  friend bool operator==(const LobeAllocation&, const LobeAllocation&) = default;
};

namespace detail {

inline double checked_l1_norm(std::span<const double> weights) {
  double norm = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ValidationError("b", "weights must be finite and non-negative");
    }
    norm += w;
  }
  if (!(norm > 0.0)) {
    throw ValidationError("b", "weights must not all be zero");
  }
  return norm;
}

}  // namespace detail

// Hamilton's largest-remainder method: quotas q_i = N b_i / |b|_1, every
// factor gets floor(q_i), leftover lobes go to the largest fractional
// remainders. Equal remainders favour the lower index.
inline LobeAllocation hamilton_apportion(std::span<const double> weights, int total_lobes) {
  if (total_lobes <= 0) {
    throw ValidationError("N", "total number of lobes must be positive");
  }
  const double norm = detail::checked_l1_norm(weights);
  const std::size_t n = weights.size();

  LobeAllocation out{total_lobes, std::vector<int>(n, 0)};
  std::vector<double> remainders(n);
  int assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double quota = total_lobes * (weights[i] / norm);
    const double floor_quota = std::floor(quota);
    out.etas[i] = static_cast<int>(floor_quota);
    remainders[i] = quota - floor_quota;
    assigned += out.etas[i];
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  // Rounding in the quotas can leave the floors one seat off either way.
  for (std::size_t k = 0; assigned < total_lobes; k = (k + 1) % n) {
    ++out.etas[order[k]];
    ++assigned;
  }
  for (auto it = order.rbegin(); assigned > total_lobes && it != order.rend(); ++it) {
    if (out.etas[*it] > 0) {
      --out.etas[*it];
      --assigned;
    }
  }
  return out;
}

// Coefficients the plot actually encodes: |b|_1 * eta_i / N.
inline std::vector<double> quantized_coefficients(std::span<const double> weights,
                                                  const LobeAllocation& allocation) {
  if (weights.size() != allocation.etas.size()) {
    throw ValidationError("etas", "allocation and weight vector lengths differ");
  }
  const double norm = detail::checked_l1_norm(weights);
  std::vector<double> out(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out[i] = norm * allocation.etas[i] / allocation.total_lobes;
  }
  return out;
}

struct MultilobePetalSpec {
  int total_lobes = 1;
  double kappa = 0.5;
  int eta = 0;
  double length = 0.0;

  double lobe_angle() const { return kTwoPi / total_lobes; }
  double angle() const { return kTwoPi * eta / total_lobes; }
};

// a^2 * gamma * K with gamma = 2*pi*eta/N; equal to eta single-lobe areas.
inline double multilobe_area(const MultilobePetalSpec& spec) {
  if (spec.total_lobes <= 0 || spec.eta < 0 || spec.eta > spec.total_lobes) {
    throw ValidationError("eta", "lobe count must lie in [0, N] with N > 0");
  }
  if (!(spec.kappa > 0.0 && spec.kappa < 1.0)) {
    throw ValidationError("kappa", "kappa must lie strictly inside (0, 1)");
  }
  return spec.length * spec.length * spec.angle() * area_constant(spec.kappa);
}

enum class Winding { kClockwise, kCounterClockwise };

struct FlowerPetal {
  std::string factor_id;
  int eta = 0;
  double gamma = 0.0;        // petal angle, 2*pi*eta/N
  double start_angle = 0.0;  // from 12 o'clock, in the layout's winding
  double length = 0.0;       // sqrt(z)
  int lobe_count = 0;
};

struct FlowerLayout {
  std::vector<FlowerPetal> petals;
  int total_lobes = 0;
  double kappa = 0.5;
  double start_offset = 0.0;
  Winding winding = Winding::kClockwise;

  double lobe_angle() const { return kTwoPi / total_lobes; }

  const FlowerPetal& petal(const std::string& factor_id) const {
    for (const FlowerPetal& p : petals) {
      if (p.factor_id == factor_id) return p;
    }
    throw ValidationError("factor_id", "no petal for factor '" + factor_id + "'");
  }
};

struct FlowerOptions {
  int total_lobes = 10;
  double kappa = 0.5;
  // Permutation of factor indices, placed consecutively. Empty means
  // input order.
  std::vector<std::size_t> ordering;
  double start_offset = 0.0;
  Winding winding = Winding::kClockwise;
};

// Lays out one multilobe petal per factor. Petal i gets hamilton lobes for
// weights[i] and length sqrt(values[i]).
inline FlowerLayout build_flower(std::span<const double> weights, std::span<const double> values,
                                 std::span<const std::string> factor_ids,
                                 const FlowerOptions& options = {}) {
  const std::size_t n = weights.size();
  if (values.size() != n || factor_ids.size() != n) {
    throw ValidationError("z", "weights, values and factor ids differ in length");
  }
  if (!(options.kappa > 0.0 && options.kappa < 1.0)) {
    throw ValidationError("kappa", "kappa must lie strictly inside (0, 1)");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(values[i] >= 0.0) || !std::isfinite(values[i])) {
      throw ValidationError("z", "values must be finite and non-negative");
    }
  }
  std::vector<std::size_t> ordering = options.ordering;
  if (ordering.empty()) {
    ordering.resize(n);
    std::iota(ordering.begin(), ordering.end(), std::size_t{0});
  }
  {
    std::vector<std::size_t> sorted = ordering;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (sorted.size() != n || sorted[i] != i) {
        throw ValidationError("ordering", "ordering must be a permutation of the factors");
      }
    }
  }

  const LobeAllocation allocation = hamilton_apportion(weights, options.total_lobes);
  FlowerLayout layout;
  layout.total_lobes = options.total_lobes;
  layout.kappa = options.kappa;
  layout.start_offset = options.start_offset;
  layout.winding = options.winding;
  int lobes_before = 0;
  for (std::size_t i : ordering) {
    FlowerPetal petal;
    petal.factor_id = factor_ids[i];
    petal.eta = allocation.etas[i];
    petal.lobe_count = petal.eta;
    petal.gamma = kTwoPi * petal.eta / options.total_lobes;
    petal.start_angle = options.start_offset + kTwoPi * lobes_before / options.total_lobes;
    petal.length = std::sqrt(values[i]);
    lobes_before += petal.eta;
    layout.petals.push_back(std::move(petal));
  }
  return layout;
}

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

// Layout angle (from 12 o'clock, in the winding direction) to y-up coordinates.
inline Point polar_to_point(double radius, double angle, Winding winding) {
  const double s = std::sin(angle);
  const double c = std::cos(angle);
  return winding == Winding::kClockwise ? Point{radius * s, radius * c}
                                        : Point{-radius * s, radius * c};
}

// Polyline of a petal boundary: origin, samples of every lobe, origin. Lobes
// share their seam samples, so a petal of eta >= 1 lobes has
// 2 + samples_per_lobe + (eta - 1) * (samples_per_lobe - 1) points.
inline std::vector<Point> sample_outline(const FlowerLayout& layout, const FlowerPetal& petal,
                                         int samples_per_lobe = 128,
                                         double length_override = -1.0) {
  if (samples_per_lobe < 8) {
    throw ValidationError("samples_per_lobe", "need at least 8 samples per lobe");
  }
  const double a = length_override >= 0.0 ? length_override : petal.length;
  const double lobe = layout.lobe_angle();
  const double seam_radius = layout.kappa * a;
  std::vector<Point> points;
  points.reserve(static_cast<std::size_t>(2 + petal.eta * (samples_per_lobe - 1) + 1));
  points.push_back({0.0, 0.0});
  const int last = samples_per_lobe - 1;
  for (int j = 0; j < petal.eta; ++j) {
    for (int k = (j == 0 ? 0 : 1); k <= last; ++k) {
      const double t = static_cast<double>(k) / last;
      const double angle = petal.start_angle + (j + t) * lobe;
      const double r = (k == 0 || k == last) ? seam_radius
                                             : seam_radius + (1.0 - layout.kappa) * a *
                                                                 std::sin(std::numbers::pi * t);
      points.push_back(polar_to_point(r, angle, layout.winding));
    }
  }
  points.push_back({0.0, 0.0});
  return points;
}

}  // namespace petalx
