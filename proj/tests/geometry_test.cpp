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

#include "petalx/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace petalx {
namespace {

constexpr double kPi = std::numbers::pi;

const std::vector<std::string> kIds = {"age", "sbp", "smoking", "nonhdl"};
const std::vector<double> kMale = {0.087, 0.058, 0.037, 0.022};
const std::vector<double> kFemale = {0.060, 0.037, 0.025, 0.004};

TEST(PetalBoundary, EndpointsAndPeak) {
  const PetalSpec spec{0.5, kPi / 4, 2.0};
  EXPECT_DOUBLE_EQ(petal_boundary_radius(spec, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(petal_boundary_radius(spec, kPi / 8), 2.0);
  EXPECT_THROW(petal_boundary_radius(spec, -0.1), ValidationError);
  EXPECT_THROW(petal_boundary_radius(spec, kPi / 4 + 1e-9), ValidationError);
  for (double t = 0.0; t <= spec.beta; t += spec.beta / 50) {
    const double r = petal_boundary_radius(spec, t);
    EXPECT_GE(r, spec.kappa * spec.length - 1e-15);
    EXPECT_LE(r, spec.length + 1e-15);
  }
}

TEST(PetalBoundary, SmallKappaApproachesRhodonea) {
  const PetalSpec spec{1e-12, kPi / 3, 1.5};
  for (double t = 0.0; t <= spec.beta; t += spec.beta / 20) {
    EXPECT_NEAR(petal_boundary_radius(spec, t), 1.5 * std::sin(3.0 * t), 1e-11);
  }
}

TEST(AreaConstant, LimitsAndMidpoint) {
  EXPECT_EQ(area_constant(0.0), 0.25);
  EXPECT_EQ(area_constant(1.0), 0.5);
  // Unit length, unit angle: area equals K.
  EXPECT_NEAR(area_constant(0.5), oracle::polar_area(0.5, 1.0, 1.0), 1e-12);
  EXPECT_NEAR(area_constant(0.5), 0.34665, 5e-6);
}

TEST(PetalArea, MatchesQuadrature) {
  const PetalSpec spec{0.5, kPi / 4, 2.0};
  const double expected = oracle::polar_area(0.5, kPi / 4, 2.0);
  EXPECT_NEAR(petal_area(spec), expected, 1e-8 * expected);
  EXPECT_NEAR(petal_area(spec), 1.0891, 1e-4);
  EXPECT_EQ(petal_area({0.5, 1.0, 0.0}), 0.0);
  EXPECT_DOUBLE_EQ(petal_area({0.3, 1.0, 4.0}), 4.0 * petal_area({0.3, 1.0, 2.0}));
  EXPECT_THROW(petal_area({1.0, 1.0, 1.0}), ValidationError);
  EXPECT_THROW(petal_area({0.5, 0.0, 1.0}), ValidationError);
}

TEST(Hamilton, ReferenceModels) {
  EXPECT_EQ(hamilton_apportion(kMale, 10).etas, (std::vector<int>{4, 3, 2, 1}));
  EXPECT_EQ(hamilton_apportion(kFemale, 10).etas, (std::vector<int>{5, 3, 2, 0}));
  EXPECT_EQ(hamilton_apportion(kFemale, 11).etas, (std::vector<int>{5, 3, 2, 1}));
  EXPECT_EQ(hamilton_apportion(std::vector<double>{1, 1, 1, 1}, 4).etas,
            (std::vector<int>{1, 1, 1, 1}));
}

TEST(Hamilton, ReferenceModelsAgreeWithExhaustiveSearch) {
  for (const auto& [b, n] :
       {std::pair{kMale, 10}, std::pair{kFemale, 10}, std::pair{kFemale, 11}}) {
    const auto [best, arg] = oracle::best_allocation(b, n);
    EXPECT_EQ(hamilton_apportion(b, n).etas, arg);
  }
}

TEST(Hamilton, TiesGoToLowerIndex) {
  EXPECT_EQ(hamilton_apportion(std::vector<double>{1, 1, 1}, 4).etas, (std::vector<int>{2, 1, 1}));
  EXPECT_EQ(hamilton_apportion(std::vector<double>{1, 1, 1}, 5).etas, (std::vector<int>{2, 2, 1}));
}

TEST(Hamilton, Errors) {
  EXPECT_THROW(hamilton_apportion(std::vector<double>{0, 0, 0}, 4), ValidationError);
  EXPECT_THROW(hamilton_apportion(std::vector<double>{1, -1}, 4), ValidationError);
  EXPECT_THROW(hamilton_apportion(std::vector<double>{1, 1}, 0), ValidationError);
}

TEST(Hamilton, QuotaBoundProperty) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(1, 8), lobes(4, 64);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> b(static_cast<std::size_t>(len(rng)));
    for (double& x : b) x = w(rng);
    b[0] += 1e-3;
    const int n = lobes(rng);
    const LobeAllocation alloc = hamilton_apportion(b, n);
    double norm = 0.0;
    for (double x : b) norm += x;
    int total = 0;
    for (std::size_t i = 0; i < b.size(); ++i) {
      const double gamma = 2 * kPi * alloc.etas[i] / n;
      const double beta = 2 * kPi * b[i] / norm;
      EXPECT_LT(std::abs(gamma - beta), 2 * kPi / n);
      total += alloc.etas[i];
    }
    EXPECT_EQ(total, n);
  }
}

TEST(Hamilton, OptimalAgainstExhaustiveSearch) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  for (int n_parts = 1; n_parts <= 4; ++n_parts) {
    for (int n = 1; n <= 15; ++n) {
      for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> b(static_cast<std::size_t>(n_parts));
        for (double& x : b) x = w(rng);
        const auto [best, arg] = oracle::best_allocation(b, n);
        const LobeAllocation alloc = hamilton_apportion(b, n);
        EXPECT_NEAR(oracle::angle_deviation(alloc.etas, b), best, 1e-12);
      }
    }
  }
}

TEST(Quantized, ReferenceApproximations) {
  const auto male = quantized_coefficients(kMale, hamilton_apportion(kMale, 10));
  const std::vector<double> male_exact = {0.0816, 0.0612, 0.0408, 0.0204};
  const std::vector<double> male_rounded = {0.082, 0.061, 0.041, 0.020};
  const auto female = quantized_coefficients(kFemale, hamilton_apportion(kFemale, 11));
  const std::vector<double> female_expected = {0.057, 0.034, 0.023, 0.011};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(male[i], male_exact[i], 1e-12);
    EXPECT_NEAR(male[i], male_rounded[i], 5e-4);
    EXPECT_NEAR(female[i], female_expected[i], 5e-4);
    const int etas[] = {5, 3, 2, 1};
    EXPECT_NEAR(female[i], 0.126 * etas[i] / 11, 1e-12);
  }
}

TEST(Quantized, ExactQuotasReturnInput) {
  const std::vector<double> b = {0.25, 0.25, 0.25, 0.25};
  const auto q = quantized_coefficients(b, hamilton_apportion(b, 8));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(q[i], b[i]);
  EXPECT_THROW(quantized_coefficients(b, LobeAllocation{3, {1, 1, 1}}), ValidationError);
}

TEST(Multilobe, AreaFormula) {
  EXPECT_EQ(multilobe_area({10, 0.5, 0, 1.0}), 0.0);
  for (int eta = 1; eta <= 11; ++eta) {
    const MultilobePetalSpec m{11, 0.5, eta, 0.8};
    const double gamma = 2 * kPi * eta / 11;
    EXPECT_NEAR(multilobe_area(m), petal_area({0.5, gamma, 0.8}), 1e-14);
    // Stitched lobes integrated one at a time.
    const double stitched = eta * oracle::polar_area(0.5, 2 * kPi / 11, 0.8);
    EXPECT_NEAR(multilobe_area(m), stitched, 1e-8 * stitched);
  }
  EXPECT_THROW(multilobe_area({10, 0.5, 11, 1.0}), ValidationError);
}

FlowerLayout male_flower(const std::vector<double>& z, FlowerOptions opts = {}) {
  return build_flower(kMale, z, kIds, opts);
}

TEST(Flower, MaleAngles) {
  const FlowerLayout f = male_flower({0.3, 0.6, 1.0, 0.2});
  const double fractions[] = {0.4, 0.3, 0.2, 0.1};
  double sum = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(f.petals[i].gamma, 2 * kPi * fractions[i], 1e-14);
    EXPECT_EQ(f.petals[i].factor_id, kIds[i]);
    sum += f.petals[i].gamma;
  }
  EXPECT_NEAR(sum, 2 * kPi, 1e-12);
  EXPECT_DOUBLE_EQ(f.petals[1].length, std::sqrt(0.6));
}

TEST(Flower, ZeroValueKeepsAngularSpan) {
  const FlowerLayout f = male_flower({0.0, 0.5, 0.0, 1.0});
  EXPECT_EQ(f.petals[0].length, 0.0);
  EXPECT_EQ(f.petals[0].eta, 4);
}

TEST(Flower, EqualLengthsGiveAreasProportionalToLobes) {
  const FlowerLayout f = male_flower({1, 1, 1, 1});
  for (const FlowerPetal& p : f.petals) {
    EXPECT_EQ(p.length, 1.0);
    EXPECT_NEAR(multilobe_area({f.total_lobes, f.kappa, p.eta, p.length}) / p.eta,
                multilobe_area({f.total_lobes, f.kappa, 1, 1.0}), 1e-14);
  }
}

TEST(Flower, OrderingAndOffsetTileTheCircle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> b(4), z(4);
    for (double& x : b) x = u(rng);
    for (double& x : z) x = u(rng);
    FlowerOptions opts;
    opts.total_lobes = 4 + trial % 20;
    opts.ordering = {3, 1, 0, 2};
    std::shuffle(opts.ordering.begin(), opts.ordering.end(), rng);
    opts.start_offset = u(rng) * 2 * kPi;
    const FlowerLayout f = build_flower(b, z, kIds, opts);
    double cursor = opts.start_offset;
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_EQ(f.petals[k].factor_id, kIds[opts.ordering[k]]);
      EXPECT_NEAR(f.petals[k].start_angle, cursor, 1e-12);
      cursor += f.petals[k].gamma;
      if (k > 0 && f.petals[k - 1].gamma > 0) {
        EXPECT_GT(f.petals[k].start_angle, f.petals[k - 1].start_angle);
      }
    }
    EXPECT_NEAR(cursor, opts.start_offset + 2 * kPi, 1e-12);
  }
}

TEST(Flower, Errors) {
  EXPECT_THROW(build_flower(std::vector<double>{0, 0, 0, 0}, std::vector<double>{1, 1, 1, 1}, kIds),
               ValidationError);
  EXPECT_THROW(male_flower({-0.1, 0.5, 0.5, 0.5}), ValidationError);
  FlowerOptions bad;
  bad.ordering = {0, 0, 1, 2};
  EXPECT_THROW(male_flower({0.1, 0.5, 0.5, 0.5}, bad), ValidationError);
}

TEST(AreaProportionality, IntegerWeightsRandomValues) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> w(0, 9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> b(4), z(4);
    for (double& x : b) x = w(rng);
    b[trial % 4] += 1.0;
    for (double& x : z) x = u(rng);
    double norm = 0.0;
    for (double x : b) norm += x;
    FlowerOptions opts;
    opts.total_lobes = static_cast<int>(norm);
    const FlowerLayout f = build_flower(b, z, kIds, opts);
    const double expected = 2 * kPi * area_constant(0.5) / norm;
    for (std::size_t i = 0; i < 4; ++i) {
      if (b[i] * z[i] == 0.0) continue;
      const FlowerPetal& p = f.petals[i];
      const double area = multilobe_area({f.total_lobes, f.kappa, p.eta, p.length});
      EXPECT_NEAR(area / (b[i] * z[i]), expected, 1e-9 * expected);
    }
  }
}

TEST(Outline, PointCountAndClosure) {
  FlowerOptions opts;
  opts.total_lobes = 4;
  const FlowerLayout f =
      build_flower(std::vector<double>{1, 1, 1, 1}, std::vector<double>{1, 1, 1, 1}, kIds, opts);
  const auto pts = sample_outline(f, f.petals[0], 64);
  EXPECT_EQ(pts.size(), 66u);
  EXPECT_EQ(pts.front(), (Point{0, 0}));
  EXPECT_EQ(pts.back(), (Point{0, 0}));
  EXPECT_THROW(sample_outline(f, f.petals[0], 7), ValidationError);
}

TEST(Outline, ShoelaceMatchesMultilobeArea) {
  const FlowerLayout f = male_flower({0.7, 0.4, 1.0, 0.9});
  for (const FlowerPetal& p : f.petals) {
    const double exact = multilobe_area({f.total_lobes, f.kappa, p.eta, p.length});
    EXPECT_NEAR(oracle::shoelace(sample_outline(f, p, 4096)), exact, 1e-3 * exact);
    // Default sampling stays under 0.01 %.
    EXPECT_NEAR(oracle::shoelace(sample_outline(f, p)), exact, 1e-4 * exact);
  }
}

TEST(Outline, RotationIsAnIsometry) {
  const double delta = 0.731;
  FlowerOptions rotated;
  rotated.start_offset = delta;
  const FlowerLayout a = male_flower({0.7, 0.4, 1.0, 0.9});
  const FlowerLayout b = male_flower({0.7, 0.4, 1.0, 0.9}, rotated);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto pa = sample_outline(a, a.petals[i], 32);
    const auto pb = sample_outline(b, b.petals[i], 32);
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t k = 0; k < pa.size(); ++k) {
      // Clockwise rotation by delta in y-up coordinates.
      const double x = pa[k].x * std::cos(delta) + pa[k].y * std::sin(delta);
      const double y = -pa[k].x * std::sin(delta) + pa[k].y * std::cos(delta);
      EXPECT_NEAR(pb[k].x, x, 1e-12);
      EXPECT_NEAR(pb[k].y, y, 1e-12);
    }
  }
}

TEST(Outline, LobeSeamsSitAtKappaRadius) {
  const FlowerLayout f = male_flower({0.7, 0.4, 1.0, 0.9});
  const int samples = 16;
  for (const FlowerPetal& p : f.petals) {
    const auto pts = sample_outline(f, p, samples);
    for (int j = 0; j <= p.eta; ++j) {
      const Point& seam = pts[static_cast<std::size_t>(1 + j * (samples - 1))];
      EXPECT_NEAR(std::hypot(seam.x, seam.y), f.kappa * p.length, 1e-15);
    }
  }
  // Adjacent petals meet on the same ray.
  for (std::size_t i = 0; i + 1 < f.petals.size(); ++i) {
    const Point end = sample_outline(f, f.petals[i], samples).rbegin()[1];
    const Point start = sample_outline(f, f.petals[i + 1], samples)[1];
    EXPECT_NEAR(std::atan2(end.x, end.y), std::atan2(start.x, start.y), 1e-12);
  }
}

TEST(Outline, CounterClockwiseMirrors) {
  FlowerOptions ccw;
  ccw.winding = Winding::kCounterClockwise;
  const FlowerLayout a = male_flower({0.5, 0.5, 1.0, 0.5});
  const FlowerLayout b = male_flower({0.5, 0.5, 1.0, 0.5}, ccw);
  const auto pa = sample_outline(a, a.petals[1], 16);
  const auto pb = sample_outline(b, b.petals[1], 16);
  for (std::size_t k = 0; k < pa.size(); ++k) {
    EXPECT_DOUBLE_EQ(pb[k].x, -pa[k].x);
    EXPECT_DOUBLE_EQ(pb[k].y, pa[k].y);
  }
}

}  // namespace
}  // namespace petalx
