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

// Independent reference computations used by the tests. Nothing here calls
// into the library's numerical routines.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "petalx/model_core.hpp"

namespace petalx::oracle {

inline std::string data_path(const std::string& name) {
  return std::string(PETALX_DATA_DIR) + "/" + name;
}

// Adaptive Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      double tol = 1e-13) {
  std::function<double(double, double, double, double, double, double, int)> rec =
      [&](double lo, double hi, double flo, double fmid, double fhi, double whole, int depth) {
        const double mid = 0.5 * (lo + hi);
        const double lm = 0.5 * (lo + mid);
        const double rm = 0.5 * (mid + hi);
        const double flm = f(lm);
        const double frm = f(rm);
        const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
        const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
        if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) {
          return left + right + (left + right - whole) / 15.0;
        }
        return rec(lo, mid, flo, flm, fmid, left, depth - 1) +
               rec(mid, hi, fmid, frm, fhi, right, depth - 1);
      };
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  return rec(a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), 50);
}

// Area inside a polar curve r(theta) on [0, beta]: 1/2 integral r^2.
inline double polar_area(double kappa, double beta, double a) {
  auto r = [&](double t) {
    return kappa * a + (1.0 - kappa) * a * std::sin(std::numbers::pi * t / beta);
  };
  return simpson([&](double t) { return 0.5 * r(t) * r(t); }, 0.0, beta);
}

template <class P>
double shoelace(const std::vector<P>& pts) {
  double twice = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const P& p = pts[i];
    const P& q = pts[(i + 1) % pts.size()];
    twice += p.x * q.y - q.x * p.y;
  }
  return 0.5 * std::abs(twice);
}

// Brute force over every non-negative integer allocation summing to n.
inline void enumerate_allocations(int parts, int n, std::vector<int>& cur,
                                  const std::function<void(const std::vector<int>&)>& visit) {
  if (static_cast<int>(cur.size()) == parts - 1) {
    cur.push_back(n);
    visit(cur);
    cur.pop_back();
    return;
  }
  for (int k = 0; k <= n; ++k) {
    cur.push_back(k);
    enumerate_allocations(parts, n - k, cur, visit);
    cur.pop_back();
  }
}

inline double angle_deviation(const std::vector<int>& etas, const std::vector<double>& b) {
  double norm = 0.0;
  int total = 0;
  for (double x : b) norm += x;
  for (int e : etas) total += e;
  const double two_pi = 2.0 * std::numbers::pi;
  double dev = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    dev += std::abs(two_pi * etas[i] / total - two_pi * b[i] / norm);
  }
  return dev;
}

inline std::pair<double, std::vector<int>> best_allocation(const std::vector<double>& b, int n) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> arg;
  std::vector<int> cur;
  enumerate_allocations(static_cast<int>(b.size()), n, cur, [&](const std::vector<int>& e) {
    const double d = angle_deviation(e, b);
    if (d < best - 1e-12) {
      best = d;
      arg = e;
    }
  });
  return {best, arg};
}

// Gaussian elimination with partial pivoting on (Z^T Z) a = Z^T y.
inline std::vector<double> normal_equation_solve(const std::vector<std::array<double, 4>>& z,
                                                 const std::vector<double>& y) {
  double m[4][5] = {};
  for (std::size_t r = 0; r < z.size(); ++r) {
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) m[i][j] += z[r][i] * z[r][j];
      m[i][4] += z[r][i] * y[r];
    }
  }
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    }
    for (int c = 0; c < 5; ++c) std::swap(m[col][c], m[piv][c]);
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (int c = col; c < 5; ++c) m[r][c] -= f * m[col][c];
    }
  }
  std::vector<double> a(4);
  for (int i = 0; i < 4; ++i) a[i] = m[i][4] / m[i][i];
  return a;
}

// Direct transcription of the moderate-region SCORE2 formula with the
// published coefficients typed in independently of the data file.
inline double score2_transcribed(bool male, double age, bool smoker, double sbp, double tchol,
                                 double hdl) {
  const double cage = (age - 60.0) / 5.0;
  const double csbp = (sbp - 120.0) / 20.0;
  const double ctchol = tchol - 6.0;
  const double chdl = (hdl - 1.3) / 0.5;
  const double smk = smoker ? 1.0 : 0.0;
  double lp, s0, s1, s2;
  if (male) {
    lp = 0.3742 * cage + 0.6012 * smk + 0.2777 * csbp + 0.1458 * ctchol - 0.2698 * chdl -
         0.0755 * cage * smk - 0.0255 * cage * csbp - 0.0281 * cage * ctchol + 0.0426 * cage * chdl;
    s0 = 0.9605;
    s1 = -0.1565;
    s2 = 0.8009;
  } else {
    lp = 0.4648 * cage + 0.7744 * smk + 0.3131 * csbp + 0.1002 * ctchol - 0.2606 * chdl -
         0.1088 * cage * smk - 0.0277 * cage * csbp - 0.0226 * cage * ctchol + 0.0613 * cage * chdl;
    s0 = 0.9776;
    s1 = -0.3143;
    s2 = 0.7701;
  }
  const double uncalibrated = 1.0 - std::pow(s0, std::exp(lp));
  return 1.0 - std::exp(-std::exp(s1 + s2 * std::log(-std::log(1.0 - uncalibrated))));
}

inline PatientRecord random_patient(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> age(45.0, 70.0), sbp(100.0, 180.0), hdl(0.7, 2.5),
      nh(3.0, 7.0), coin(0.0, 1.0);
  PatientRecord p;
  p.sex = coin(rng) < 0.5 ? Sex::kMale : Sex::kFemale;
  p.age = age(rng);
  p.sbp = sbp(rng);
  p.smoking = coin(rng) < 0.4;
  do {
    p.hdl_chol = hdl(rng);
    p.total_chol = p.hdl_chol + nh(rng);
  } while (p.total_chol > 9.0);
  return p;
}

// Minimal XML check: balanced, correctly nested tags, quoted attributes and
// a single root element. Enough for the SVG the renderer writes.
inline bool xml_well_formed(const std::string& doc, std::string* why = nullptr) {
  auto fail = [&](const std::string& msg) {
    if (why != nullptr) *why = msg;
    return false;
  };
  std::vector<std::string> stack;
  int roots = 0;
  std::size_t i = 0;
  while ((i = doc.find('<', i)) != std::string::npos) {
    const std::size_t end = doc.find('>', i);
    if (end == std::string::npos) return fail("unterminated tag");
    std::string tag = doc.substr(i + 1, end - i - 1);
    i = end + 1;
    if (tag.empty()) return fail("empty tag");
    if (tag[0] == '?' || tag[0] == '!') continue;
    if (std::count(tag.begin(), tag.end(), '"') % 2 != 0) return fail("unbalanced quotes");
    if (tag[0] == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return fail("mismatched </" + tag);
      stack.pop_back();
      continue;
    }
    const bool self_closing = tag.back() == '/';
    const std::string name = tag.substr(0, tag.find_first_of(" \t\n/"));
    if (stack.empty()) ++roots;
    if (!self_closing) stack.push_back(name);
  }
  if (!stack.empty()) return fail("unclosed <" + stack.back() + ">");
  if (roots != 1) return fail("expected one root element");
  return true;
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Vertices of an "M x y L x y ... [Z]" path.
inline std::vector<Vec2> path_points(const std::string& d) {
  std::istringstream in(d);
  std::vector<Vec2> pts;
  std::string tok;
  while (in >> tok) {
    if (tok == "Z") break;
    Vec2 p;
    p.x = std::stod(tok.substr(1));
    in >> p.y;
    pts.push_back(p);
  }
  return pts;
}

// Value of `attr` on the element carrying id="<id>", or "" when absent.
inline std::string attr_of(const std::string& doc, const std::string& id, const std::string& attr) {
  const std::size_t at = doc.find("id=\"" + id + "\"");
  if (at == std::string::npos) return "";
  const std::size_t open = doc.rfind('<', at);
  const std::size_t close = doc.find('>', at);
  const std::string tag = doc.substr(open, close - open);
  std::smatch m;
  if (std::regex_search(tag, m, std::regex("\\s" + attr + "=\"([^\"]*)\""))) return m[1];
  return "";
}

inline int count_of(const std::string& doc, const std::string& needle) {
  int n = 0;
  for (std::size_t i = doc.find(needle); i != std::string::npos; i = doc.find(needle, i + 1)) {
    ++n;
  }
  return n;
}

inline double cross(Vec2 o, Vec2 a, Vec2 b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Proper crossing of segments ab and cd (touching endpoints excluded).
inline bool segments_cross(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double d1 = cross(c, d, a), d2 = cross(c, d, b);
  const double d3 = cross(a, b, c), d4 = cross(a, b, d);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

// True when no two non-adjacent edges of the closed polygon cross.
inline bool simple_polygon(const std::vector<Vec2>& pts) {
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      if (segments_cross(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n])) return false;
    }
  }
  return true;
}

}  // namespace petalx::oracle
