// Copyright 2026 The cnsc-sim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Test-only reference computations. Each one is deliberately naive and must
// not call into the implementation path it is used to check.

#ifndef CNSC_TESTS_ORACLES_H_
#define CNSC_TESTS_ORACLES_H_

#include <cmath>
#include <utility>
#include <vector>

#include "cnsc/orbital.h"
#include "cnsc/util.h"

namespace cnsc::testing_oracles {

inline Vec3 Cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

// Right ascension of the ascending node recovered from the orbit normal.
inline double PlaneRaan(const Ephemeris& e, double t) {
  const Vec3 n = Cross(Propagate(e, t), Propagate(e, t + 1.0));
  return std::atan2(n.x, -n.y);
}

// Period measured by accumulating swept angle between successive samples.
inline double MeasuredPeriod(const Ephemeris& e) {
  const double dt = 5.0;
  double swept = 0.0;
  double t = 0.0;
  Vec3 prev = Propagate(e, 0.0);
  while (true) {
    const Vec3 cur = Propagate(e, t + dt);
    const double cosang = prev.Dot(cur) / (prev.Norm() * cur.Norm());
    const double step = std::acos(std::max(-1.0, std::min(1.0, cosang)));
    if (swept + step >= 2 * kPi) {
      return t + dt * (2 * kPi - swept) / step;
    }
    swept += step;
    t += dt;
    prev = cur;
  }
}

inline Vec3 RandomPointOnShell(Rng& rng, double radius) {
  const double z = rng.Uniform(-1.0, 1.0);
  const double phi = rng.Uniform(0.0, 2 * kPi);
  const double s = std::sqrt(1.0 - z * z);
  return {radius * s * std::cos(phi), radius * s * std::sin(phi), radius * z};
}

// Samples `samples` evenly spaced points along the chord and reports whether
// all of them lie outside the Earth sphere.
inline bool ChordSampledVisible(const Vec3& a, const Vec3& b, int samples) {
  for (int i = 0; i < samples; ++i) {
    const double u = static_cast<double>(i) / (samples - 1);
    const Vec3 p{a.x + (b.x - a.x) * u, a.y + (b.y - a.y) * u,
                 a.z + (b.z - a.z) * u};
    if (std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z) <= kEarthRadiusKm) {
      return false;
    }
  }
  return true;
}

// Elevation computed from first principles in the Earth-fixed frame.
inline double NaiveElevationDeg(const Ephemeris& sat,
                                const GroundStationSpec& gs, double t) {
  const double lat = gs.latitude_deg * kPi / 180.0;
  const double lon = gs.longitude_deg * kPi / 180.0;
  const Vec3 site{kEarthRadiusKm * std::cos(lat) * std::cos(lon),
                  kEarthRadiusKm * std::cos(lat) * std::sin(lon),
                  kEarthRadiusKm * std::sin(lat)};
  const Vec3 sat_ef = InertialToEarthFixed(Propagate(sat, t), t);
  const Vec3 d = sat_ef - site;
  const Vec3 up{std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon),
                std::sin(lat)};
  return std::asin(d.Dot(up) / d.Norm()) * 180.0 / kPi;
}

inline std::vector<std::pair<double, double>> ScanGroundWindows(
    const Ephemeris& sat, const GroundStationSpec& gs, double horizon,
    double step) {
  std::vector<std::pair<double, double>> out;
  double open = -1.0;
  for (double t = 0.0; t < horizon; t += step) {
    const bool vis = NaiveElevationDeg(sat, gs, t) >= gs.min_elevation_deg;
    if (vis && open < 0.0) open = t;
    if (!vis && open >= 0.0) {
      out.emplace_back(open, t);
      open = -1.0;
    }
  }
  if (open >= 0.0) out.emplace_back(open, horizon);
  return out;
}

}  // namespace cnsc::testing_oracles

#endif  // CNSC_TESTS_ORACLES_H_
