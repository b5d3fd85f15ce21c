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

// Constellation geometry: Walker shells on circular two-body orbits, ground
// stations on a spherical rotating Earth, and the discretized contact plan
// (inter-satellite, satellite-ground and sensing-target access windows).

#ifndef CNSC_ORBITAL_H_
#define CNSC_ORBITAL_H_

#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cnsc/types.h"

namespace cnsc {

inline constexpr double kEarthRadiusKm = 6378.137;
inline constexpr double kMuKm3PerS2 = 398600.4418;
inline constexpr double kEarthRotationRadPerS = 7.2921159e-5;
inline constexpr double kSpeedOfLightKmPerS = 299792.458;
inline constexpr double kGeoAltitudeKm = 35786.0;
inline constexpr double kPi = 3.14159265358979323846;

inline double DegToRad(double deg) { return deg * kPi / 180.0; }
inline double RadToDeg(double rad) { return rad * 180.0 / kPi; }

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double Dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double Norm() const { return std::sqrt(Dot(*this)); }
};

inline double Distance(const Vec3& a, const Vec3& b) { return (a - b).Norm(); }

struct OrbitShellSpec {
  Regime regime = Regime::kLeo;
  double altitude_km = 550.0;
  double inclination_deg = 53.0;
  int plane_count = 1;
  int sats_per_plane = 1;
  // Walker phasing: extra in-plane anomaly added per plane index.
  double phasing_offset_deg = 0.0;
  double epoch_s = 0.0;

  // Throws ValidationError on a malformed shell.
  void Validate() const;
  int SatelliteCount() const { return plane_count * sats_per_plane; }
};

// Circular-orbit elements of one satellite.
struct Ephemeris {
  NodeId id = kNoNode;
  Regime regime = Regime::kLeo;
  int shell = 0;
  int plane = 0;
  int slot = 0;
  double radius_km = 0.0;
  double inclination_rad = 0.0;
  double raan_rad = 0.0;
  double anomaly_at_epoch_rad = 0.0;
  double mean_motion_rad_per_s = 0.0;
  double epoch_s = 0.0;

  double PeriodS() const { return 2.0 * kPi / mean_motion_rad_per_s; }
};

// Kepler's third law for a circular orbit of the given radius.
double KeplerPeriodS(double radius_km);

// Satellites of all shells, numbered consecutively from `first_id`. Planes
// get evenly spaced right ascensions, slots evenly spaced anomalies. GEO
// shells are placed on the equator with mean motion equal to the Earth's
// rotation rate so they stay fixed in the Earth frame.
std::vector<Ephemeris> GenerateConstellation(
    std::span<const OrbitShellSpec> shells, NodeId first_id = 0);

// Earth-centered inertial position at time t (seconds since scenario start).
Vec3 Propagate(const Ephemeris& ephemeris, double t);

// Rotates an inertial vector into the Earth-fixed frame at time t.
Vec3 InertialToEarthFixed(const Vec3& eci, double t);

// Earth-fixed longitude of an inertial position, radians in (-pi, pi].
double EarthFixedLongitude(const Vec3& eci, double t);

struct GroundStationSpec {
  std::string name;
  double latitude_deg = 0.0;
  double longitude_deg = 0.0;
  double min_elevation_deg = 10.0;

  void Validate() const;
};

// Points of interest that sensing stages must observe.
struct SensingTarget {
  std::string name;
  double latitude_deg = 0.0;
  double longitude_deg = 0.0;
};

Vec3 SurfacePosition(double latitude_deg, double longitude_deg, double t);
Vec3 StationPosition(const GroundStationSpec& station, double t);

// Elevation of `target` above the local horizon at `site`, degrees.
double ElevationDeg(const Vec3& site, const Vec3& target);

// True iff the segment a-b does not pass through the Earth sphere.
bool ChordClearsEarth(const Vec3& a, const Vec3& b);

struct VisibilityConstraint {
  enum class Kind { kSatSat, kSatGround };
  Kind kind = Kind::kSatSat;
  double min_elevation_deg = 0.0;

  static VisibilityConstraint SatSat() { return {Kind::kSatSat, 0.0}; }
  static VisibilityConstraint SatGround(double min_elevation_deg) {
    return {Kind::kSatGround, min_elevation_deg};
  }
};

// For kSatGround, `a` is the ground site and `b` the satellite.
bool Visible(const Vec3& a, const Vec3& b, const VisibilityConstraint& c);

enum class CapacitySelection { kPerPairHash, kFixedIndex };

struct CapacityConfig {
  std::vector<double> laser_bps = {5e9, 10e9, 20e9};
  std::vector<double> microwave_bps = {100e3, 200e3, 500e3};
  double ground_bps = 1e9;
  CapacitySelection selection = CapacitySelection::kPerPairHash;
  int fixed_index = 0;
  // Class used for LEO links towards MEO/GEO anchors.
  LinkClass anchor_link_class = LinkClass::kMicrowaveIsl;
  // Concurrent satellite contacts a station can serve; 0 means unlimited.
  int antennas_per_station = 0;
  // Anchor terminals per LEO satellite; each step a LEO links to this many
  // nearest visible anchors. 0 disables LEO-anchor links.
  int anchor_links_per_leo = 4;

  void Validate() const;
  double Select(LinkClass link_class, NodeId a, NodeId b) const;
};

struct ContactWindow {
  NodeId a = kNoNode;  // a < b
  NodeId b = kNoNode;
  double start = 0.0;
  double end = 0.0;
  LinkClass link_class = LinkClass::kLaserIsl;
  double capacity_bps = 0.0;

  bool Contains(double t) const { return start <= t && t < end; }
  bool operator==(const ContactWindow&) const = default;
};

struct AccessWindow {
  int target = 0;
  NodeId satellite = kNoNode;
  double start = 0.0;
  double end = 0.0;
};

struct ContactPlanOptions {
  double horizon_s = 6 * 3600.0;
  double step_s = 10.0;
  CapacityConfig capacity;
  bool leo_grid_isl = true;
  // Laser links between every pair of mutually visible MEO/GEO anchors.
  bool anchor_mesh = true;
  double sensing_min_elevation_deg = 20.0;
};

// Immutable result of contact-plan generation plus the geometry needed to
// answer propagation-delay and lookup queries. Station ids follow the
// satellites: station i has id satellites().size() + i.
class ContactPlan {
 public:
  ContactPlan() = default;
  ContactPlan(std::vector<Ephemeris> satellites,
              std::vector<GroundStationSpec> stations,
              std::vector<SensingTarget> targets,
              std::vector<ContactWindow> windows,
              std::vector<AccessWindow> accesses, double horizon_s);

  const std::vector<Ephemeris>& satellites() const { return satellites_; }
  const std::vector<GroundStationSpec>& stations() const { return stations_; }
  const std::vector<SensingTarget>& targets() const { return targets_; }
  const std::vector<ContactWindow>& windows() const { return windows_; }
  const std::vector<AccessWindow>& accesses() const { return accesses_; }
  double horizon_s() const { return horizon_s_; }

  int NodeCount() const {
    return static_cast<int>(satellites_.size() + stations_.size());
  }
  bool IsStation(NodeId id) const {
    return id >= static_cast<NodeId>(satellites_.size()) && id < NodeCount();
  }
  NodeId StationId(int index) const {
    return static_cast<NodeId>(satellites_.size()) + index;
  }
  Regime RegimeOf(NodeId id) const;

  Vec3 Position(NodeId id, double t) const;
  double DistanceKm(NodeId a, NodeId b, double t) const;
  double PropagationDelayS(const ContactWindow& w, double t) const;

  // Window indices touching `node`, sorted by (start, index).
  std::span<const int> WindowsOf(NodeId node) const;
  // Window indices of the unordered pair, sorted by start.
  std::span<const int> PairWindows(NodeId a, NodeId b) const;
  // Window of the pair open at t, if any.
  std::optional<int> OpenWindow(NodeId a, NodeId b, double t) const;
  // First window of the pair with end > t (open now or opening later).
  std::optional<int> NextWindow(NodeId a, NodeId b, double t) const;
  // Longest window touching `node`; bounds backward scans.
  double MaxWindowLength(NodeId node) const;

  // Access windows of a target, sorted by start.
  std::span<const int> AccessesOf(int target) const;

  // CSV: pair_a,pair_b,class,start_s,end_s,capacity_bps
  void WriteCsv(std::ostream& out) const;

 private:
  std::vector<Ephemeris> satellites_;
  std::vector<GroundStationSpec> stations_;
  std::vector<SensingTarget> targets_;
  std::vector<ContactWindow> windows_;
  std::vector<AccessWindow> accesses_;
  double horizon_s_ = 0.0;

  std::vector<std::vector<int>> by_node_;
  std::vector<double> max_len_by_node_;
  // Pair index: sorted (key, window indices) for binary search.
  std::vector<std::pair<uint64_t, std::vector<int>>> by_pair_;
  std::vector<std::vector<int>> by_target_;
};

// Scans [0, horizon) at `step` resolution and returns maximal visibility
// intervals for every eligible pair: LEO grid neighbours (laser), anchor
// mesh (laser), LEO to its nearest visible anchors, and satellite-ground
// subject to station antenna limits. Deterministic for identical inputs.
ContactPlan ComputeContactPlan(std::vector<Ephemeris> satellites,
                               std::vector<GroundStationSpec> stations,
                               std::vector<SensingTarget> targets,
                               const ContactPlanOptions& options);

}  // namespace cnsc

#endif  // CNSC_ORBITAL_H_
