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

#include "cnsc/orbital.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <utility>

#include <fmt/format.h>

#include "cnsc/util.h"

namespace cnsc {

void OrbitShellSpec::Validate() const {
  if (!(altitude_km > 0.0)) {
    throw ValidationError(fmt::format("shell altitude must be > 0 km, got {}",
                                      altitude_km));
  }
  if (plane_count < 1 || sats_per_plane < 1) {
    throw ValidationError(fmt::format(
        "shell must contain satellites (plane_count={}, sats_per_plane={})",
        plane_count, sats_per_plane));
  }
  if (regime == Regime::kGround) {
    throw ValidationError("a shell cannot have the GROUND regime");
  }
  if (regime == Regime::kGeo &&
      (altitude_km != kGeoAltitudeKm || inclination_deg != 0.0)) {
    throw ValidationError(fmt::format(
        "GEO shell must have altitude {} km and inclination 0 (got {} km, {} "
        "deg)",
        kGeoAltitudeKm, altitude_km, inclination_deg));
  }
}

double KeplerPeriodS(double radius_km) {
  return 2.0 * kPi * std::sqrt(radius_km * radius_km * radius_km / kMuKm3PerS2);
}

std::vector<Ephemeris> GenerateConstellation(
    std::span<const OrbitShellSpec> shells, NodeId first_id) {
  std::vector<Ephemeris> out;
  NodeId next = first_id;
  for (size_t s = 0; s < shells.size(); ++s) {
    const OrbitShellSpec& shell = shells[s];
    shell.Validate();
    const double radius = kEarthRadiusKm + shell.altitude_km;
    const bool geo = shell.regime == Regime::kGeo;
    const double n = geo ? kEarthRotationRadPerS
                         : std::sqrt(kMuKm3PerS2 / (radius * radius * radius));
    const int total = shell.SatelliteCount();
    for (int p = 0; p < shell.plane_count; ++p) {
      for (int k = 0; k < shell.sats_per_plane; ++k) {
        Ephemeris e;
        e.id = next++;
        e.regime = shell.regime;
        e.shell = static_cast<int>(s);
        e.plane = p;
        e.slot = k;
        e.radius_km = radius;
        e.inclination_rad = DegToRad(shell.inclination_deg);
        e.mean_motion_rad_per_s = n;
        e.epoch_s = shell.epoch_s;
        if (geo) {
          // One equatorial ring regardless of the plane split.
          const int index = p * shell.sats_per_plane + k;
          e.raan_rad = 0.0;
          e.anomaly_at_epoch_rad = 2.0 * kPi * index / total;
        } else {
          e.raan_rad = 2.0 * kPi * p / shell.plane_count;
          e.anomaly_at_epoch_rad = 2.0 * kPi * k / shell.sats_per_plane +
                                   p * DegToRad(shell.phasing_offset_deg);
        }
        out.push_back(e);
      }
    }
  }
  return out;
}

Vec3 Propagate(const Ephemeris& e, double t) {
  const double u = e.anomaly_at_epoch_rad + e.mean_motion_rad_per_s * (t - e.epoch_s);
  const double cu = std::cos(u), su = std::sin(u);
  const double co = std::cos(e.raan_rad), so = std::sin(e.raan_rad);
  const double ci = std::cos(e.inclination_rad), si = std::sin(e.inclination_rad);
  return {e.radius_km * (co * cu - so * su * ci),
          e.radius_km * (so * cu + co * su * ci), e.radius_km * (su * si)};
}

Vec3 InertialToEarthFixed(const Vec3& eci, double t) {
  const double theta = kEarthRotationRadPerS * t;
  const double c = std::cos(theta), s = std::sin(theta);
  return {c * eci.x + s * eci.y, -s * eci.x + c * eci.y, eci.z};
}

double EarthFixedLongitude(const Vec3& eci, double t) {
  const Vec3 ef = InertialToEarthFixed(eci, t);
  return std::atan2(ef.y, ef.x);
}

void GroundStationSpec::Validate() const {
  if (std::abs(latitude_deg) > 90.0) {
    throw ValidationError(fmt::format("station '{}': |latitude| must be <= 90",
                                      name));
  }
  if (min_elevation_deg < 0.0 || min_elevation_deg >= 90.0) {
    throw ValidationError(fmt::format(
        "station '{}': min_elevation must be in [0, 90), got {}", name,
        min_elevation_deg));
  }
}

Vec3 SurfacePosition(double latitude_deg, double longitude_deg, double t) {
  const double lat = DegToRad(latitude_deg);
  const double lon = DegToRad(longitude_deg) + kEarthRotationRadPerS * t;
  return {kEarthRadiusKm * std::cos(lat) * std::cos(lon),
          kEarthRadiusKm * std::cos(lat) * std::sin(lon),
          kEarthRadiusKm * std::sin(lat)};
}

Vec3 StationPosition(const GroundStationSpec& station, double t) {
  return SurfacePosition(station.latitude_deg, station.longitude_deg, t);
}

double ElevationDeg(const Vec3& site, const Vec3& target) {
  const Vec3 d = target - site;
  const double range = d.Norm();
  const double up = site.Norm();
  if (range == 0.0 || up == 0.0) return 90.0;
  const double s = std::clamp(d.Dot(site) / (range * up), -1.0, 1.0);
  return RadToDeg(std::asin(s));
}

bool ChordClearsEarth(const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.Dot(ab);
  double u = 0.0;
  if (len2 > 0.0) u = std::clamp(-a.Dot(ab) / len2, 0.0, 1.0);
  const Vec3 closest = a + ab * u;
  return closest.Norm() > kEarthRadiusKm;
}

bool Visible(const Vec3& a, const Vec3& b, const VisibilityConstraint& c) {
  if (c.kind == VisibilityConstraint::Kind::kSatSat) {
    return ChordClearsEarth(a, b);
  }
  return ElevationDeg(a, b) >= c.min_elevation_deg;
}

void CapacityConfig::Validate() const {
  if (laser_bps.empty() || microwave_bps.empty()) {
    throw ValidationError("capacity sets must be non-empty");
  }
  for (double v : laser_bps) {
    if (!(v > 0)) throw ValidationError("laser capacities must be > 0");
  }
  for (double v : microwave_bps) {
    if (!(v > 0)) throw ValidationError("microwave capacities must be > 0");
  }
  if (!(ground_bps > 0)) throw ValidationError("ground capacity must be > 0");
  if (selection == CapacitySelection::kFixedIndex &&
      (fixed_index < 0 ||
       fixed_index >= static_cast<int>(std::min(laser_bps.size(),
                                                microwave_bps.size())))) {
    throw ValidationError("capacity fixed_index out of range");
  }
  if (antennas_per_station < 0 || anchor_links_per_leo < 0) {
    throw ValidationError("antenna counts must be >= 0");
  }
}

double CapacityConfig::Select(LinkClass link_class, NodeId a, NodeId b) const {
  if (link_class == LinkClass::kGround) return ground_bps;
  const std::vector<double>& set =
      link_class == LinkClass::kLaserIsl ? laser_bps : microwave_bps;
  if (selection == CapacitySelection::kFixedIndex) return set[fixed_index];
  const uint64_t key = (static_cast<uint64_t>(std::min(a, b)) << 32) |
                       static_cast<uint32_t>(std::max(a, b));
  return set[SplitMix64(key) % set.size()];
}

namespace {

uint64_t PairKey(NodeId a, NodeId b) {
  if (a > b) std::swap(a, b);
  return (static_cast<uint64_t>(static_cast<uint32_t>(a)) << 32) |
         static_cast<uint32_t>(b);
}

}  // namespace

ContactPlan::ContactPlan(std::vector<Ephemeris> satellites,
                         std::vector<GroundStationSpec> stations,
                         std::vector<SensingTarget> targets,
                         std::vector<ContactWindow> windows,
                         std::vector<AccessWindow> accesses, double horizon_s)
    : satellites_(std::move(satellites)),
      stations_(std::move(stations)),
      targets_(std::move(targets)),
      windows_(std::move(windows)),
      accesses_(std::move(accesses)),
      horizon_s_(horizon_s) {
  by_node_.assign(NodeCount(), {});
  max_len_by_node_.assign(NodeCount(), 0.0);
  std::map<uint64_t, std::vector<int>> pairs;
  for (int i = 0; i < static_cast<int>(windows_.size()); ++i) {
    const ContactWindow& w = windows_[i];
    by_node_.at(w.a).push_back(i);
    by_node_.at(w.b).push_back(i);
    const double len = w.end - w.start;
    max_len_by_node_[w.a] = std::max(max_len_by_node_[w.a], len);
    max_len_by_node_[w.b] = std::max(max_len_by_node_[w.b], len);
    pairs[PairKey(w.a, w.b)].push_back(i);
  }
  auto by_start = [this](int x, int y) {
    if (windows_[x].start != windows_[y].start) {
      return windows_[x].start < windows_[y].start;
    }
    return x < y;
  };
  for (auto& list : by_node_) std::sort(list.begin(), list.end(), by_start);
  by_pair_.reserve(pairs.size());
  for (auto& [key, list] : pairs) {
    std::sort(list.begin(), list.end(), by_start);
    by_pair_.emplace_back(key, std::move(list));
  }
  by_target_.assign(targets_.size(), {});
  for (int i = 0; i < static_cast<int>(accesses_.size()); ++i) {
    by_target_.at(accesses_[i].target).push_back(i);
  }
  for (auto& list : by_target_) {
    std::sort(list.begin(), list.end(), [this](int x, int y) {
      if (accesses_[x].start != accesses_[y].start) {
        return accesses_[x].start < accesses_[y].start;
      }
      return x < y;
    });
  }
}

Regime ContactPlan::RegimeOf(NodeId id) const {
  if (IsStation(id)) return Regime::kGround;
  return satellites_.at(id).regime;
}

Vec3 ContactPlan::Position(NodeId id, double t) const {
  if (IsStation(id)) {
    return StationPosition(stations_.at(id - satellites_.size()), t);
  }
  return Propagate(satellites_.at(id), t);
}

double ContactPlan::DistanceKm(NodeId a, NodeId b, double t) const {
  return Distance(Position(a, t), Position(b, t));
}

double ContactPlan::PropagationDelayS(const ContactWindow& w, double t) const {
  return DistanceKm(w.a, w.b, t) / kSpeedOfLightKmPerS;
}

std::span<const int> ContactPlan::WindowsOf(NodeId node) const {
  if (node < 0 || node >= NodeCount()) return {};
  return by_node_[node];
}

std::span<const int> ContactPlan::PairWindows(NodeId a, NodeId b) const {
  const uint64_t key = PairKey(a, b);
  auto it = std::lower_bound(
      by_pair_.begin(), by_pair_.end(), key,
      [](const auto& entry, uint64_t k) { return entry.first < k; });
  if (it == by_pair_.end() || it->first != key) return {};
  return it->second;
}

std::optional<int> ContactPlan::NextWindow(NodeId a, NodeId b, double t) const {
  std::span<const int> list = PairWindows(a, b);
  // Windows of one pair never overlap, so ends are sorted as well.
  auto it = std::upper_bound(list.begin(), list.end(), t, [this](double v, int i) {
    return v < windows_[i].end;
  });
  if (it == list.end()) return std::nullopt;
  return *it;
}

std::optional<int> ContactPlan::OpenWindow(NodeId a, NodeId b, double t) const {
  std::optional<int> w = NextWindow(a, b, t);
  if (w && windows_[*w].Contains(t)) return w;
  return std::nullopt;
}

double ContactPlan::MaxWindowLength(NodeId node) const {
  if (node < 0 || node >= NodeCount()) return 0.0;
  return max_len_by_node_[node];
}

std::span<const int> ContactPlan::AccessesOf(int target) const {
  if (target < 0 || target >= static_cast<int>(by_target_.size())) return {};
  return by_target_[target];
}

void ContactPlan::WriteCsv(std::ostream& out) const {
  out << "pair_a,pair_b,class,start_s,end_s,capacity_bps\n";
  for (const ContactWindow& w : windows_) {
    out << fmt::format("{},{},{},{},{},{}\n", w.a, w.b, ToString(w.link_class),
                       w.start, w.end, w.capacity_bps);
  }
}

namespace {

// Tracks one visibility interval that is currently open.
struct OpenInterval {
  double since = -1.0;
  bool open() const { return since >= 0.0; }
};

struct FixedPair {
  NodeId a;
  NodeId b;
  LinkClass link_class;
  OpenInterval state;
};

int RegimeRank(Regime r) {
  switch (r) {
    case Regime::kGeo:
      return 0;
    case Regime::kMeo:
      return 1;
    default:
      return 2;
  }
}

}  // namespace

ContactPlan ComputeContactPlan(std::vector<Ephemeris> satellites,
                               std::vector<GroundStationSpec> stations,
                               std::vector<SensingTarget> targets,
                               const ContactPlanOptions& options) {
  if (!(options.horizon_s > 0.0) || !(options.step_s > 0.0)) {
    throw ValidationError("contact plan horizon and step must be > 0");
  }
  options.capacity.Validate();
  for (const auto& st : stations) st.Validate();
  const CapacityConfig& cap = options.capacity;
  const int n_sat = static_cast<int>(satellites.size());
  const int n_st = static_cast<int>(stations.size());
  const int n_tg = static_cast<int>(targets.size());
  const double horizon = options.horizon_s;
  const double step = options.step_s;
  const int steps = static_cast<int>(std::ceil(horizon / step - 1e-9));

  std::vector<ContactWindow> windows;
  std::vector<AccessWindow> accesses;

  // LEO grid: intra-plane successor plus nearest satellite in the next plane
  // at epoch.
  std::vector<FixedPair> grid;
  if (options.leo_grid_isl) {
    std::set<std::pair<NodeId, NodeId>> seen;
    std::map<std::tuple<int, int, int>, NodeId> index;
    std::map<int, std::pair<int, int>> shell_dims;
    for (const Ephemeris& e : satellites) {
      if (e.regime != Regime::kLeo) continue;
      index[{e.shell, e.plane, e.slot}] = e.id;
      auto& dims = shell_dims[e.shell];
      dims.first = std::max(dims.first, e.plane + 1);
      dims.second = std::max(dims.second, e.slot + 1);
    }
    auto add = [&](NodeId a, NodeId b) {
      if (a == b) return;
      if (a > b) std::swap(a, b);
      if (seen.insert({a, b}).second) {
        grid.push_back({a, b, LinkClass::kLaserIsl, {}});
      }
    };
    for (const Ephemeris& e : satellites) {
      if (e.regime != Regime::kLeo) continue;
      const auto [planes, slots] = shell_dims[e.shell];
      if (slots > 1) add(e.id, index[{e.shell, e.plane, (e.slot + 1) % slots}]);
      if (planes > 1) {
        const int next_plane = (e.plane + 1) % planes;
        const Vec3 here = Propagate(e, e.epoch_s);
        NodeId best = kNoNode;
        double best_d = std::numeric_limits<double>::infinity();
        for (int k = 0; k < slots; ++k) {
          const NodeId other = index[{e.shell, next_plane, k}];
          const double d = Distance(here, Propagate(satellites[other], e.epoch_s));
          if (d < best_d) {
            best_d = d;
            best = other;
          }
        }
        add(e.id, best);
      }
    }
  }

  std::vector<NodeId> anchors;
  std::vector<NodeId> leos;
  for (const Ephemeris& e : satellites) {
    if (e.regime == Regime::kMeo || e.regime == Regime::kGeo) {
      anchors.push_back(e.id);
    } else if (e.regime == Regime::kLeo) {
      leos.push_back(e.id);
    }
  }

  if (options.anchor_mesh) {
    for (size_t x = 0; x < anchors.size(); ++x) {
      for (size_t y = x + 1; y < anchors.size(); ++y) {
        grid.push_back({anchors[x], anchors[y], LinkClass::kLaserIsl, {}});
      }
    }
  }

  // Per LEO: anchors currently linked, with their open time.
  std::vector<std::vector<std::pair<NodeId, double>>> anchor_links(n_sat);
  // Ground contacts: per (sat, station) open time; -1 when closed.
  std::vector<double> ground_open(static_cast<size_t>(n_sat) * n_st, -1.0);
  std::vector<int> serving(n_sat, -1);
  std::vector<double> last_ground(n_sat, -std::numeric_limits<double>::infinity());
  std::vector<double> access_open(static_cast<size_t>(n_sat) * n_tg, -1.0);

  std::vector<Vec3> pos(n_sat);
  std::vector<Vec3> st_pos(n_st);
  std::vector<Vec3> tg_pos(n_tg);
  std::vector<char> vis_ground(static_cast<size_t>(n_sat) * n_st, 0);
  std::vector<std::pair<double, NodeId>> scratch;

  auto close_window = [&](NodeId a, NodeId b, double since, double until,
                          LinkClass cls, double capacity) {
    if (until <= since) return;
    if (a > b) std::swap(a, b);
    windows.push_back({a, b, since, until, cls, capacity});
  };

  for (int k = 0; k <= steps; ++k) {
    const bool final_pass = k == steps;
    const double t = final_pass ? horizon : k * step;
    if (!final_pass) {
      for (int i = 0; i < n_sat; ++i) pos[i] = Propagate(satellites[i], t);
      for (int j = 0; j < n_st; ++j) st_pos[j] = StationPosition(stations[j], t);
      for (int j = 0; j < n_tg; ++j) {
        tg_pos[j] = SurfacePosition(targets[j].latitude_deg,
                                    targets[j].longitude_deg, t);
      }
    }

    for (FixedPair& g : grid) {
      const bool vis = !final_pass && ChordClearsEarth(pos[g.a], pos[g.b]);
      if (vis && !g.state.open()) {
        g.state.since = t;
      } else if (!vis && g.state.open()) {
        close_window(g.a, g.b, g.state.since, t, g.link_class,
                     cap.Select(g.link_class, g.a, g.b));
        g.state.since = -1.0;
      }
    }

    if (cap.anchor_links_per_leo > 0 && !anchors.empty()) {
      for (NodeId leo : leos) {
        scratch.clear();
        if (!final_pass) {
          for (NodeId an : anchors) {
            if (ChordClearsEarth(pos[leo], pos[an])) {
              scratch.emplace_back(Distance(pos[leo], pos[an]), an);
            }
          }
          const size_t keep = std::min<size_t>(scratch.size(),
                                               cap.anchor_links_per_leo);
          std::partial_sort(scratch.begin(), scratch.begin() + keep,
                            scratch.end());
          scratch.resize(keep);
        }
        auto& links = anchor_links[leo];
        std::vector<std::pair<NodeId, double>> kept;
        for (const auto& [an, since] : links) {
          const bool still = std::any_of(scratch.begin(), scratch.end(),
                                         [an = an](const auto& s) {
                                           return s.second == an;
                                         });
          if (still) {
            kept.emplace_back(an, since);
          } else {
            close_window(leo, an, since, t, cap.anchor_link_class,
                         cap.Select(cap.anchor_link_class, leo, an));
          }
        }
        for (const auto& [d, an] : scratch) {
          const bool have = std::any_of(kept.begin(), kept.end(),
                                        [an = an](const auto& l) {
                                          return l.first == an;
                                        });
          if (!have) kept.emplace_back(an, t);
        }
        std::sort(kept.begin(), kept.end());
        links = std::move(kept);
      }
    }

    // Ground contacts.
    for (int i = 0; i < n_sat; ++i) {
      for (int j = 0; j < n_st; ++j) {
        vis_ground[static_cast<size_t>(i) * n_st + j] =
            !final_pass &&
            ElevationDeg(st_pos[j], pos[i]) >= stations[j].min_elevation_deg;
      }
    }
    auto close_ground = [&](int i, int j) {
      double& since = ground_open[static_cast<size_t>(i) * n_st + j];
      close_window(i, n_sat + j, since, t, LinkClass::kGround, cap.ground_bps);
      since = -1.0;
      last_ground[i] = t;
    };
    if (cap.antennas_per_station == 0) {
      for (int i = 0; i < n_sat; ++i) {
        for (int j = 0; j < n_st; ++j) {
          const size_t idx = static_cast<size_t>(i) * n_st + j;
          if (vis_ground[idx] && ground_open[idx] < 0.0) {
            ground_open[idx] = t;
          } else if (!vis_ground[idx] && ground_open[idx] >= 0.0) {
            close_ground(i, j);
          }
        }
      }
    } else {
      std::vector<int> busy(n_st, 0);
      for (int i = 0; i < n_sat; ++i) {
        const int j = serving[i];
        if (j < 0) continue;
        if (vis_ground[static_cast<size_t>(i) * n_st + j]) {
          ++busy[j];
        } else {
          close_ground(i, j);
          serving[i] = -1;
        }
      }
      for (int j = 0; j < n_st && !final_pass; ++j) {
        if (busy[j] >= cap.antennas_per_station) continue;
        std::vector<int> candidates;
        for (int i = 0; i < n_sat; ++i) {
          if (serving[i] < 0 && vis_ground[static_cast<size_t>(i) * n_st + j]) {
            candidates.push_back(i);
          }
        }
        std::sort(candidates.begin(), candidates.end(), [&](int x, int y) {
          const int rx = RegimeRank(satellites[x].regime);
          const int ry = RegimeRank(satellites[y].regime);
          if (rx != ry) return rx < ry;
          if (last_ground[x] != last_ground[y]) {
            return last_ground[x] < last_ground[y];
          }
          return x < y;
        });
        for (int i : candidates) {
          if (busy[j] >= cap.antennas_per_station) break;
          serving[i] = j;
          ground_open[static_cast<size_t>(i) * n_st + j] = t;
          ++busy[j];
        }
      }
    }

    // Sensing access for LEO satellites.
    for (NodeId leo : leos) {
      for (int j = 0; j < n_tg; ++j) {
        const size_t idx = static_cast<size_t>(leo) * n_tg + j;
        const bool vis = !final_pass && ElevationDeg(tg_pos[j], pos[leo]) >=
                                            options.sensing_min_elevation_deg;
        if (vis && access_open[idx] < 0.0) {
          access_open[idx] = t;
        } else if (!vis && access_open[idx] >= 0.0) {
          accesses.push_back({j, leo, access_open[idx], t});
          access_open[idx] = -1.0;
        }
      }
    }
  }

  std::sort(windows.begin(), windows.end(),
            [](const ContactWindow& x, const ContactWindow& y) {
              return std::tie(x.start, x.a, x.b, x.end) <
                     std::tie(y.start, y.a, y.b, y.end);
            });
  std::sort(accesses.begin(), accesses.end(),
            [](const AccessWindow& x, const AccessWindow& y) {
              return std::tie(x.start, x.target, x.satellite) <
                     std::tie(y.start, y.target, y.satellite);
            });
  return ContactPlan(std::move(satellites), std::move(stations),
                     std::move(targets), std::move(windows), std::move(accesses),
                     horizon);
}

}  // namespace cnsc
