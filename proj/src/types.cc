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

#include "cnsc/types.h"

#include <string>

namespace cnsc {

std::string_view ToString(Regime regime) {
  switch (regime) {
    case Regime::kLeo:
      return "LEO";
    case Regime::kMeo:
      return "MEO";
    case Regime::kGeo:
      return "GEO";
    case Regime::kGround:
      return "GROUND";
  }
  return "?";
}

std::string_view ToString(LinkClass link_class) {
  switch (link_class) {
    case LinkClass::kMicrowaveIsl:
      return "microwave_isl";
    case LinkClass::kLaserIsl:
      return "laser_isl";
    case LinkClass::kGround:
      return "ground";
  }
  return "?";
}

std::string_view ToString(Resource resource) {
  switch (resource) {
    case Resource::kCompute:
      return "compute";
    case Resource::kStorage:
      return "storage";
    case Resource::kSensor:
      return "sensor";
  }
  return "?";
}

std::string_view ToString(AwarenessMode mode) {
  return mode == AwarenessMode::kYuheng ? "yuheng" : "baseline";
}

Regime ParseRegime(std::string_view text) {
  if (text == "LEO" || text == "leo") return Regime::kLeo;
  if (text == "MEO" || text == "meo") return Regime::kMeo;
  if (text == "GEO" || text == "geo") return Regime::kGeo;
  throw ValidationError("unknown orbit regime '" + std::string(text) + "'");
}

LinkClass ParseLinkClass(std::string_view text) {
  if (text == "microwave_isl") return LinkClass::kMicrowaveIsl;
  if (text == "laser_isl") return LinkClass::kLaserIsl;
  if (text == "ground") return LinkClass::kGround;
  throw ValidationError("unknown link class '" + std::string(text) + "'");
}

AwarenessMode ParseAwarenessMode(std::string_view text) {
  if (text == "yuheng") return AwarenessMode::kYuheng;
  if (text == "baseline") return AwarenessMode::kBaseline;
  throw ValidationError("unknown awareness mode '" + std::string(text) +
                        "' (expected yuheng|baseline)");
}

}  // namespace cnsc
