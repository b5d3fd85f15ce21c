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

// Vocabulary shared by every module: ids, regimes, link classes, resource
// kinds and the library's exception types.

#ifndef CNSC_TYPES_H_
#define CNSC_TYPES_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cnsc {

// Satellites are numbered 0..N-1 and ground stations N..N+M-1 so that a
// single integer identifies either end of a link.
using NodeId = int32_t;
inline constexpr NodeId kNoNode = -1;

using TaskId = int32_t;
using StageId = int32_t;

enum class Regime : uint8_t { kLeo, kMeo, kGeo, kGround };

enum class LinkClass : uint8_t { kMicrowaveIsl, kLaserIsl, kGround };

// Node-level resource dimensions tracked in timelines, views and ground
// truth. Link bandwidth is tracked per contact window instead.
enum class Resource : uint8_t { kCompute, kStorage, kSensor };
inline constexpr int kNumResources = 3;

enum class AwarenessMode : uint8_t { kYuheng, kBaseline };

std::string_view ToString(Regime regime);
std::string_view ToString(LinkClass link_class);
std::string_view ToString(Resource resource);
std::string_view ToString(AwarenessMode mode);

Regime ParseRegime(std::string_view text);
LinkClass ParseLinkClass(std::string_view text);
AwarenessMode ParseAwarenessMode(std::string_view text);

// Raised for malformed inputs: bad specs, bad configs, unknown names.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when an operation would leave a resource outside [0, bound].
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised for illegal state transitions (lifecycle, double-start, ...).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace cnsc

#endif  // CNSC_TYPES_H_
