// Copyright 2026 The dhmc Authors
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

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dhm/model.hpp"

namespace dhm {

// .hdw weights container: a text manifest followed by raw little-endian
// IEEE-754 binary32 payload. Byte layout is documented in
// docs/format-weights.md.
//
//   HDW1
//   tensor conv1 weight 20,1,5,5 0
//   tensor conv1 bias 20 2000
//   end
//   <payload>

struct WeightsResult {
  CnnModel model;
  std::vector<Diagnostic> warnings;
};

/// Populates every conv/FC layer of `model` from `container`.
/// Throws Error(kWeights) on a malformed manifest, a missing record, an
/// element-count mismatch or any non-finite value.
WeightsResult load_weights(std::span<const uint8_t> container, const CnnModel &model);

/// Writes the weights and biases present in `model` as an .hdw container.
std::vector<uint8_t> serialize_weights(const CnnModel &model);

}  // namespace dhm
