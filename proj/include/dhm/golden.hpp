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

// Reference fixed-point inference by direct nested loops. Shares no code
// with the actor graph or the simulator.

#pragma once

#include <vector>

#include "dhm/feature_maps.hpp"
#include "dhm/quantizer.hpp"

namespace dhm {

/// Output of every layer, in layer order. Conv and FC accumulate at full
/// width with the bias shifted into accumulator scale, then requantize to
/// the layer output format. Activation layers follow as separate steps.
/// Throws Error(kShape) when the image does not match the model input.
std::vector<FeatureMaps> golden_inference(const QuantizedModel &qm, const FeatureMaps &image);

/// Throws Error(kUnsupported) if some conv/FC accumulator would not fit
/// 63 bits at the model's formats.
void check_accumulator_width(const QuantizedModel &qm);

}  // namespace dhm
