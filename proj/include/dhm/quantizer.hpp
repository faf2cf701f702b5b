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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dhm/fixed_point.hpp"
#include "dhm/model.hpp"

namespace dhm {

/// clamp(round_half_away_from_zero(x * 2^frac)) into the format's range.
int64_t quantize_value(double x, const FixedPointFormat &fmt);

/// Largest frac_bits in [0, total_bits-1] for which no element saturates.
/// Throws Error(kQuantize) if even frac_bits = 0 saturates, or the tensor
/// is empty or non-finite.
FixedPointFormat choose_format(std::span<const float> tensor, int total_bits);

struct QuantizeOptions {
  int total_bits = 8;
  /// Per-layer weight format override (conv and FC layers only).
  std::map<std::string, int> weight_frac;
  /// Per-layer output data format override (conv, FC and tanh layers).
  std::map<std::string, int> data_frac;
  /// Fractional bits of the input pixel format; defaults to total_bits - 1.
  std::optional<int> input_frac;
};

struct QuantizedLayer {
  FixedPointFormat input_format;
  std::optional<FixedPointFormat> weight_format;  // conv and FC only
  FixedPointFormat output_format;
  std::vector<int32_t> weights;  // same layout as LayerSpec::weights
  std::vector<int32_t> biases;   // in weight_format; empty without bias
  int64_t saturated = 0;         // elements clamped during quantization

  bool operator==(const QuantizedLayer &) const = default;
};

/// Integer image of a CnnModel. `model` keeps the topology only; every
/// float tensor lives here as integers under per-layer formats.
struct QuantizedModel {
  CnnModel model;
  int total_bits = 8;
  FixedPointFormat input_format;
  std::vector<QuantizedLayer> layers;  // parallel to model.layers

  bool operator==(const QuantizedModel &) const = default;
};

/// Quantizes every weight and bias of a fully weighted, valid model.
///
/// Weights and biases of a layer share one format picked by choose_format
/// over both, unless overridden. Pooling and ReLU keep their input format;
/// conv, FC and tanh outputs use Q(total_bits, total_bits - 1) by default.
QuantizedModel quantize_model(const CnnModel &model, const QuantizeOptions &options);

/// Checks the range and shape invariants of a quantized model.
std::vector<Diagnostic> validate_quantized(const QuantizedModel &qm);

}  // namespace dhm
