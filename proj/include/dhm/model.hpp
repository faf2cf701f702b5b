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
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace dhm {

/// Channels x rows x columns of a feature-map tensor.
struct Shape3 {
  int channels = 0;
  int height = 0;
  int width = 0;

  int64_t elements() const { return int64_t{channels} * height * width; }
  bool operator==(const Shape3 &) const = default;
};

enum class PoolMode { kMax, kAvg };
enum class ActivationFn { kReLU, kTanh };

const char *to_string(PoolMode mode);
const char *to_string(ActivationFn fn);

struct ConvParams {
  int num_output = 0;  // N
  int channels = 0;    // C, inferred from the previous layer when parsing
  int kernel = 0;      // K
  int stride = 1;
  int pad = 0;
  bool bias = true;

  int64_t weight_count() const { return int64_t{num_output} * channels * kernel * kernel; }
  bool operator==(const ConvParams &) const = default;
};

struct PoolParams {
  int kernel = 0;
  int stride = 0;
  PoolMode mode = PoolMode::kMax;
  bool operator==(const PoolParams &) const = default;
};

struct ActivationParams {
  ActivationFn fn = ActivationFn::kReLU;
  bool operator==(const ActivationParams &) const = default;
};

/// Inner product over the flattened C*H*W input.
struct FullyConnectedParams {
  int num_output = 0;
  int inputs = 0;
  bool bias = true;

  int64_t weight_count() const { return int64_t{num_output} * inputs; }
  bool operator==(const FullyConnectedParams &) const = default;
};

using LayerKind = std::variant<ConvParams, PoolParams, ActivationParams, FullyConnectedParams>;

struct LayerSpec {
  std::string name;
  LayerKind kind;
  // Row-major [N][C][K][K] for conv, [N][inputs] for FC.
  std::optional<std::vector<float>> weights;
  std::optional<std::vector<float>> biases;

  bool is_conv() const { return std::holds_alternative<ConvParams>(kind); }
  bool is_pool() const { return std::holds_alternative<PoolParams>(kind); }
  bool is_activation() const { return std::holds_alternative<ActivationParams>(kind); }
  bool is_fc() const { return std::holds_alternative<FullyConnectedParams>(kind); }
  bool has_parameters() const { return is_conv() || is_fc(); }

  /// Number of weights and biases this layer expects; zero for parameterless layers.
  int64_t expected_weight_count() const;
  int64_t expected_bias_count() const;

  bool operator==(const LayerSpec &) const = default;
};

const char *kind_name(const LayerKind &kind);

struct CnnModel {
  std::string name;
  Shape3 input;
  std::vector<LayerSpec> layers;

  const LayerSpec *find(const std::string &layer_name) const;
  bool operator==(const CnnModel &) const = default;
};

enum class Severity { kWarning, kError };

struct Diagnostic {
  Severity severity = Severity::kError;
  std::string layer;
  std::string message;

  bool operator==(const Diagnostic &) const = default;
};

std::string to_string(const Diagnostic &diagnostic);

/// Output shape of a single layer applied to `in`. The result may have
/// non-positive extents; validate_model reports those.
Shape3 output_shape(const LayerSpec &layer, const Shape3 &in);

/// Input shape of every layer followed by the network output shape
/// (layers.size() + 1 entries). Stops early at the first non-positive shape.
std::vector<Shape3> propagate_shapes(const CnnModel &model);

/// Checks every model and layer invariant. Empty iff the model is valid.
std::vector<Diagnostic> validate_model(const CnnModel &model);

bool has_errors(const std::vector<Diagnostic> &diagnostics);

}  // namespace dhm
