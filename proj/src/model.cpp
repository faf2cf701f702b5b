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

#include "dhm/model.hpp"

#include <cmath>
#include <set>

#include "dhm/error.hpp"

namespace dhm {

const char *to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kShape: return "shape error";
    case ErrorCode::kWeights: return "weights error";
    case ErrorCode::kQuantize: return "quantization error";
    case ErrorCode::kUnsupported: return "unsupported";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kSimulation: return "simulation error";
    case ErrorCode::kInternal: return "internal error";
  }
  return "unknown error";
}

const char *to_string(PoolMode mode) { return mode == PoolMode::kMax ? "max" : "avg"; }

const char *to_string(ActivationFn fn) { return fn == ActivationFn::kReLU ? "relu" : "tanh"; }

std::string to_string(const Diagnostic &d) {
  std::string out = d.severity == Severity::kError ? "error" : "warning";
  if (!d.layer.empty()) out += " [" + d.layer + "]";
  return out + ": " + d.message;
}

const char *kind_name(const LayerKind &kind) {
  struct Visitor {
    const char *operator()(const ConvParams &) const { return "Convolution"; }
    const char *operator()(const PoolParams &) const { return "Pooling"; }
    const char *operator()(const ActivationParams &p) const {
      return p.fn == ActivationFn::kReLU ? "ReLU" : "TanH";
    }
    const char *operator()(const FullyConnectedParams &) const { return "InnerProduct"; }
  };
  return std::visit(Visitor{}, kind);
}

int64_t LayerSpec::expected_weight_count() const {
  if (const auto *conv = std::get_if<ConvParams>(&kind)) return conv->weight_count();
  if (const auto *fc = std::get_if<FullyConnectedParams>(&kind)) return fc->weight_count();
  return 0;
}

int64_t LayerSpec::expected_bias_count() const {
  if (const auto *conv = std::get_if<ConvParams>(&kind)) return conv->bias ? conv->num_output : 0;
  if (const auto *fc = std::get_if<FullyConnectedParams>(&kind)) return fc->bias ? fc->num_output : 0;
  return 0;
}

const LayerSpec *CnnModel::find(const std::string &layer_name) const {
  for (const auto &layer : layers) {
    if (layer.name == layer_name) return &layer;
  }
  return nullptr;
}

namespace {

int window_count(int extent, int kernel, int stride) {
  if (extent < kernel || stride < 1) return 0;
  return (extent - kernel) / stride + 1;
}

bool valid_name(const std::string &name) {
  if (name.empty()) return false;
  for (unsigned char ch : name) {
    if (ch <= 0x20 || ch == 0x7f || ch == '"' || ch == '\\') return false;
  }
  return true;
}

}  // namespace

Shape3 output_shape(const LayerSpec &layer, const Shape3 &in) {
  struct Visitor {
    const Shape3 &in;
    Shape3 operator()(const ConvParams &p) const {
      return {p.num_output, window_count(in.height + 2 * p.pad, p.kernel, p.stride),
              window_count(in.width + 2 * p.pad, p.kernel, p.stride)};
    }
    Shape3 operator()(const PoolParams &p) const {
      return {in.channels, window_count(in.height, p.kernel, p.stride),
              window_count(in.width, p.kernel, p.stride)};
    }
    Shape3 operator()(const ActivationParams &) const { return in; }
    Shape3 operator()(const FullyConnectedParams &p) const { return {p.num_output, 1, 1}; }
  };
  return std::visit(Visitor{in}, layer.kind);
}

std::vector<Shape3> propagate_shapes(const CnnModel &model) {
  std::vector<Shape3> shapes{model.input};
  for (const auto &layer : model.layers) {
    const Shape3 next = output_shape(layer, shapes.back());
    shapes.push_back(next);
    if (next.channels < 1 || next.height < 1 || next.width < 1) break;
  }
  return shapes;
}

bool has_errors(const std::vector<Diagnostic> &diagnostics) {
  for (const auto &d : diagnostics) {
    if (d.severity == Severity::kError) return true;
  }
  return false;
}

std::vector<Diagnostic> validate_model(const CnnModel &model) {
  std::vector<Diagnostic> out;
  auto error = [&out](const std::string &layer, std::string message) {
    out.push_back({Severity::kError, layer, std::move(message)});
  };

  const Shape3 &input = model.input;
  if (input.channels < 1 || input.height < 1 || input.width < 1) {
    error("", "input shape must be positive, got " + std::to_string(input.channels) + "x" +
                  std::to_string(input.height) + "x" + std::to_string(input.width));
    return out;
  }
  if (model.layers.empty()) {
    error("", "empty network");
    return out;
  }

  std::set<std::string> seen;
  Shape3 shape = input;
  for (const auto &layer : model.layers) {
    const std::string &name = layer.name;
    if (!valid_name(name)) error(name, "layer name must be non-empty and free of whitespace and quotes");
    if (!seen.insert(name).second) error(name, "duplicate layer name");

    if (const auto *conv = std::get_if<ConvParams>(&layer.kind)) {
      if (conv->num_output < 1) error(name, "num_output must be >= 1");
      if (conv->kernel < 1) error(name, "kernel_size must be >= 1");
      if (conv->stride < 1) error(name, "stride must be >= 1");
      if (conv->pad < 0) error(name, "pad must be >= 0");
      if (conv->kernel >= 1 && conv->pad >= conv->kernel) error(name, "pad must be smaller than kernel_size");
      if (conv->channels != shape.channels) {
        error(name, "channel mismatch: layer expects " + std::to_string(conv->channels) +
                        " input channels but previous layer produces " + std::to_string(shape.channels));
      }
    } else if (const auto *pool = std::get_if<PoolParams>(&layer.kind)) {
      if (pool->kernel < 1) error(name, "kernel_size must be >= 1");
      if (pool->stride < 1) error(name, "stride must be >= 1");
    } else if (const auto *fc = std::get_if<FullyConnectedParams>(&layer.kind)) {
      if (fc->num_output < 1) error(name, "num_output must be >= 1");
      if (fc->inputs != shape.elements()) {
        error(name, "input mismatch: layer expects " + std::to_string(fc->inputs) +
                        " inputs but previous layer produces " + std::to_string(shape.elements()));
      }
    }

    if (layer.weights) {
      const auto expected = layer.expected_weight_count();
      if (expected == 0) {
        error(name, "layer kind carries no weights");
      } else if (static_cast<int64_t>(layer.weights->size()) != expected) {
        error(name, "weight count " + std::to_string(layer.weights->size()) + " != expected " +
                        std::to_string(expected));
      }
      for (size_t i = 0; i < layer.weights->size(); ++i) {
        if (!std::isfinite((*layer.weights)[i])) {
          error(name, "non-finite weight at flat index " + std::to_string(i));
          break;
        }
      }
    }
    if (layer.biases) {
      const auto expected = layer.expected_bias_count();
      if (static_cast<int64_t>(layer.biases->size()) != expected) {
        error(name, "bias count " + std::to_string(layer.biases->size()) + " != expected " +
                        std::to_string(expected));
      }
      for (size_t i = 0; i < layer.biases->size(); ++i) {
        if (!std::isfinite((*layer.biases)[i])) {
          error(name, "non-finite bias at flat index " + std::to_string(i));
          break;
        }
      }
    }

    const Shape3 next = output_shape(layer, shape);
    if (next.height < 1 || next.width < 1) {
      error(name, "spatial underflow: " + std::string(kind_name(layer.kind)) + " maps " +
                      std::to_string(shape.height) + "x" + std::to_string(shape.width) + " to " +
                      std::to_string(next.height) + "x" + std::to_string(next.width));
      return out;
    }
    shape = next;
  }
  return out;
}

}  // namespace dhm
