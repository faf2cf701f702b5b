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

#include "dhm/quantizer.hpp"

#include <algorithm>
#include <cmath>

#include "dhm/error.hpp"

namespace dhm {

double FixedPointFormat::to_real(int64_t raw) const { return std::ldexp(static_cast<double>(raw), -frac_bits); }

std::string to_string(const FixedPointFormat &fmt) {
  return "Q(" + std::to_string(fmt.total_bits) + "," + std::to_string(fmt.frac_bits) + ")";
}

int64_t saturate(int64_t value, const FixedPointFormat &fmt) {
  return std::clamp(value, fmt.min_raw(), fmt.max_raw());
}

int64_t rounding_shift(int64_t value, int shift) {
  if (shift <= 0) return value * (int64_t{1} << -shift);
  const uint64_t magnitude = value < 0 ? uint64_t{0} - static_cast<uint64_t>(value) : static_cast<uint64_t>(value);
  const uint64_t rounded = (magnitude + (uint64_t{1} << (shift - 1))) >> shift;
  return value < 0 ? -static_cast<int64_t>(rounded) : static_cast<int64_t>(rounded);
}

int64_t requantize(int64_t value, int from_frac, const FixedPointFormat &to) {
  return saturate(rounding_shift(value, from_frac - to.frac_bits), to);
}

int64_t rounding_divide(int64_t value, int64_t divisor) {
  const int64_t magnitude = value < 0 ? -value : value;
  const int64_t q = (2 * magnitude + divisor) / (2 * divisor);
  return value < 0 ? -q : q;
}

int accumulator_bits(int bits, int64_t terms) {
  int extra = 0;
  while ((int64_t{1} << extra) < terms) ++extra;
  return 2 * bits + extra;
}

int64_t tanh_lut_value(int64_t raw, const FixedPointFormat &in, const FixedPointFormat &out) {
  return quantize_value(std::tanh(in.to_real(raw)), out);
}

int64_t quantize_value(double x, const FixedPointFormat &fmt) {
  const double scaled = std::round(std::ldexp(x, fmt.frac_bits));
  if (scaled >= static_cast<double>(fmt.max_raw())) return fmt.max_raw();
  if (scaled <= static_cast<double>(fmt.min_raw())) return fmt.min_raw();
  return static_cast<int64_t>(scaled);
}

FixedPointFormat choose_format(std::span<const float> tensor, int total_bits) {
  if (total_bits < 2 || total_bits > 32) {
    throw Error(ErrorCode::kInvalidArgument, "total_bits must be in [2, 32], got " + std::to_string(total_bits));
  }
  if (tensor.empty()) throw Error(ErrorCode::kQuantize, "cannot choose a format for an empty tensor");
  float lo = tensor[0];
  float hi = tensor[0];
  for (float v : tensor) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kQuantize, "cannot choose a format for a non-finite tensor");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  // round() is monotone, so only the extremes can saturate first.
  for (int frac = total_bits - 1; frac >= 0; --frac) {
    const FixedPointFormat fmt{total_bits, frac};
    const double top = std::round(std::ldexp(static_cast<double>(hi), frac));
    const double bottom = std::round(std::ldexp(static_cast<double>(lo), frac));
    if (top <= static_cast<double>(fmt.max_raw()) && bottom >= static_cast<double>(fmt.min_raw())) return fmt;
  }
  throw Error(ErrorCode::kQuantize, "tensor range [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                        "] does not fit " + std::to_string(total_bits) + " bits even with 0 fractional bits");
}

namespace {

int checked_frac(const std::string &layer, int frac, int total_bits) {
  if (frac < 0 || frac >= total_bits) {
    throw Error(ErrorCode::kInvalidArgument, "fractional bits for '" + layer + "' must be in [0, " +
                                                 std::to_string(total_bits - 1) + "], got " + std::to_string(frac));
  }
  return frac;
}

std::vector<int32_t> quantize_tensor(const std::vector<float> &values, const FixedPointFormat &fmt, int64_t &saturated) {
  std::vector<int32_t> out;
  out.reserve(values.size());
  for (float v : values) {
    const double scaled = std::round(std::ldexp(static_cast<double>(v), fmt.frac_bits));
    if (scaled > static_cast<double>(fmt.max_raw()) || scaled < static_cast<double>(fmt.min_raw())) ++saturated;
    out.push_back(static_cast<int32_t>(quantize_value(v, fmt)));
  }
  return out;
}

}  // namespace

QuantizedModel quantize_model(const CnnModel &model, const QuantizeOptions &options) {
  const int bits = options.total_bits;
  if (bits < 2 || bits > 32) {
    throw Error(ErrorCode::kInvalidArgument, "bits must be in [2, 32], got " + std::to_string(bits));
  }
  const auto diagnostics = validate_model(model);
  for (const auto &d : diagnostics) {
    if (d.severity == Severity::kError) throw Error(ErrorCode::kQuantize, "invalid model: " + to_string(d));
  }
  for (const auto &[name, frac] : options.weight_frac) {
    const LayerSpec *layer = model.find(name);
    if (!layer || !layer->has_parameters()) {
      throw Error(ErrorCode::kInvalidArgument, "weight format override names no conv/FC layer: '" + name + "'");
    }
  }
  for (const auto &[name, frac] : options.data_frac) {
    const LayerSpec *layer = model.find(name);
    const bool rescales =
        layer && (layer->has_parameters() ||
                  (layer->is_activation() && std::get<ActivationParams>(layer->kind).fn == ActivationFn::kTanh));
    if (!rescales) {
      throw Error(ErrorCode::kInvalidArgument, "data format override names no conv/FC/tanh layer: '" + name + "'");
    }
  }

  QuantizedModel qm;
  qm.total_bits = bits;
  qm.input_format = {bits, checked_frac("input", options.input_frac.value_or(bits - 1), bits)};
  qm.model = model;
  for (auto &layer : qm.model.layers) {
    layer.weights.reset();
    layer.biases.reset();
  }

  FixedPointFormat current = qm.input_format;
  for (const auto &layer : model.layers) {
    QuantizedLayer ql;
    ql.input_format = current;
    ql.output_format = current;
    auto data_format = [&] {
      const auto it = options.data_frac.find(layer.name);
      return FixedPointFormat{bits, it == options.data_frac.end() ? bits - 1 : checked_frac(layer.name, it->second, bits)};
    };

    if (layer.has_parameters()) {
      if (!layer.weights) throw Error(ErrorCode::kQuantize, "layer '" + layer.name + "' has no weights loaded");
      if (layer.expected_bias_count() > 0 && !layer.biases) {
        throw Error(ErrorCode::kQuantize, "layer '" + layer.name + "' has no biases loaded");
      }
      FixedPointFormat wfmt;
      if (const auto it = options.weight_frac.find(layer.name); it != options.weight_frac.end()) {
        wfmt = {bits, checked_frac(layer.name, it->second, bits)};
      } else {
        std::vector<float> all(*layer.weights);
        if (layer.biases) all.insert(all.end(), layer.biases->begin(), layer.biases->end());
        wfmt = choose_format(all, bits);
      }
      ql.weight_format = wfmt;
      ql.weights = quantize_tensor(*layer.weights, wfmt, ql.saturated);
      if (layer.biases) ql.biases = quantize_tensor(*layer.biases, wfmt, ql.saturated);
      ql.output_format = data_format();
    } else if (const auto *act = std::get_if<ActivationParams>(&layer.kind); act && act->fn == ActivationFn::kTanh) {
      ql.output_format = data_format();
    }
    current = ql.output_format;
    qm.layers.push_back(std::move(ql));
  }
  return qm;
}

std::vector<Diagnostic> validate_quantized(const QuantizedModel &qm) {
  std::vector<Diagnostic> out = validate_model(qm.model);
  if (qm.layers.size() != qm.model.layers.size()) {
    out.push_back({Severity::kError, "", "quantized layer count differs from the model"});
    return out;
  }
  for (size_t i = 0; i < qm.layers.size(); ++i) {
    const auto &spec = qm.model.layers[i];
    const auto &ql = qm.layers[i];
    auto error = [&](const std::string &m) { out.push_back({Severity::kError, spec.name, m}); };
    if (!ql.input_format.valid() || !ql.output_format.valid()) error("invalid data format");
    if (spec.has_parameters()) {
      if (!ql.weight_format || !ql.weight_format->valid()) {
        error("missing weight format");
        continue;
      }
      if (static_cast<int64_t>(ql.weights.size()) != spec.expected_weight_count()) error("weight count mismatch");
      if (static_cast<int64_t>(ql.biases.size()) != spec.expected_bias_count()) error("bias count mismatch");
      for (int32_t w : ql.weights) {
        if (!ql.weight_format->contains(w)) {
          error("weight outside format range");
          break;
        }
      }
      for (int32_t b : ql.biases) {
        if (!ql.weight_format->contains(b)) {
          error("bias outside format range");
          break;
        }
      }
    }
  }
  return out;
}

}  // namespace dhm
