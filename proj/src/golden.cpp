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

#include "dhm/golden.hpp"

#include <algorithm>

#include "dhm/error.hpp"

namespace dhm {

namespace {

FeatureMaps conv_layer(const ConvParams &p, const QuantizedLayer &ql, const FeatureMaps &in, const Shape3 &out_shape) {
  FeatureMaps out(out_shape, ql.output_format);
  const int acc_frac = ql.input_format.frac_bits + ql.weight_format->frac_bits;
  const int K = p.kernel;
  for (int n = 0; n < p.num_output; ++n) {
    const int64_t bias = ql.biases.empty() ? 0 : int64_t{ql.biases[n]} << ql.input_format.frac_bits;
    for (int i = 0; i < out_shape.height; ++i) {
      for (int j = 0; j < out_shape.width; ++j) {
        int64_t acc = bias;
        for (int c = 0; c < p.channels; ++c) {
          for (int u = 0; u < K; ++u) {
            const int y = i * p.stride + u - p.pad;
            if (y < 0 || y >= in.shape.height) continue;
            for (int v = 0; v < K; ++v) {
              const int x = j * p.stride + v - p.pad;
              if (x < 0 || x >= in.shape.width) continue;
              acc += in.at(c, y, x) * ql.weights[((static_cast<size_t>(n) * p.channels + c) * K + u) * K + v];
            }
          }
        }
        out.at(n, i, j) = requantize(acc, acc_frac, ql.output_format);
      }
    }
  }
  return out;
}

FeatureMaps pool_layer(const PoolParams &p, const FeatureMaps &in, const Shape3 &out_shape) {
  FeatureMaps out(out_shape, in.format);
  for (int c = 0; c < out_shape.channels; ++c) {
    for (int i = 0; i < out_shape.height; ++i) {
      for (int j = 0; j < out_shape.width; ++j) {
        int64_t best = in.at(c, i * p.stride, j * p.stride);
        int64_t sum = 0;
        for (int u = 0; u < p.kernel; ++u) {
          for (int v = 0; v < p.kernel; ++v) {
            const int64_t x = in.at(c, i * p.stride + u, j * p.stride + v);
            best = std::max(best, x);
            sum += x;
          }
        }
        out.at(c, i, j) = p.mode == PoolMode::kMax ? best : rounding_divide(sum, int64_t{p.kernel} * p.kernel);
      }
    }
  }
  return out;
}

FeatureMaps activation_layer(const ActivationParams &p, const QuantizedLayer &ql, const FeatureMaps &in) {
  FeatureMaps out(in.shape, ql.output_format);
  for (size_t i = 0; i < in.data.size(); ++i) {
    out.data[i] = p.fn == ActivationFn::kReLU ? std::max<int64_t>(0, in.data[i])
                                              : tanh_lut_value(in.data[i], in.format, ql.output_format);
  }
  return out;
}

FeatureMaps fc_layer(const FullyConnectedParams &p, const QuantizedLayer &ql, const FeatureMaps &in) {
  FeatureMaps out({p.num_output, 1, 1}, ql.output_format);
  const int acc_frac = ql.input_format.frac_bits + ql.weight_format->frac_bits;
  for (int n = 0; n < p.num_output; ++n) {
    int64_t acc = ql.biases.empty() ? 0 : int64_t{ql.biases[n]} << ql.input_format.frac_bits;
    for (int k = 0; k < p.inputs; ++k) acc += in.data[k] * ql.weights[static_cast<size_t>(n) * p.inputs + k];
    out.data[n] = requantize(acc, acc_frac, ql.output_format);
  }
  return out;
}

}  // namespace

void check_accumulator_width(const QuantizedModel &qm) {
  for (size_t i = 0; i < qm.model.layers.size(); ++i) {
    const auto &layer = qm.model.layers[i];
    int64_t terms = 0;
    if (const auto *c = std::get_if<ConvParams>(&layer.kind)) terms = int64_t{c->channels} * c->kernel * c->kernel;
    if (const auto *f = std::get_if<FullyConnectedParams>(&layer.kind)) terms = f->inputs;
    if (terms == 0) continue;
    const int bits = accumulator_bits(qm.total_bits, terms + 1);  // +1 for the bias term
    if (bits > 63) {
      throw Error(ErrorCode::kUnsupported, "layer '" + layer.name + "' needs a " + std::to_string(bits) +
                                               "-bit accumulator; at most 63 bits are supported");
    }
  }
}

std::vector<FeatureMaps> golden_inference(const QuantizedModel &qm, const FeatureMaps &image) {
  if (!(image.shape == qm.model.input)) throw Error(ErrorCode::kShape, "image shape does not match the model input");
  if (!(image.format == qm.input_format)) {
    throw Error(ErrorCode::kShape, "image format " + to_string(image.format) + " differs from model input format " +
                                       to_string(qm.input_format));
  }
  if (!image.in_range()) throw Error(ErrorCode::kShape, "image value outside its format range");
  check_accumulator_width(qm);
  const auto shapes = propagate_shapes(qm.model);
  std::vector<FeatureMaps> outputs;
  outputs.reserve(qm.model.layers.size());  // keeps `current` valid
  const FeatureMaps *current = &image;
  for (size_t i = 0; i < qm.model.layers.size(); ++i) {
    const auto &layer = qm.model.layers[i];
    const auto &ql = qm.layers[i];
    FeatureMaps out;
    if (const auto *c = std::get_if<ConvParams>(&layer.kind)) {
      out = conv_layer(*c, ql, *current, shapes[i + 1]);
    } else if (const auto *p = std::get_if<PoolParams>(&layer.kind)) {
      out = pool_layer(*p, *current, shapes[i + 1]);
    } else if (const auto *a = std::get_if<ActivationParams>(&layer.kind)) {
      out = activation_layer(*a, ql, *current);
    } else {
      out = fc_layer(std::get<FullyConnectedParams>(layer.kind), ql, *current);
    }
    outputs.push_back(std::move(out));
    current = &outputs.back();
  }
  return outputs;
}

}  // namespace dhm
