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

// Shared test helpers: seeded generators for networks, weights and class
// histograms, plus a brute-force convolution used as a second oracle.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dhm/feature_maps.hpp"
#include "dhm/model.hpp"
#include "dhm/quantizer.hpp"
#include "dhm/specializer.hpp"

namespace dhm::testing {

class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}
  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(gen_); }
  template <typename T>
  const T &pick(const std::vector<T> &v) { return v[static_cast<size_t>(uniform(0, static_cast<int>(v.size()) - 1))]; }
  // Laplace(0, b) as a difference of two exponentials.
  double laplace(double b) {
    std::exponential_distribution<double> e(1.0);
    return b * (e(gen_) - e(gen_));
  }
  std::mt19937_64 &engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

struct NetShape {
  int max_channels = 4;
  int max_outputs = 4;
  std::vector<int> kernels{1, 3, 5};
  int max_image = 16;
  int max_convs = 2;
  bool allow_pad = true;
  bool allow_stride = true;
  bool allow_pool = true;
  bool allow_activation = true;
};

inline LayerSpec make_conv(const std::string &name, int n, int c, int k, int stride = 1, int pad = 0, bool bias = true) {
  LayerSpec l;
  l.name = name;
  l.kind = ConvParams{n, c, k, stride, pad, bias};
  return l;
}

inline LayerSpec make_pool(const std::string &name, int k, int stride, PoolMode mode = PoolMode::kMax) {
  LayerSpec l;
  l.name = name;
  l.kind = PoolParams{k, stride, mode};
  return l;
}

inline LayerSpec make_act(const std::string &name, ActivationFn fn) {
  LayerSpec l;
  l.name = name;
  l.kind = ActivationParams{fn};
  return l;
}

inline CnnModel single_conv(int n, int c, int k, int height, int width, int stride = 1, int pad = 0) {
  CnnModel m;
  m.name = "conv_n" + std::to_string(n) + "_c" + std::to_string(c) + "_k" + std::to_string(k);
  m.input = {c, height, width};
  m.layers.push_back(make_conv("conv1", n, c, k, stride, pad));
  return m;
}

/// Random conv/pool/activation network whose shapes are valid by
/// construction. Weights are absent.
inline CnnModel random_network(Rng &rng, const NetShape &opt = {}) {
  CnnModel m;
  m.name = "rand";
  int c = rng.uniform(1, opt.max_channels);
  int h = rng.uniform(std::min(opt.max_image, 6), opt.max_image);
  int w = rng.uniform(std::min(opt.max_image, 6), opt.max_image);
  m.input = {c, h, w};
  const int convs = rng.uniform(1, opt.max_convs);
  for (int i = 0; i < convs; ++i) {
    std::vector<int> fits;
    for (int k : opt.kernels) {
      if (k <= h && k <= w) fits.push_back(k);
    }
    if (fits.empty()) break;
    const int k = rng.pick(fits);
    const int pad = opt.allow_pad && k > 1 && rng.coin(0.3) ? rng.uniform(1, k / 2) : 0;
    const int stride = opt.allow_stride && rng.coin(0.25) ? 2 : 1;
    const int n = rng.uniform(1, opt.max_outputs);
    const std::string id = std::to_string(i + 1);
    m.layers.push_back(make_conv("conv" + id, n, c, k, stride, pad, rng.coin(0.85)));
    c = n;
    h = (h + 2 * pad - k) / stride + 1;
    w = (w + 2 * pad - k) / stride + 1;
    if (opt.allow_activation && rng.coin(0.4)) {
      m.layers.push_back(make_act("act" + id, rng.coin() ? ActivationFn::kReLU : ActivationFn::kTanh));
    }
    if (opt.allow_pool && h >= 2 && w >= 2 && rng.coin(0.5)) {
      const int pk = 2;
      const int ps = rng.coin(0.8) ? 2 : 1;
      m.layers.push_back(make_pool("pool" + id, pk, ps, rng.coin(0.7) ? PoolMode::kMax : PoolMode::kAvg));
      h = (h - pk) / ps + 1;
      w = (w - pk) / ps + 1;
      if (opt.allow_activation && rng.coin(0.2)) m.layers.push_back(make_act("post" + id, ActivationFn::kReLU));
    }
  }
  return m;
}

/// Laplacian weights scaled by fan-in, with a sprinkle of exact zeros,
/// ones and powers of two so every multiplier class shows up.
inline CnnModel with_random_weights(CnnModel m, Rng &rng, double scale = 0.6) {
  for (auto &layer : m.layers) {
    if (!layer.has_parameters()) continue;
    const int64_t count = layer.expected_weight_count();
    const int outputs = layer.is_conv() ? std::get<ConvParams>(layer.kind).num_output
                                        : std::get<FullyConnectedParams>(layer.kind).num_output;
    const int64_t fan_in = count / outputs;
    const double b = scale / std::sqrt(static_cast<double>(std::max<int64_t>(fan_in, 1)));
    std::vector<float> w(static_cast<size_t>(count));
    for (auto &x : w) {
      const double r = rng.real(0, 1);
      if (r < 0.1) x = 0.0f;
      else if (r < 0.15) x = static_cast<float>(std::ldexp(rng.coin() ? 1.0 : -1.0, -rng.uniform(1, 4)));
      else x = static_cast<float>(rng.laplace(b));
    }
    layer.weights = w;
    if (const int64_t nb = layer.expected_bias_count(); nb > 0) {
      std::vector<float> bias(static_cast<size_t>(nb));
      for (auto &x : bias) x = static_cast<float>(rng.laplace(b));
      layer.biases = bias;
    }
  }
  return m;
}

inline ClassCounts random_histogram(Rng &rng, int total) {
  ClassCounts c;
  for (int i = 0; i < total; ++i) {
    switch (rng.uniform(0, 3)) {
      case 0: ++c.zero; break;
      case 1: ++c.one; break;
      case 2: ++c.power_of_two; break;
      default: ++c.generic; break;
    }
  }
  return c;
}

/// Brute-force conv: zero-pads the input into a fresh buffer, multiplies
/// every window, adds the bias at product scale and rounds through long
/// double. Independent of the golden model and of fixed_point helpers.
inline FeatureMaps brute_force_conv(const ConvParams &p, const QuantizedLayer &ql, const FeatureMaps &in) {
  const int hp = in.shape.height + 2 * p.pad;
  const int wp = in.shape.width + 2 * p.pad;
  std::vector<int64_t> padded(static_cast<size_t>(in.shape.channels) * hp * wp, 0);
  for (int c = 0; c < in.shape.channels; ++c)
    for (int y = 0; y < in.shape.height; ++y)
      for (int x = 0; x < in.shape.width; ++x)
        padded[(static_cast<size_t>(c) * hp + y + p.pad) * wp + x + p.pad] = in.at(c, y, x);

  const int oh = (hp - p.kernel) / p.stride + 1;
  const int ow = (wp - p.kernel) / p.stride + 1;
  FeatureMaps out({p.num_output, oh, ow}, ql.output_format);
  const int fin = ql.input_format.frac_bits;
  const int fw = ql.weight_format->frac_bits;
  const int fout = ql.output_format.frac_bits;
  const long double lo = static_cast<long double>(ql.output_format.min_raw());
  const long double hi = static_cast<long double>(ql.output_format.max_raw());
  for (int n = 0; n < p.num_output; ++n) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        int64_t acc = 0;
        size_t wi = static_cast<size_t>(n) * p.channels * p.kernel * p.kernel;
        for (int c = 0; c < p.channels; ++c)
          for (int u = 0; u < p.kernel; ++u)
            for (int v = 0; v < p.kernel; ++v, ++wi)
              acc += ql.weights[wi] *
                     padded[(static_cast<size_t>(c) * hp + oy * p.stride + u) * wp + ox * p.stride + v];
        long double real = std::ldexp(static_cast<long double>(acc), -(fin + fw));
        if (!ql.biases.empty()) real += std::ldexp(static_cast<long double>(ql.biases[n]), -fw);
        const long double scaled = std::ldexp(real, fout);
        long double rounded = std::floor(std::fabs(scaled) + 0.5L);
        if (scaled < 0) rounded = -rounded;
        out.at(n, oy, ox) = static_cast<int64_t>(std::clamp(rounded, lo, hi));
      }
    }
  }
  return out;
}

}  // namespace dhm::testing
