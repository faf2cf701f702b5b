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

// Linear logic-element cost model and throughput arithmetic.

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dhm/actor_graph.hpp"
#include "dhm/model.hpp"
#include "dhm/quantizer.hpp"
#include "dhm/specializer.hpp"

namespace dhm {

/// Cost constants in ALM-equivalents. The multiplier and adder
/// coefficients are derived from three measured 3x3 engine anchors; the
/// per-bit constants are fixed by hand.
struct Calibration {
  std::string family = "generic-alm";
  // Anchors: a K x K engine at `anchor_bits` bits.
  int anchor_kernel = 3;
  int anchor_bits = 8;
  double variable_engine_alm = 380;  // every tap a run-time multiplier
  double constant_engine_alm = 121;  // every tap a generic constant multiplier
  double adder_tree_alm = 70;        // reduction tree alone, output register included
  // Hand-fixed per-bit costs.
  double register_alm_per_bit = 0.25;
  double shift_alm_per_bit = 0.25;
  double wire_alm_per_bit = 0.125;
  double activation_alm_per_bit = 1.0;
  double lut_bits_per_alm = 64;
  // DSP alternative for a 3x3 engine.
  double dsp_per_variable_engine = 10;
  double dsp_per_constant_engine = 7;

  /// Adder cost per input bit.
  double adder_alm_per_bit() const;
  /// Multiplier cost per squared operand bit.
  double variable_mult_alm_per_bit2() const;
  double constant_mult_alm_per_bit2() const;

  bool operator==(const Calibration &) const = default;
};

Calibration default_calibration();
Calibration parse_calibration(std::string_view json);
std::string calibration_json(const Calibration &cal);

/// How multiplications are realized: run-time multipliers fed with the
/// weight as a signal, or constant-coefficient logic per class.
enum class MultiplierMapping { kVariable, kConstant };

/// Width in bits of the product entering the adder tree.
int product_bits(MultClass::Kind kind, int bits);
/// Cost of one tap: its multiplier (if any) plus its share of the tree.
double tap_cost(MultClass::Kind kind, int bits, MultiplierMapping mapping, const Calibration &cal);
/// Output register of an engine; the cost left when every tap is Zero.
double engine_base_cost(int kernel, int bits, const Calibration &cal);

/// One K x K convolution engine. Under kVariable every tap is a run-time
/// multiplier whatever its weight. Throws Error(kInvalidArgument) unless
/// the histogram totals K*K.
double estimate_conv_engine(int kernel, int bits, const ClassCounts &classes, MultiplierMapping mapping,
                            const Calibration &cal);

/// Operations per input pixel: every conv MAC at the input pixel rate plus
/// one bias add and one activation per neuron, plus K*K-1 compares per
/// pooled channel and one op per channel of a standalone activation.
double ops_per_pixel(const CnnModel &model);

/// GOPs/s at a pixel clock of `fmax_hz`.
double throughput_gops(double ops_per_pixel, double fmax_hz);

struct LayerReport {
  std::string name;
  std::string kind;
  double logic_elements = 0;
  double dsp_alternative = 0;  // DSP blocks the generic multipliers would take instead
  int64_t buffer_bits = 0;               // architectural line buffers
  int64_t buffer_bits_window_only = 0;   // K*K words per extractor
  ClassCounts multipliers;               // class histogram of the layer's constant weights
  int64_t generic_multipliers = 0;       // multiplier actors present in the graph
  double ops_per_pixel = 0;

  bool operator==(const LayerReport &) const = default;
};

struct ResourceReport {
  std::string name;
  int bits = 0;
  bool nef = true;
  bool specialized = false;
  std::optional<double> fmax_hz;
  std::vector<LayerReport> layers;
  LayerReport total;
  std::optional<double> throughput_gops;

  bool operator==(const ResourceReport &) const = default;
};

/// Aggregates engine costs, extractor buffers and ops of a built graph.
/// Multipliers are costed as kVariable when `g` is not specialized.
ResourceReport estimate_network(const QuantizedModel &qm, const ActorGraph &g, const Calibration &cal,
                                std::optional<double> fmax_hz = std::nullopt);

std::string report_json(const ResourceReport &report);
ResourceReport parse_report_json(std::string_view json);
std::string report_table(const ResourceReport &report);

}  // namespace dhm
