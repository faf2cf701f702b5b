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

#include "dhm/estimator.hpp"

#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "dhm/error.hpp"

namespace dhm {

using nlohmann::ordered_json;

namespace {

int half_up(int bits) { return (bits + 1) / 2; }

double anchor_base(const Calibration &cal) {
  return cal.register_alm_per_bit * accumulator_bits(cal.anchor_bits, int64_t{cal.anchor_kernel} * cal.anchor_kernel);
}

double anchor_taps(const Calibration &cal) { return double(cal.anchor_kernel) * cal.anchor_kernel; }

}  // namespace

double Calibration::adder_alm_per_bit() const {
  return (adder_tree_alm - anchor_base(*this)) / (anchor_taps(*this) * 2.0 * anchor_bits);
}

double Calibration::variable_mult_alm_per_bit2() const {
  return (variable_engine_alm - adder_tree_alm) / (anchor_taps(*this) * anchor_bits * anchor_bits);
}

double Calibration::constant_mult_alm_per_bit2() const {
  return (constant_engine_alm - adder_tree_alm) / (anchor_taps(*this) * anchor_bits * anchor_bits);
}

Calibration default_calibration() { return {}; }

Calibration parse_calibration(std::string_view text) {
  Calibration cal;
  try {
    const auto j = nlohmann::json::parse(text);
    cal.family = j.value("family", cal.family);
    const auto &a = j.at("anchors");
    cal.anchor_kernel = a.at("kernel").get<int>();
    cal.anchor_bits = a.at("bits").get<int>();
    cal.variable_engine_alm = a.at("variable_engine_alm").get<double>();
    cal.constant_engine_alm = a.at("constant_engine_alm").get<double>();
    cal.adder_tree_alm = a.at("adder_tree_alm").get<double>();
    const auto &p = j.at("per_bit");
    cal.register_alm_per_bit = p.at("register").get<double>();
    cal.shift_alm_per_bit = p.at("shift").get<double>();
    cal.wire_alm_per_bit = p.at("wire").get<double>();
    cal.activation_alm_per_bit = p.at("activation").get<double>();
    cal.lut_bits_per_alm = p.at("lut_bits_per_alm").get<double>();
    const auto &d = j.at("dsp");
    cal.dsp_per_variable_engine = d.at("variable_engine").get<double>();
    cal.dsp_per_constant_engine = d.at("constant_engine").get<double>();
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::kParse, std::string("calibration: ") + e.what());
  }
  if (cal.anchor_kernel < 1 || cal.anchor_bits < 2 || cal.lut_bits_per_alm <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "calibration: anchor kernel/bits out of range");
  }
  if (!(cal.variable_engine_alm >= cal.constant_engine_alm && cal.constant_engine_alm >= cal.adder_tree_alm &&
        cal.adder_tree_alm > anchor_base(cal))) {
    throw Error(ErrorCode::kInvalidArgument,
                "calibration: anchors must satisfy variable >= constant >= adder tree > engine output register");
  }
  return cal;
}

std::string calibration_json(const Calibration &cal) {
  ordered_json j{
      {"family", cal.family},
      {"anchors",
       {{"kernel", cal.anchor_kernel},
        {"bits", cal.anchor_bits},
        {"variable_engine_alm", cal.variable_engine_alm},
        {"constant_engine_alm", cal.constant_engine_alm},
        {"adder_tree_alm", cal.adder_tree_alm}}},
      {"per_bit",
       {{"register", cal.register_alm_per_bit},
        {"shift", cal.shift_alm_per_bit},
        {"wire", cal.wire_alm_per_bit},
        {"activation", cal.activation_alm_per_bit},
        {"lut_bits_per_alm", cal.lut_bits_per_alm}}},
      {"dsp", {{"variable_engine", cal.dsp_per_variable_engine}, {"constant_engine", cal.dsp_per_constant_engine}}},
  };
  return j.dump(2) + "\n";
}

int product_bits(MultClass::Kind kind, int bits) {
  switch (kind) {
    case MultClass::kZero: return 0;
    case MultClass::kOne: return bits;
    case MultClass::kPowerOfTwo: return bits + half_up(bits);
    case MultClass::kGeneric: return 2 * bits;
  }
  return 2 * bits;
}

double tap_cost(MultClass::Kind kind, int bits, MultiplierMapping mapping, const Calibration &cal) {
  const double b = bits;
  const double adder = cal.adder_alm_per_bit();
  if (mapping == MultiplierMapping::kVariable) return cal.variable_mult_alm_per_bit2() * b * b + adder * 2 * b;
  switch (kind) {
    case MultClass::kZero: return 0;
    case MultClass::kOne: return cal.wire_alm_per_bit * b + adder * product_bits(kind, bits);
    case MultClass::kPowerOfTwo: return cal.shift_alm_per_bit * b + adder * product_bits(kind, bits);
    case MultClass::kGeneric: return cal.constant_mult_alm_per_bit2() * b * b + adder * product_bits(kind, bits);
  }
  return 0;
}

double engine_base_cost(int kernel, int bits, const Calibration &cal) {
  return cal.register_alm_per_bit * accumulator_bits(bits, int64_t{kernel} * kernel);
}

double estimate_conv_engine(int kernel, int bits, const ClassCounts &classes, MultiplierMapping mapping,
                            const Calibration &cal) {
  if (kernel < 1 || bits < 2) throw Error(ErrorCode::kInvalidArgument, "kernel must be >= 1 and bits >= 2");
  if (classes.total() != int64_t{kernel} * kernel) {
    throw Error(ErrorCode::kInvalidArgument, "class histogram totals " + std::to_string(classes.total()) +
                                                 ", expected " + std::to_string(kernel * kernel));
  }
  return engine_base_cost(kernel, bits, cal) + classes.zero * tap_cost(MultClass::kZero, bits, mapping, cal) +
         classes.one * tap_cost(MultClass::kOne, bits, mapping, cal) +
         classes.power_of_two * tap_cost(MultClass::kPowerOfTwo, bits, mapping, cal) +
         classes.generic * tap_cost(MultClass::kGeneric, bits, mapping, cal);
}

namespace {

double layer_ops(const CnnModel &model, size_t i, const Shape3 &in) {
  const auto &layer = model.layers[i];
  if (const auto *c = std::get_if<ConvParams>(&layer.kind)) {
    return double(c->num_output) * c->channels * c->kernel * c->kernel + 2.0 * c->num_output;
  }
  if (const auto *p = std::get_if<PoolParams>(&layer.kind)) return double(in.channels) * (p->kernel * p->kernel - 1);
  if (layer.is_activation() && !(i > 0 && model.layers[i - 1].is_conv())) return in.channels;
  return 0;
}

}  // namespace

double ops_per_pixel(const CnnModel &model) {
  const auto shapes = propagate_shapes(model);
  double ops = 0;
  for (size_t i = 0; i < model.layers.size() && i < shapes.size(); ++i) ops += layer_ops(model, i, shapes[i]);
  return ops;
}

double throughput_gops(double ops, double fmax_hz) { return ops * fmax_hz * 1e-9; }

ResourceReport estimate_network(const QuantizedModel &qm, const ActorGraph &g, const Calibration &cal,
                                std::optional<double> fmax_hz) {
  if (g.layers.size() != qm.model.layers.size()) {
    throw Error(ErrorCode::kInvalidArgument, "graph and quantized model describe different networks");
  }
  ResourceReport r;
  r.name = g.name;
  r.bits = qm.total_bits;
  r.nef = g.nef;
  r.specialized = g.specialized;
  r.fmax_hz = fmax_hz;
  const auto shapes = propagate_shapes(qm.model);
  const auto stats = kernel_statistics(qm);
  const auto arch = memory_footprint(g, FootprintMode::kArchitectural, qm.total_bits);
  const auto window = memory_footprint(g, FootprintMode::kWindowOnly, qm.total_bits);
  for (size_t i = 0; i < g.layers.size(); ++i) {
    LayerReport l;
    l.name = g.layers[i].name;
    l.kind = kind_name(qm.model.layers[i].kind);
    l.ops_per_pixel = layer_ops(qm.model, i, shapes[i]);
    l.buffer_bits = arch[i].bits;
    l.buffer_bits_window_only = window[i].bits;
    for (const auto &[name, counts] : stats.layers) {
      if (name == l.name) l.multipliers = counts;
    }
    r.layers.push_back(l);
  }

  const double adder = cal.adder_alm_per_bit();
  const double taps = anchor_taps(cal);
  const auto mapping = g.specialized ? MultiplierMapping::kConstant : MultiplierMapping::kVariable;
  for (const auto &actor : g.actors) {
    if (actor.layer < 0) continue;
    const GraphLayer &gl = g.layers[static_cast<size_t>(actor.layer)];
    LayerReport &l = r.layers[static_cast<size_t>(actor.layer)];
    const int b = gl.weight_format ? std::max(gl.input_format.total_bits, gl.weight_format->total_bits)
                                   : gl.input_format.total_bits;
    std::visit(
        [&](const auto &k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, MultActor>) {
            l.logic_elements += tap_cost(MultClass::kGeneric, b, mapping, cal);
            l.dsp_alternative +=
                (mapping == MultiplierMapping::kVariable ? cal.dsp_per_variable_engine : cal.dsp_per_constant_engine) /
                taps;
            ++l.generic_multipliers;
          } else if constexpr (std::is_same_v<T, WireActor>) {
            l.logic_elements += tap_cost(MultClass::kOne, b, MultiplierMapping::kConstant, cal);
          } else if constexpr (std::is_same_v<T, ShiftActor>) {
            l.logic_elements += tap_cost(MultClass::kPowerOfTwo, b, MultiplierMapping::kConstant, cal);
          } else if constexpr (std::is_same_v<T, AdderTreeActor>) {
            l.logic_elements += engine_base_cost(gl.kernel, b, cal);
          } else if constexpr (std::is_same_v<T, NeuronSumActor>) {
            const int acc = accumulator_bits(b, int64_t{gl.in_shape.channels} * gl.kernel * gl.kernel);
            l.logic_elements += adder * acc * (k.arity + 1);
          } else if constexpr (std::is_same_v<T, ActivationActor>) {
            l.logic_elements += cal.activation_alm_per_bit * b;
            if (k.fn == ActivationFn::kTanh) l.logic_elements += double(int64_t{1} << k.mid.total_bits) * k.out.total_bits / cal.lut_bits_per_alm;
          } else if constexpr (std::is_same_v<T, NeighborhoodExtractor>) {
            l.logic_elements += cal.register_alm_per_bit * k.kernel * k.kernel * b;
          } else if constexpr (std::is_same_v<T, PoolActor>) {
            l.logic_elements += cal.register_alm_per_bit * k.kernel * k.kernel * b + adder * (k.kernel * k.kernel - 1) * b;
          }
        },
        actor.kind);
  }

  r.total.name = "total";
  r.total.kind = "network";
  for (const auto &l : r.layers) {
    r.total.logic_elements += l.logic_elements;
    r.total.dsp_alternative += l.dsp_alternative;
    r.total.buffer_bits += l.buffer_bits;
    r.total.buffer_bits_window_only += l.buffer_bits_window_only;
    r.total.multipliers += l.multipliers;
    r.total.generic_multipliers += l.generic_multipliers;
    r.total.ops_per_pixel += l.ops_per_pixel;
  }
  if (fmax_hz) r.throughput_gops = throughput_gops(r.total.ops_per_pixel, *fmax_hz);
  return r;
}

namespace {

ordered_json layer_json(const LayerReport &l) {
  return {
      {"name", l.name},
      {"kind", l.kind},
      {"logic_elements", l.logic_elements},
      {"dsp_alternative", l.dsp_alternative},
      {"buffer_bits", l.buffer_bits},
      {"buffer_bits_window_only", l.buffer_bits_window_only},
      {"multipliers",
       {{"zero", l.multipliers.zero},
        {"one", l.multipliers.one},
        {"power_of_two", l.multipliers.power_of_two},
        {"generic", l.multipliers.generic}}},
      {"generic_multipliers", l.generic_multipliers},
      {"ops_per_pixel", l.ops_per_pixel},
  };
}

LayerReport layer_from_json(const nlohmann::json &j) {
  LayerReport l;
  l.name = j.at("name").get<std::string>();
  l.kind = j.at("kind").get<std::string>();
  l.logic_elements = j.at("logic_elements").get<double>();
  l.dsp_alternative = j.at("dsp_alternative").get<double>();
  l.buffer_bits = j.at("buffer_bits").get<int64_t>();
  l.buffer_bits_window_only = j.at("buffer_bits_window_only").get<int64_t>();
  const auto &m = j.at("multipliers");
  l.multipliers.zero = m.at("zero").get<int64_t>();
  l.multipliers.one = m.at("one").get<int64_t>();
  l.multipliers.power_of_two = m.at("power_of_two").get<int64_t>();
  l.multipliers.generic = m.at("generic").get<int64_t>();
  l.generic_multipliers = j.at("generic_multipliers").get<int64_t>();
  l.ops_per_pixel = j.at("ops_per_pixel").get<double>();
  return l;
}

}  // namespace

std::string report_json(const ResourceReport &r) {
  ordered_json j;
  j["schema"] = "dhm-resource-report/1";
  j["name"] = r.name;
  j["bits"] = r.bits;
  j["nef"] = r.nef;
  j["specialized"] = r.specialized;
  j["fmax_hz"] = r.fmax_hz ? ordered_json(*r.fmax_hz) : ordered_json(nullptr);
  j["throughput_gops"] = r.throughput_gops ? ordered_json(*r.throughput_gops) : ordered_json(nullptr);
  j["layers"] = ordered_json::array();
  for (const auto &l : r.layers) j["layers"].push_back(layer_json(l));
  j["total"] = layer_json(r.total);
  return j.dump(2) + "\n";
}

ResourceReport parse_report_json(std::string_view text) {
  ResourceReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("schema").get<std::string>() != "dhm-resource-report/1") {
      throw Error(ErrorCode::kParse, "resource report: unknown schema");
    }
    r.name = j.at("name").get<std::string>();
    r.bits = j.at("bits").get<int>();
    r.nef = j.at("nef").get<bool>();
    r.specialized = j.at("specialized").get<bool>();
    if (!j.at("fmax_hz").is_null()) r.fmax_hz = j["fmax_hz"].get<double>();
    if (!j.at("throughput_gops").is_null()) r.throughput_gops = j["throughput_gops"].get<double>();
    for (const auto &l : j.at("layers")) r.layers.push_back(layer_from_json(l));
    r.total = layer_from_json(j.at("total"));
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::kParse, std::string("resource report: ") + e.what());
  }
  return r;
}

std::string report_table(const ResourceReport &r) {
  std::ostringstream out;
  out << "network " << r.name << ", " << r.bits << "-bit, " << (r.specialized ? "constant" : "variable")
      << " multipliers, " << (r.nef ? "shared" : "per-neuron") << " extractors\n";
  out << std::left << std::setw(14) << "layer" << std::right << std::setw(14) << "ALM" << std::setw(10) << "DSP alt"
      << std::setw(12) << "mults" << std::setw(14) << "buffer bits" << std::setw(12) << "ops/px" << "\n";
  auto row = [&](const LayerReport &l) {
    out << std::left << std::setw(14) << l.name << std::right << std::fixed << std::setprecision(1) << std::setw(14)
        << l.logic_elements << std::setw(10) << l.dsp_alternative << std::setw(12) << l.generic_multipliers
        << std::setw(14) << l.buffer_bits << std::setw(12) << std::setprecision(0) << l.ops_per_pixel << "\n";
  };
  for (const auto &l : r.layers) row(l);
  row(r.total);
  if (r.throughput_gops) {
    out << std::setprecision(2) << "throughput " << *r.throughput_gops << " GOPs/s at " << *r.fmax_hz / 1e6
        << " MHz\n";
  }
  return out.str();
}

}  // namespace dhm
