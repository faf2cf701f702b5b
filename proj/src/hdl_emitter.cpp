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

#include "dhm/hdl_emitter.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dhm/error.hpp"
#include "dhm/feature_maps.hpp"

namespace dhm {

using nlohmann::ordered_json;

namespace {

const std::set<std::string> &reserved_words() {
  static const std::set<std::string> words = {
      "abs",      "access",   "after",    "alias",     "all",       "and",       "architecture", "array",
      "assert",   "attribute", "begin",   "block",     "body",      "buffer",    "bus",          "case",
      "component", "configuration", "constant", "disconnect", "downto", "else", "elsif",       "end",
      "entity",   "exit",     "file",     "for",       "function",  "generate",  "generic",      "group",
      "guarded",  "if",       "impure",   "in",        "inertial",  "inout",     "is",           "label",
      "library",  "linkage",  "literal",  "loop",      "map",       "mod",       "nand",         "new",
      "next",     "nor",      "not",      "null",      "of",        "on",        "open",         "or",
      "others",   "out",      "package",  "port",      "postponed", "procedure", "process",      "pure",
      "range",    "record",   "register", "reject",    "rem",       "report",    "return",       "rol",
      "ror",      "select",   "severity", "shared",    "signal",    "sla",       "sll",          "sra",
      "srl",      "subtype",  "then",     "to",        "transport", "type",      "unaffected",   "units",
      "until",    "use",      "variable", "wait",      "when",      "while",     "with",         "xnor",
      "xor"};
  return words;
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

std::string slice(const std::string &vec, int index, int width) {
  return vec + "(" + std::to_string((index + 1) * width - 1) + " downto " + std::to_string(index * width) + ")";
}

std::string slv(int width) { return "std_logic_vector(" + std::to_string(width - 1) + " downto 0)"; }

std::string header_comment(const std::string &what, const std::string &model) {
  return "-- " + what + " for model '" + model + "'.\n-- Generated by dhmc " DHM_VERSION ". Do not edit.\n\n";
}

const char *context_clause =
    "library ieee;\n"
    "use ieee.std_logic_1164.all;\n"
    "use ieee.numeric_std.all;\n"
    "use work.dhm_pkg.all;\n";

/// Unique identifiers for the layers of a model.
std::vector<std::string> layer_identifiers(const CnnModel &model) {
  std::vector<std::string> ids;
  std::set<std::string> used;
  for (const auto &l : model.layers) {
    const std::string base = vhdl_identifier(l.name);
    std::string id = base;
    for (int k = 2; used.count(id); ++k) id = base + "_" + std::to_string(k);
    used.insert(id);
    ids.push_back(id);
  }
  return ids;
}

void reject_fc(const CnnModel &model) {
  for (const auto &l : model.layers) {
    if (l.is_fc()) {
      throw Error(ErrorCode::kUnsupported,
                  "layer '" + l.name + "' is fully connected and cannot be emitted as hardware");
    }
  }
}

/// Output stream channel of an actor whose output leaves its layer.
int stream_channel(const Actor &a) {
  if (const auto *s = std::get_if<SourceActor>(&a.kind)) return s->channel;
  if (const auto *act = std::get_if<ActivationActor>(&a.kind)) return act->channel;
  if (const auto *p = std::get_if<PoolActor>(&a.kind)) return p->channel;
  throw Error(ErrorCode::kInternal, "actor '" + a.id + "' does not terminate a layer");
}

std::string label_of(const Actor &a) { return a.id.substr(a.id.rfind('/') + 1); }

struct LayerWidths {
  int in_bits = 8;
  int w_bits = 8;
  int prod = 16;
  int acc = 16;
  int out_bits = 8;
};

LayerWidths widths_of(const GraphLayer &gl) {
  LayerWidths w;
  w.in_bits = gl.input_format.total_bits;
  w.w_bits = gl.weight_format ? gl.weight_format->total_bits : w.in_bits;
  w.prod = w.in_bits + w.w_bits;
  w.acc = accumulator_bits(std::max(w.in_bits, w.w_bits), int64_t{gl.in_shape.channels} * gl.kernel * gl.kernel + 1);
  w.out_bits = gl.output_format.total_bits;
  return w;
}

/// A leaf instance: entity, generics as (name, VHDL expression, resolved value).
struct Generic {
  std::string name;
  std::string expr;
  std::string value;
};

struct LeafInfo {
  std::string entity;  // empty for plain signal connections
  std::vector<Generic> generics;
};

Generic gen(const std::string &name, int64_t v) { return {name, std::to_string(v), std::to_string(v)}; }
Generic gen_bool(const std::string &name, bool v) { return {name, v ? "true" : "false", v ? "true" : "false"}; }

LeafInfo leaf_info(const ActorGraph &g, const Actor &a, const std::string &prefix) {
  const GraphLayer &gl = g.layers[static_cast<size_t>(a.layer)];
  const LayerWidths w = widths_of(gl);
  LeafInfo info;
  std::visit(
      [&](const auto &k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, NeighborhoodExtractor>) {
          info.entity = "dhm_neighborhood_extractor";
          info.generics = {gen("BITS", w.in_bits),          gen("KERNEL", k.kernel),
                           gen("STRIDE", k.stride),         gen("PAD", k.pad),
                           gen("IMAGE_WIDTH", k.image_width), gen("IMAGE_HEIGHT", k.image_height)};
        } else if constexpr (std::is_same_v<T, MultActor>) {
          const int64_t index = (int64_t{k.neuron} * gl.in_shape.channels + k.channel) * gl.kernel * gl.kernel + k.tap;
          if (g.specialized) {
            info.entity = "dhm_mult_const";
            info.generics = {gen("IN_BITS", w.in_bits), gen("OUT_BITS", w.prod),
                             {"WEIGHT", prefix + "_WEIGHTS(" + std::to_string(index) + ")", std::to_string(k.weight)}};
          } else {
            info.entity = "dhm_mult_var";
            info.generics = {gen("IN_BITS", w.in_bits), gen("W_BITS", w.w_bits), gen("OUT_BITS", w.prod)};
          }
        } else if constexpr (std::is_same_v<T, ShiftActor>) {
          info.entity = "dhm_shift";
          info.generics = {gen("IN_BITS", w.in_bits), gen("OUT_BITS", w.prod), gen("SHIFT", k.shift),
                           gen_bool("NEGATE", k.negative)};
        } else if constexpr (std::is_same_v<T, ConstZeroActor>) {
          info.entity = "dhm_const_zero";
          info.generics = {gen("OUT_BITS", w.acc)};
        } else if constexpr (std::is_same_v<T, AdderTreeActor>) {
          info.entity = "dhm_adder_tree";
          info.generics = {gen("ARITY", k.arity), gen("IN_BITS", w.prod), gen("OUT_BITS", w.acc)};
        } else if constexpr (std::is_same_v<T, NeuronSumActor>) {
          info.entity = "dhm_neuron_sum";
          info.generics = {gen("ARITY", k.arity),
                           gen("IN_BITS", w.acc),
                           gen("OUT_BITS", w.acc),
                           {"BIAS", prefix + "_BIASES(" + std::to_string(k.neuron) + ")", std::to_string(k.bias)},
                           gen("BIAS_SHIFT", k.bias_shift)};
        } else if constexpr (std::is_same_v<T, ActivationActor>) {
          info.entity = "dhm_activation";
          const bool conv = gl.kind == GraphLayer::kConv;
          const int fn = !k.fn ? 0 : (*k.fn == ActivationFn::kReLU ? 1 : 2);
          info.generics = {gen("IN_BITS", conv ? w.acc : w.in_bits),
                           gen("IN_FRAC", k.input_frac),
                           gen("MID_BITS", k.mid.total_bits),
                           gen("MID_FRAC", k.mid.frac_bits),
                           gen("OUT_BITS", k.out.total_bits),
                           {"FN", fn == 0 ? "FN_NONE" : fn == 1 ? "FN_RELU" : "FN_TANH", std::to_string(fn)}};
          if (fn == 2) info.generics.push_back({"LUT", prefix + "_TANH_LUT", prefix + "_TANH_LUT"});
        } else if constexpr (std::is_same_v<T, PoolActor>) {
          info.entity = "dhm_pool";
          info.generics = {gen("BITS", w.in_bits),
                           gen("KERNEL", k.kernel),
                           gen("STRIDE", k.stride),
                           {"MODE", k.mode == PoolMode::kMax ? "POOL_MAX" : "POOL_AVG", k.mode == PoolMode::kMax ? "0" : "1"},
                           gen("IMAGE_WIDTH", k.image_width),
                           gen("IMAGE_HEIGHT", k.image_height)};
        }
      },
      a.kind);
  return info;
}

struct Producer {
  size_t actor;
  int port;
};

/// Emits the entity and architecture of one (non-fused) layer.
void emit_layer(std::ostringstream &out, const ActorGraph &g, size_t li, const std::string &entity,
                const std::string &prefix, const std::vector<std::vector<size_t>> &members,
                const std::map<PortRef, PortRef> &producer, const std::vector<std::vector<size_t>> &consumers) {
  const GraphLayer &gl = g.layers[li];
  const LayerWidths w = widths_of(gl);
  const int in_ch = gl.in_shape.channels;
  const int out_ch = gl.out_shape.channels;

  out << context_clause << "use work." << g.name << "_params.all;\n\n";
  out << "-- " << gl.name << ": " << (gl.kind == GraphLayer::kConv ? "convolution" : gl.kind == GraphLayer::kPool ? "pooling" : "activation")
      << ", " << in_ch << "x" << gl.in_shape.height << "x" << gl.in_shape.width << " -> " << out_ch << "x"
      << gl.out_shape.height << "x" << gl.out_shape.width << "\n";
  out << "entity " << entity << " is\n  port (\n"
      << "    clk       : in  std_logic;\n"
      << "    rst       : in  std_logic;\n"
      << "    sof       : in  std_logic;\n"
      << "    in_data   : in  " << slv(in_ch * w.in_bits) << ";\n"
      << "    in_valid  : in  std_logic;\n"
      << "    out_data  : out " << slv(out_ch * w.out_bits) << ";\n"
      << "    out_valid : out std_logic\n  );\nend entity;\n\n";
  out << "architecture structural of " << entity << " is\n";

  auto width_of = [&](const Actor &a) -> int {
    return std::visit(
        [&](const auto &k) -> int {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, NeighborhoodExtractor>) return k.kernel * k.kernel * w.in_bits;
          else if constexpr (std::is_same_v<T, MultActor> || std::is_same_v<T, ShiftActor> || std::is_same_v<T, WireActor>) return w.prod;
          else if constexpr (std::is_same_v<T, ConstZeroActor> || std::is_same_v<T, AdderTreeActor> || std::is_same_v<T, NeuronSumActor>) return w.acc;
          else if constexpr (std::is_same_v<T, ActivationActor>) return k.out.total_bits;
          else return w.in_bits;
        },
        a.kind);
  };

  const auto &ids = members[li];
  for (size_t a : ids) {
    const Actor &actor = g.actors[a];
    const std::string l = label_of(actor);
    out << "  signal " << l << "_q : " << slv(width_of(actor)) << ";\n";
    out << "  signal " << l << "_v : std_logic;\n";
    if (actor.num_inputs() > 1 || std::holds_alternative<AdderTreeActor>(actor.kind) ||
        std::holds_alternative<NeuronSumActor>(actor.kind)) {
      const int in_w = std::holds_alternative<AdderTreeActor>(actor.kind) ? w.prod : w.acc;
      out << "  signal " << l << "_in : " << slv(actor.num_inputs() * in_w) << ";\n";
    }
  }
  out << "begin\n";

  // Data and valid expressions for the producer feeding (actor, port).
  auto source_of = [&](size_t a, int port) -> std::pair<std::string, std::string> {
    const PortRef p = producer.at({a, port});
    const Actor &src = g.actors[p.actor];
    if (src.layer != static_cast<int>(li)) {
      return {slice("in_data", stream_channel(src), w.in_bits), "in_valid"};
    }
    const std::string l = label_of(src);
    if (std::holds_alternative<NeighborhoodExtractor>(src.kind)) return {slice(l + "_q", p.port, w.in_bits), l + "_v"};
    return {l + "_q", l + "_v"};
  };

  for (size_t a : ids) {
    const Actor &actor = g.actors[a];
    const std::string l = label_of(actor);
    if (std::holds_alternative<WireActor>(actor.kind)) {
      const auto [d, v] = source_of(a, 0);
      out << "  -- " << l << ": weight 1\n";
      out << "  " << l << "_q <= std_logic_vector(resize(signed(" << d << "), " << w.prod << "));\n";
      out << "  " << l << "_v <= " << v << ";\n";
      continue;
    }
    const LeafInfo info = leaf_info(g, actor, prefix);
    const bool packed = std::holds_alternative<AdderTreeActor>(actor.kind) || std::holds_alternative<NeuronSumActor>(actor.kind);
    std::string in_data, in_valid;
    if (packed) {
      const int in_w = std::holds_alternative<AdderTreeActor>(actor.kind) ? w.prod : w.acc;
      for (int p = 0; p < actor.num_inputs(); ++p) {
        out << "  " << slice(l + "_in", p, in_w) << " <= " << source_of(a, p).first << ";\n";
      }
      in_data = l + "_in";
      in_valid = source_of(a, 0).second;
    } else {
      std::tie(in_data, in_valid) = source_of(a, 0);
    }
    out << "  " << l << " : entity work." << info.entity << "\n    generic map (";
    for (size_t i = 0; i < info.generics.size(); ++i) {
      out << (i ? ", " : "") << info.generics[i].name << " => " << info.generics[i].expr;
    }
    out << ")\n    port map (";
    const bool clocked = std::holds_alternative<NeighborhoodExtractor>(actor.kind) ||
                         std::holds_alternative<PoolActor>(actor.kind) || packed ||
                         std::holds_alternative<ActivationActor>(actor.kind);
    if (clocked) out << "clk => clk, rst => rst, ";
    if (std::holds_alternative<NeighborhoodExtractor>(actor.kind) || std::holds_alternative<PoolActor>(actor.kind)) {
      out << "sof => sof, ";
    }
    if (!std::holds_alternative<ConstZeroActor>(actor.kind)) out << "in_data => " << in_data << ", ";
    out << "in_valid => " << in_valid << ", ";
    if (const auto *m = std::get_if<MultActor>(&actor.kind); m && !g.specialized) {
      const int64_t index = (int64_t{m->neuron} * gl.in_shape.channels + m->channel) * gl.kernel * gl.kernel + m->tap;
      out << "weight => " << prefix << "_WEIGHTS(" << index << "), ";
    }
    out << "out_data => " << l << "_q, out_valid => " << l << "_v);\n";
  }

  // Layer outputs: actors whose consumers lie outside this layer.
  std::vector<std::string> outputs(static_cast<size_t>(out_ch));
  std::string valid;
  for (size_t a : ids) {
    for (size_t c : consumers[a]) {
      if (g.actors[c].layer == static_cast<int>(li)) continue;
      const int ch = stream_channel(g.actors[a]);
      outputs[static_cast<size_t>(ch)] = label_of(g.actors[a]);
      if (ch == 0) valid = label_of(g.actors[a]) + "_v";
    }
  }
  for (int c = 0; c < out_ch; ++c) {
    if (outputs[static_cast<size_t>(c)].empty()) {
      throw Error(ErrorCode::kInternal, "layer '" + gl.name + "' has no producer for output channel " + std::to_string(c));
    }
    out << "  " << slice("out_data", c, w.out_bits) << " <= " << outputs[static_cast<size_t>(c)] << "_q;\n";
  }
  out << "  out_valid <= " << valid << ";\n";
  out << "end architecture;\n\n";
}

void check_graph_matches(const ActorGraph &g, const QuantizedModel &qm) {
  reject_fc(qm.model);
  if (g.layers.size() != qm.model.layers.size()) {
    throw Error(ErrorCode::kInvalidArgument, "graph and quantized model describe different networks");
  }
  for (size_t i = 0; i < g.layers.size(); ++i) {
    if (g.layers[i].name != qm.model.layers[i].name) {
      throw Error(ErrorCode::kInvalidArgument, "graph layer '" + g.layers[i].name + "' does not match model layer '" +
                                                   qm.model.layers[i].name + "'");
    }
  }
}

std::string aggregate(const std::vector<std::string> &items, int per_line) {
  if (items.size() == 1) return "(0 => " + items[0] + ")";
  std::ostringstream out;
  out << "(\n";
  for (size_t i = 0; i < items.size(); ++i) {
    if (i % static_cast<size_t>(per_line) == 0) out << "    ";
    out << items[i];
    if (i + 1 < items.size()) out << ",";
    out << ((i + 1) % static_cast<size_t>(per_line) == 0 || i + 1 == items.size() ? "\n" : " ");
  }
  out << "  )";
  return out.str();
}

}  // namespace

std::string vhdl_identifier(std::string_view name) {
  std::string s;
  for (unsigned char c : name) {
    const char lc = static_cast<char>(std::tolower(c));
    if (std::isalnum(c) && c < 128) {
      s += lc;
    } else if (!s.empty() && s.back() != '_') {
      s += '_';
    }
  }
  while (!s.empty() && s.back() == '_') s.pop_back();
  if (s.empty() || std::isdigit(static_cast<unsigned char>(s[0]))) s = "l_" + s;
  if (reserved_words().count(s)) s += "_l";
  while (!s.empty() && s.back() == '_') s.pop_back();
  return s;
}

std::string twos_complement(int64_t value, int bits) {
  std::string s(static_cast<size_t>(bits), '0');
  const auto u = static_cast<uint64_t>(value);
  for (int i = 0; i < bits; ++i) s[static_cast<size_t>(bits - 1 - i)] = (u >> i) & 1 ? '1' : '0';
  return s;
}

std::string emit_params(const QuantizedModel &qm) {
  reject_fc(qm.model);
  const std::string name = vhdl_identifier(qm.model.name.empty() ? "network" : qm.model.name);
  const auto ids = layer_identifiers(qm.model);
  const auto shapes = propagate_shapes(qm.model);
  std::ostringstream out;
  out << header_comment("Quantized parameters", qm.model.name);
  out << "library ieee;\nuse ieee.std_logic_1164.all;\nuse work.dhm_pkg.all;\n\n";
  out << "package " << name << "_params is\n";
  out << "  constant PIXEL_SIZE : natural := " << qm.input_format.total_bits << ";\n";
  out << "  constant INPUT_FRAC : natural := " << qm.input_format.frac_bits << ";\n";
  out << "  constant INPUT_CHANNELS : natural := " << qm.model.input.channels << ";\n";
  out << "  constant IMAGE_HEIGHT : natural := " << qm.model.input.height << ";\n";
  out << "  constant IMAGE_WIDTH : natural := " << qm.model.input.width << ";\n";
  for (size_t i = 0; i < qm.model.layers.size(); ++i) {
    const auto &layer = qm.model.layers[i];
    const auto &ql = qm.layers[i];
    const std::string P = upper(ids[i]);
    out << "\n  -- " << layer.name << " (" << kind_name(layer.kind) << "): " << to_string(ql.input_format) << " -> "
        << to_string(ql.output_format);
    if (ql.weight_format) out << ", weights " << to_string(*ql.weight_format);
    out << "\n";
    out << "  constant " << P << "_IN_BITS : natural := " << ql.input_format.total_bits << ";\n";
    out << "  constant " << P << "_IN_FRAC : natural := " << ql.input_format.frac_bits << ";\n";
    out << "  constant " << P << "_OUT_BITS : natural := " << ql.output_format.total_bits << ";\n";
    out << "  constant " << P << "_OUT_FRAC : natural := " << ql.output_format.frac_bits << ";\n";
    if (const auto *c = std::get_if<ConvParams>(&layer.kind)) {
      const int wb = ql.weight_format->total_bits;
      out << "  constant " << P << "_WEIGHT_BITS : natural := " << wb << ";\n";
      out << "  constant " << P << "_WEIGHT_FRAC : natural := " << ql.weight_format->frac_bits << ";\n";
      out << "  constant " << P << "_KERNEL : natural := " << c->kernel << ";\n";
      out << "  constant " << P << "_NUM_OUTPUT : natural := " << c->num_output << ";\n";
      out << "  constant " << P << "_CHANNELS : natural := " << c->channels << ";\n";
      std::vector<std::string> w;
      for (int32_t v : ql.weights) w.push_back("\"" + twos_complement(v, wb) + "\"");
      out << "  -- [" << c->num_output << "][" << c->channels << "][" << c->kernel << "][" << c->kernel << "], row-major\n";
      out << "  type " << ids[i] << "_weight_array is array (0 to " << w.size() - 1 << ") of " << slv(wb) << ";\n";
      out << "  constant " << P << "_WEIGHTS : " << ids[i] << "_weight_array := " << aggregate(w, 8) << ";\n";
      std::vector<std::string> b;
      for (int n = 0; n < c->num_output; ++n) {
        b.push_back("\"" + twos_complement(ql.biases.empty() ? 0 : ql.biases[static_cast<size_t>(n)], wb) + "\"");
      }
      out << "  type " << ids[i] << "_bias_array is array (0 to " << b.size() - 1 << ") of " << slv(wb) << ";\n";
      out << "  constant " << P << "_BIASES : " << ids[i] << "_bias_array := " << aggregate(b, 8) << ";\n";
    }

    // Tanh table, at the format the activation actor sees.
    std::optional<std::pair<FixedPointFormat, FixedPointFormat>> tanh;
    if (layer.is_conv() && i + 1 < qm.model.layers.size()) {
      const auto *next = std::get_if<ActivationParams>(&qm.model.layers[i + 1].kind);
      if (next && next->fn == ActivationFn::kTanh) tanh.emplace(ql.output_format, qm.layers[i + 1].output_format);
    }
    if (const auto *a = std::get_if<ActivationParams>(&layer.kind);
        a && a->fn == ActivationFn::kTanh && !(i > 0 && qm.model.layers[i - 1].is_conv())) {
      tanh.emplace(ql.input_format, ql.output_format);
    }
    if (tanh) {
      const auto &[mid, fmt] = *tanh;
      if (mid.total_bits > 16) {
        throw Error(ErrorCode::kUnsupported, "tanh table for layer '" + layer.name + "' would need 2^" +
                                                 std::to_string(mid.total_bits) + " entries; at most 16 bits supported");
      }
      std::vector<std::string> lut;
      for (int64_t raw = mid.min_raw(); raw <= mid.max_raw(); ++raw) lut.push_back(std::to_string(tanh_lut_value(raw, mid, fmt)));
      out << "  -- tanh of " << to_string(mid) << " in " << to_string(fmt) << ", index raw + " << -mid.min_raw() << "\n";
      out << "  constant " << P << "_TANH_LUT : int_array(0 to " << lut.size() - 1 << ") := " << aggregate(lut, 16)
          << ";\n";
    }
  }
  out << "end package;\n";
  return out.str();
}

std::string emit_toplevel(const ActorGraph &g, const QuantizedModel &qm) {
  check_graph_matches(g, qm);
  const auto problems = check_graph(g);
  if (!problems.empty()) throw Error(ErrorCode::kInvalidArgument, "malformed graph: " + problems.front());
  const std::string name = vhdl_identifier(g.name.empty() ? "network" : g.name);
  ActorGraph named = g;
  named.name = name;
  const auto ids = layer_identifiers(qm.model);

  std::vector<std::vector<size_t>> members(g.layers.size());
  std::map<PortRef, PortRef> producer;
  std::vector<std::vector<size_t>> consumers(g.actors.size());
  for (size_t a = 0; a < g.actors.size(); ++a) {
    if (g.actors[a].layer >= 0) members[static_cast<size_t>(g.actors[a].layer)].push_back(a);
  }
  for (const auto &ch : g.channels) {
    producer[ch.to] = ch.from;
    consumers[ch.from.actor].push_back(ch.to.actor);
  }

  std::ostringstream out;
  out << header_comment("Structural netlist", g.name);
  out << "-- Leaf entities (dhm_*) come from the dhmc HDL library.\n";
  out << "-- Streams: data sampled when valid is high; sof pulses before each frame.\n\n";
  std::vector<size_t> chain;
  for (size_t li = 0; li < g.layers.size(); ++li) {
    if (g.layers[li].fused) continue;
    emit_layer(out, named, li, name + "_" + ids[li], upper(ids[li]), members, producer, consumers);
    chain.push_back(li);
  }

  const int in_bits = g.input_format.total_bits, out_bits = g.output_format.total_bits;
  out << context_clause << "\n";
  out << "entity " << name << "_toplevel is\n  port (\n"
      << "    clk       : in  std_logic;\n"
      << "    rst       : in  std_logic;\n"
      << "    sof       : in  std_logic;\n"
      << "    in_data   : in  " << slv(g.input_shape.channels * in_bits) << ";\n"
      << "    in_valid  : in  std_logic;\n"
      << "    out_data  : out " << slv(g.output_shape.channels * out_bits) << ";\n"
      << "    out_valid : out std_logic\n  );\nend entity;\n\n";
  out << "architecture structural of " << name << "_toplevel is\n";
  for (size_t li : chain) {
    const auto &gl = g.layers[li];
    out << "  signal " << ids[li] << "_data : " << slv(gl.out_shape.channels * gl.output_format.total_bits) << ";\n";
    out << "  signal " << ids[li] << "_valid : std_logic;\n";
  }
  out << "begin\n";
  std::string prev_data = "in_data", prev_valid = "in_valid";
  for (size_t li : chain) {
    out << "  " << ids[li] << "_i : entity work." << name << "_" << ids[li] << "\n";
    out << "    port map (clk => clk, rst => rst, sof => sof, in_data => " << prev_data << ", in_valid => " << prev_valid
        << ",\n              out_data => " << ids[li] << "_data, out_valid => " << ids[li] << "_valid);\n";
    prev_data = ids[li] + "_data";
    prev_valid = ids[li] + "_valid";
  }
  out << "  out_data <= " << prev_data << ";\n";
  out << "  out_valid <= " << prev_valid << ";\n";
  out << "end architecture;\n";
  return out.str();
}

std::vector<ManifestEntry> build_manifest(const ActorGraph &g) {
  std::map<std::string, ManifestEntry> entries;
  for (const auto &a : g.actors) {
    if (a.layer < 0 || std::holds_alternative<WireActor>(a.kind)) continue;
    const LeafInfo info = leaf_info(g, a, "");
    if (info.entity.empty()) continue;
    std::string bindings;
    for (const auto &gen : info.generics) {
      if (gen.name == "LUT") continue;
      bindings += (bindings.empty() ? "" : ", ") + gen.name + "=" + gen.value;
    }
    auto &e = entries[info.entity];
    e.entity = info.entity;
    ++e.instances;
    ++e.bindings[bindings];
  }
  std::vector<ManifestEntry> out;
  for (auto &[name, e] : entries) out.push_back(std::move(e));
  return out;
}

namespace {

ordered_json counts_json(const EntityCounts &c) {
  return {{"multipliers", c.multipliers},
          {"wires", c.wires},
          {"shifts", c.shifts},
          {"const_zeros", c.const_zeros},
          {"adder_trees", c.adder_trees},
          {"neuron_sums", c.neuron_sums},
          {"adders", c.adders()},
          {"activations", c.activations},
          {"neighborhood_extractors", c.neighborhood_extractors},
          {"pool_units", c.pool_units}};
}

}  // namespace

HdlDesign emit_design(const ActorGraph &g, const QuantizedModel &qm, const EmitOptions &options) {
  HdlDesign d;
  d.name = vhdl_identifier(g.name.empty() ? "network" : g.name);
  d.toplevel_file = d.name + "_toplevel.vhd";
  d.params_file = d.name + "_params.vhd";
  d.params_source = emit_params(qm);
  d.toplevel_source = emit_toplevel(g, qm);
  d.manifest = build_manifest(g);
  const auto census = count_entities(g);
  const auto ids = layer_identifiers(qm.model);

  ordered_json j;
  j["schema"] = "dhm-manifest/1";
  j["generator"] = "dhmc " DHM_VERSION;
  j["name"] = g.name;
  j["source"] = {{"topology", options.topology_source}, {"weights", options.weights_source}};
  j["options"] = {{"bits", qm.total_bits}, {"nef", g.nef}, {"specialized", g.specialized}};
  j["files"] = {d.toplevel_file, d.params_file, "manifest.json", "README.md"};
  j["ports"] = {{"input_channels", g.input_shape.channels},
                {"input_format", to_string(g.input_format)},
                {"output_channels", g.output_shape.channels},
                {"output_format", to_string(g.output_format)}};
  j["layers"] = ordered_json::array();
  for (size_t i = 0; i < g.layers.size(); ++i) {
    const auto &gl = g.layers[i];
    j["layers"].push_back({{"name", gl.name},
                           {"entity", gl.fused ? ordered_json(nullptr) : ordered_json(d.name + "_" + ids[i])},
                           {"kind", kind_name(qm.model.layers[i].kind)},
                           {"fused_into_previous", gl.fused}});
  }
  j["entities"] = ordered_json::array();
  for (const auto &e : d.manifest) {
    ordered_json b = ordered_json::array();
    for (const auto &[generics, count] : e.bindings) b.push_back({{"generics", generics}, {"count", count}});
    j["entities"].push_back({{"entity", e.entity}, {"instances", e.instances}, {"bindings", b}});
  }
  j["signal_connections"] = census.total.wires;
  j["census"]["total"] = counts_json(census.total);
  j["census"]["layers"] = ordered_json::array();
  for (const auto &[name, c] : census.layers) {
    auto entry = counts_json(c);
    entry["name"] = name;
    j["census"]["layers"].push_back(entry);
  }
  d.manifest_json = j.dump(2) + "\n";

  std::ostringstream r;
  r << "# " << g.name << " hardware description\n\n";
  r << "Generated by dhmc " DHM_VERSION " from `" << options.topology_source << "` and `" << options.weights_source
    << "`.\n\n";
  r << "Options: " << qm.total_bits << "-bit data, " << (g.nef ? "shared" : "per-neuron") << " neighborhood extractors, "
    << (g.specialized ? "constant-specialized" : "run-time") << " multipliers.\n\n";
  r << "| file | content |\n|---|---|\n";
  r << "| `" << d.toplevel_file << "` | layer entities and the `" << d.name << "_toplevel` netlist |\n";
  r << "| `" << d.params_file << "` | package `" << d.name << "_params`: formats, weights, biases |\n";
  r << "| `manifest.json` | leaf-entity instance counts and generic bindings |\n\n";
  r << "Compile `dhm_pkg.vhd` and the `dhm_*.vhd` leaf entities that ship with dhmc into library `work` first, "
       "then the params package, then the netlist.\n\n";
  r << "| entity | instances |\n|---|---|\n";
  for (const auto &e : d.manifest) r << "| " << e.entity << " | " << e.instances << " |\n";
  d.readme = r.str();
  return d;
}

std::vector<std::string> write_project(const HdlDesign &d, const std::string &dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create directory '" + dir + "': " + ec.message());
  const std::filesystem::path base(dir);
  const std::vector<std::pair<std::string, const std::string *>> files = {
      {d.toplevel_file, &d.toplevel_source},
      {d.params_file, &d.params_source},
      {"manifest.json", &d.manifest_json},
      {"README.md", &d.readme},
  };
  std::vector<std::string> written;
  for (const auto &[name, content] : files) {
    const std::string path = (base / name).string();
    write_file(path, *content);
    written.push_back(path);
  }
  return written;
}

EntityCounts census_from_manifest(std::string_view text) {
  EntityCounts c;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto &e : j.at("entities")) {
      const auto entity = e.at("entity").get<std::string>();
      const auto n = e.at("instances").get<int64_t>();
      if (entity == "dhm_mult_const" || entity == "dhm_mult_var") c.multipliers += n;
      else if (entity == "dhm_shift") c.shifts += n;
      else if (entity == "dhm_const_zero") c.const_zeros += n;
      else if (entity == "dhm_adder_tree") c.adder_trees += n;
      else if (entity == "dhm_neuron_sum") c.neuron_sums += n;
      else if (entity == "dhm_activation") c.activations += n;
      else if (entity == "dhm_neighborhood_extractor") c.neighborhood_extractors += n;
      else if (entity == "dhm_pool") c.pool_units += n;
    }
    c.wires = j.at("signal_connections").get<int64_t>();
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::kParse, std::string("manifest: ") + e.what());
  }
  return c;
}

std::map<std::string, std::vector<int64_t>> parse_params_constants(std::string_view text) {
  std::map<std::string, std::vector<int64_t>> out;
  size_t pos = 0;
  while ((pos = text.find("constant ", pos)) != std::string_view::npos) {
    pos += 9;
    size_t name_end = pos;
    while (name_end < text.size() && (std::isalnum(static_cast<unsigned char>(text[name_end])) || text[name_end] == '_')) {
      ++name_end;
    }
    const std::string name(text.substr(pos, name_end - pos));
    const size_t assign = text.find(":=", name_end);
    const size_t stmt_end = text.find(';', name_end);
    if (assign == std::string_view::npos || stmt_end == std::string_view::npos || assign > stmt_end) continue;
    size_t p = assign + 2;
    while (p < stmt_end && std::isspace(static_cast<unsigned char>(text[p]))) ++p;
    if (p >= stmt_end || text[p] != '(') continue;
    std::vector<int64_t> values;
    for (size_t q = text.find('"', p); q != std::string_view::npos && q < stmt_end; q = text.find('"', q)) {
      const size_t close = text.find('"', q + 1);
      if (close == std::string_view::npos) break;
      const std::string_view bits = text.substr(q + 1, close - q - 1);
      uint64_t u = 0;
      for (char ch : bits) u = (u << 1) | static_cast<uint64_t>(ch == '1');
      int64_t v = static_cast<int64_t>(u);
      if (!bits.empty() && bits[0] == '1') v -= static_cast<int64_t>(uint64_t{1} << bits.size());
      values.push_back(v);
      q = close + 1;
    }
    if (!values.empty()) out[name] = std::move(values);
    pos = stmt_end;
  }
  return out;
}

}  // namespace dhm
