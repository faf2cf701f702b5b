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

// Direct-hardware-mapping actor graph: one actor per multiplier, adder,
// activation, pooling unit and neighborhood extractor of the network.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "dhm/fixed_point.hpp"
#include "dhm/model.hpp"
#include "dhm/quantizer.hpp"

namespace dhm {

/// Hardware cost tier of a multiplication by a constant.
struct MultClass {
  enum Kind { kZero, kOne, kPowerOfTwo, kGeneric };
  Kind kind = kGeneric;
  int shift = 0;          // PowerOfTwo only: |w| == 2^shift
  bool negative = false;  // PowerOfTwo only

  bool operator==(const MultClass &) const = default;
};

const char *to_string(MultClass::Kind kind);

// Actor kinds. Position fields (neuron, channel, tap) locate the actor in
// its layer; they do not affect semantics.

struct SourceActor {
  int channel = 0;
  bool operator==(const SourceActor &) const = default;
};

struct SinkActor {
  int channel = 0;
  bool operator==(const SinkActor &) const = default;
};

/// Line-buffer window extractor: one raster input, K*K tap outputs
/// (row-major window order). Emits only stride-aligned windows of the
/// zero-padded frame.
struct NeighborhoodExtractor {
  int kernel = 1;
  int stride = 1;
  int pad = 0;
  int image_width = 1;   // unpadded input frame
  int image_height = 1;
  int channel = 0;
  bool operator==(const NeighborhoodExtractor &) const = default;
};

struct MultActor {
  int64_t weight = 0;
  MultClass cls;
  int neuron = 0, channel = 0, tap = 0;
  bool operator==(const MultActor &) const = default;
};

/// Multiplication by one, reduced to a signal connection.
struct WireActor {
  int neuron = 0, channel = 0, tap = 0;
  bool operator==(const WireActor &) const = default;
};

/// Multiplication by +-2^shift.
struct ShiftActor {
  int shift = 0;
  bool negative = false;
  int neuron = 0, channel = 0, tap = 0;
  bool operator==(const ShiftActor &) const = default;
};

/// Emits 0 once per trigger token; stands in for a neuron whose every
/// kernel weight is zero.
struct ConstZeroActor {
  int neuron = 0;
  bool operator==(const ConstZeroActor &) const = default;
};

/// Intra-convolution reduction of one convolution engine.
struct AdderTreeActor {
  int arity = 0;
  int neuron = 0, channel = 0;
  bool operator==(const AdderTreeActor &) const = default;
};

/// Inter-convolution reduction of one neuron plus its bias, which is
/// shifted left by `bias_shift` into accumulator scale.
struct NeuronSumActor {
  int arity = 0;
  int64_t bias = 0;
  int bias_shift = 0;
  int neuron = 0;
  bool operator==(const NeuronSumActor &) const = default;
};

/// Requantizes its input (raw with `input_frac` fractional bits) to `mid`,
/// then applies `fn` producing `out`. Without `fn` it is a pure requantizer
/// and `out` == `mid`.
struct ActivationActor {
  std::optional<ActivationFn> fn;
  int input_frac = 0;
  FixedPointFormat mid;
  FixedPointFormat out;
  int channel = 0;
  bool operator==(const ActivationActor &) const = default;
};

/// Pooling unit with its own window buffer.
struct PoolActor {
  int kernel = 2;
  int stride = 2;
  PoolMode mode = PoolMode::kMax;
  int image_width = 1;
  int image_height = 1;
  int channel = 0;
  bool operator==(const PoolActor &) const = default;
};

using ActorKind = std::variant<SourceActor, SinkActor, NeighborhoodExtractor, MultActor, WireActor, ShiftActor,
                               ConstZeroActor, AdderTreeActor, NeuronSumActor, ActivationActor, PoolActor>;

struct Actor {
  std::string id;
  int layer = -1;  // index into ActorGraph::layers, -1 for sources and sinks
  ActorKind kind;

  int num_inputs() const;
  int num_outputs() const;
  bool operator==(const Actor &) const = default;
};

struct PortRef {
  size_t actor = 0;
  int port = 0;
  bool operator==(const PortRef &) const = default;
  auto operator<=>(const PortRef &) const = default;
};

/// Point-to-point FIFO. An output port may feed several channels; every
/// input port is fed by exactly one.
struct Channel {
  PortRef from;
  PortRef to;
  bool operator==(const Channel &) const = default;
};

struct GraphLayer {
  enum Kind { kConv, kPool, kActivation };
  std::string name;
  Kind kind = kConv;
  Shape3 in_shape;
  Shape3 out_shape;
  int kernel = 1;
  int stride = 1;
  int pad = 0;
  int num_output = 0;
  FixedPointFormat input_format;
  std::optional<FixedPointFormat> weight_format;
  FixedPointFormat output_format;
  std::optional<ActivationFn> activation;  // conv: fused activation; activation layer: its function
  bool fused = false;                      // activation layer merged into the preceding conv

  bool operator==(const GraphLayer &) const = default;
};

struct ActorGraph {
  std::string name;
  Shape3 input_shape;
  Shape3 output_shape;
  FixedPointFormat input_format;
  FixedPointFormat output_format;
  bool nef = true;
  bool specialized = false;
  std::vector<GraphLayer> layers;
  std::vector<Actor> actors;
  std::vector<Channel> channels;
  std::vector<size_t> input_ports;   // source actor per input channel
  std::vector<size_t> output_ports;  // sink actor per output channel

  bool operator==(const ActorGraph &) const = default;
};

/// Builds the DHM graph of a conv/pool/activation network. With `nef` one
/// neighborhood extractor per input channel is shared by all neurons;
/// without it every (neuron, channel) pair gets its own.
/// Throws Error(kUnsupported) for fully connected layers.
ActorGraph build_actor_graph(const QuantizedModel &qm, bool nef = true);

struct EntityCounts {
  int64_t multipliers = 0;
  int64_t wires = 0;
  int64_t shifts = 0;
  int64_t const_zeros = 0;
  int64_t adder_trees = 0;
  int64_t neuron_sums = 0;
  int64_t activations = 0;
  int64_t neighborhood_extractors = 0;
  int64_t pool_units = 0;

  int64_t adders() const { return adder_trees + neuron_sums; }
  EntityCounts &operator+=(const EntityCounts &other);
  bool operator==(const EntityCounts &) const = default;
};

struct EntityCensus {
  std::vector<std::pair<std::string, EntityCounts>> layers;
  EntityCounts total;
};

EntityCensus count_entities(const ActorGraph &g);

enum class FootprintMode {
  kWindowOnly,     // K*K window words per extractor
  kArchitectural,  // (K-1) line buffers of padded width plus K*K window registers
};

struct LayerFootprint {
  std::string layer;
  int64_t extractors = 0;
  int64_t words = 0;
  int64_t bits = 0;
};

/// Neighborhood-extractor buffer memory per layer (zero for layers
/// without extractors).
std::vector<LayerFootprint> memory_footprint(const ActorGraph &g, FootprintMode mode, int word_bits);

/// Structural problems: bad port indices, unfed or multiply-fed inputs,
/// cycles. Empty for a well-formed graph.
std::vector<std::string> check_graph(const ActorGraph &g);

/// Kahn topological order over channels, or nullopt on a cycle.
std::optional<std::vector<size_t>> topological_order(const ActorGraph &g);

/// Graphviz rendering for inspection.
std::string to_dot(const ActorGraph &g);

}  // namespace dhm
