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

#include "dhm/actor_graph.hpp"

#include <map>
#include <sstream>

#include "dhm/error.hpp"
#include "dhm/specializer.hpp"

namespace dhm {

const char *to_string(MultClass::Kind kind) {
  switch (kind) {
    case MultClass::kZero: return "zero";
    case MultClass::kOne: return "one";
    case MultClass::kPowerOfTwo: return "power_of_two";
    case MultClass::kGeneric: return "generic";
  }
  return "?";
}

int Actor::num_inputs() const {
  return std::visit(
      [](const auto &k) -> int {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, SourceActor>) return 0;
        else if constexpr (std::is_same_v<T, AdderTreeActor> || std::is_same_v<T, NeuronSumActor>) return k.arity;
        else return 1;
      },
      kind);
}

int Actor::num_outputs() const {
  return std::visit(
      [](const auto &k) -> int {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, SinkActor>) return 0;
        else if constexpr (std::is_same_v<T, NeighborhoodExtractor>) return k.kernel * k.kernel;
        else return 1;
      },
      kind);
}

EntityCounts &EntityCounts::operator+=(const EntityCounts &o) {
  multipliers += o.multipliers;
  wires += o.wires;
  shifts += o.shifts;
  const_zeros += o.const_zeros;
  adder_trees += o.adder_trees;
  neuron_sums += o.neuron_sums;
  activations += o.activations;
  neighborhood_extractors += o.neighborhood_extractors;
  pool_units += o.pool_units;
  return *this;
}

namespace {

class GraphBuilder {
 public:
  explicit GraphBuilder(ActorGraph &g) : g_(g) {}

  size_t add(std::string id, int layer, ActorKind kind) {
    g_.actors.push_back({std::move(id), layer, std::move(kind)});
    return g_.actors.size() - 1;
  }

  void connect(PortRef from, size_t to_actor, int to_port) { g_.channels.push_back({from, {to_actor, to_port}}); }

 private:
  ActorGraph &g_;
};

std::string idx(const char *prefix, int v) { return prefix + std::to_string(v); }

}  // namespace

ActorGraph build_actor_graph(const QuantizedModel &qm, bool nef) {
  const CnnModel &model = qm.model;
  if (qm.layers.size() != model.layers.size()) throw Error(ErrorCode::kInvalidArgument, "malformed quantized model");
  for (const auto &layer : model.layers) {
    if (layer.is_fc()) {
      throw Error(ErrorCode::kUnsupported,
                  "layer '" + layer.name +
                      "' is fully connected; FC layers have no hardware mapping, evaluate them with the golden model only");
    }
  }
  if (model.layers.empty()) throw Error(ErrorCode::kInvalidArgument, "empty network");

  ActorGraph g;
  g.name = model.name;
  g.input_shape = model.input;
  g.input_format = qm.input_format;
  g.nef = nef;
  GraphBuilder b(g);

  std::vector<PortRef> current;  // producer of each channel of the running feature map
  for (int c = 0; c < model.input.channels; ++c) {
    const size_t src = b.add(idx("input/src_c", c), -1, SourceActor{c});
    g.input_ports.push_back(src);
    current.push_back({src, 0});
  }

  const auto shapes = propagate_shapes(model);
  for (size_t li = 0; li < model.layers.size(); ++li) {
    const LayerSpec &spec = model.layers[li];
    const QuantizedLayer &ql = qm.layers[li];
    const int layer = static_cast<int>(li);
    const std::string &L = spec.name;

    GraphLayer gl;
    gl.name = L;
    gl.in_shape = shapes[li];
    gl.out_shape = shapes[li + 1];
    gl.input_format = ql.input_format;
    gl.weight_format = ql.weight_format;
    gl.output_format = ql.output_format;

    if (const auto *conv = std::get_if<ConvParams>(&spec.kind)) {
      gl.kind = GraphLayer::kConv;
      gl.kernel = conv->kernel;
      gl.stride = conv->stride;
      gl.pad = conv->pad;
      gl.num_output = conv->num_output;

      // Fuse a directly following activation layer into this layer's activation actors.
      const LayerSpec *next = li + 1 < model.layers.size() ? &model.layers[li + 1] : nullptr;
      FixedPointFormat final_format = ql.output_format;
      if (next && next->is_activation()) {
        gl.activation = std::get<ActivationParams>(next->kind).fn;
        final_format = qm.layers[li + 1].output_format;
      }

      const int N = conv->num_output, C = conv->channels, K = conv->kernel, taps = K * K;
      const NeighborhoodExtractor ne_proto{K, conv->stride, conv->pad, gl.in_shape.width, gl.in_shape.height, 0};
      std::vector<size_t> shared_ne(C);
      if (nef) {
        for (int c = 0; c < C; ++c) {
          auto ne = ne_proto;
          ne.channel = c;
          shared_ne[c] = b.add(L + idx("/ne_c", c), layer, ne);
          b.connect(current[c], shared_ne[c], 0);
        }
      }

      std::vector<PortRef> next_ports;
      for (int n = 0; n < N; ++n) {
        std::vector<size_t> trees;
        for (int c = 0; c < C; ++c) {
          size_t ne_actor;
          if (nef) {
            ne_actor = shared_ne[c];
          } else {
            auto ne = ne_proto;
            ne.channel = c;
            ne_actor = b.add(L + idx("/ne_n", n) + idx("_c", c), layer, ne);
            b.connect(current[c], ne_actor, 0);
          }
          std::vector<size_t> mults;
          for (int t = 0; t < taps; ++t) {
            const int64_t w = ql.weights[static_cast<size_t>((int64_t{n} * C + c) * taps + t)];
            const size_t m = b.add(L + idx("/mult_n", n) + idx("_c", c) + idx("_t", t), layer,
                                   MultActor{w, classify_weight(w), n, c, t});
            b.connect({ne_actor, t}, m, 0);
            mults.push_back(m);
          }
          const size_t tree = b.add(L + idx("/tree_n", n) + idx("_c", c), layer, AdderTreeActor{taps, n, c});
          for (int t = 0; t < taps; ++t) b.connect({mults[t], 0}, tree, t);
          trees.push_back(tree);
        }
        const int64_t bias = ql.biases.empty() ? 0 : ql.biases[n];
        const size_t sum =
            b.add(L + idx("/sum_n", n), layer, NeuronSumActor{C, bias, ql.input_format.frac_bits, n});
        for (int c = 0; c < C; ++c) b.connect({trees[c], 0}, sum, c);

        ActivationActor act;
        act.fn = gl.activation;
        act.input_frac = ql.input_format.frac_bits + ql.weight_format->frac_bits;
        act.mid = ql.output_format;
        act.out = final_format;
        act.channel = n;
        const size_t a = b.add(L + idx("/act_n", n), layer, act);
        b.connect({sum, 0}, a, 0);
        next_ports.push_back({a, 0});
      }
      current = std::move(next_ports);
      gl.output_format = final_format;
    } else if (const auto *pool = std::get_if<PoolParams>(&spec.kind)) {
      gl.kind = GraphLayer::kPool;
      gl.kernel = pool->kernel;
      gl.stride = pool->stride;
      gl.num_output = gl.in_shape.channels;
      for (int c = 0; c < gl.in_shape.channels; ++c) {
        const size_t p = b.add(L + idx("/pool_c", c), layer,
                               PoolActor{pool->kernel, pool->stride, pool->mode, gl.in_shape.width, gl.in_shape.height, c});
        b.connect(current[c], p, 0);
        current[c] = {p, 0};
      }
    } else if (const auto *act = std::get_if<ActivationParams>(&spec.kind)) {
      gl.kind = GraphLayer::kActivation;
      gl.activation = act->fn;
      gl.num_output = gl.in_shape.channels;
      gl.fused = li > 0 && model.layers[li - 1].is_conv();
      if (!gl.fused) {
        for (int c = 0; c < gl.in_shape.channels; ++c) {
          ActivationActor a;
          a.fn = act->fn;
          a.input_frac = ql.input_format.frac_bits;
          a.mid = ql.input_format;
          a.out = ql.output_format;
          a.channel = c;
          const size_t id = b.add(L + idx("/act_c", c), layer, a);
          b.connect(current[c], id, 0);
          current[c] = {id, 0};
        }
      }
    }
    g.layers.push_back(std::move(gl));
  }

  g.output_shape = shapes.back();
  g.output_format = qm.layers.back().output_format;
  for (size_t c = 0; c < current.size(); ++c) {
    const size_t sink = b.add(idx("output/sink_c", static_cast<int>(c)), -1, SinkActor{static_cast<int>(c)});
    b.connect(current[c], sink, 0);
    g.output_ports.push_back(sink);
  }
  return g;
}

EntityCensus count_entities(const ActorGraph &g) {
  EntityCensus census;
  std::vector<EntityCounts> per(g.layers.size());
  for (const auto &actor : g.actors) {
    if (actor.layer < 0) continue;
    EntityCounts &c = per[static_cast<size_t>(actor.layer)];
    std::visit(
        [&c](const auto &k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, MultActor>) ++c.multipliers;
          else if constexpr (std::is_same_v<T, WireActor>) ++c.wires;
          else if constexpr (std::is_same_v<T, ShiftActor>) ++c.shifts;
          else if constexpr (std::is_same_v<T, ConstZeroActor>) ++c.const_zeros;
          else if constexpr (std::is_same_v<T, AdderTreeActor>) ++c.adder_trees;
          else if constexpr (std::is_same_v<T, NeuronSumActor>) ++c.neuron_sums;
          else if constexpr (std::is_same_v<T, ActivationActor>) ++c.activations;
          else if constexpr (std::is_same_v<T, NeighborhoodExtractor>) ++c.neighborhood_extractors;
          else if constexpr (std::is_same_v<T, PoolActor>) ++c.pool_units;
        },
        actor.kind);
  }
  for (size_t i = 0; i < g.layers.size(); ++i) {
    census.layers.emplace_back(g.layers[i].name, per[i]);
    census.total += per[i];
  }
  return census;
}

std::vector<LayerFootprint> memory_footprint(const ActorGraph &g, FootprintMode mode, int word_bits) {
  std::vector<LayerFootprint> out;
  for (const auto &l : g.layers) out.push_back({l.name, 0, 0, 0});
  for (const auto &actor : g.actors) {
    const auto *ne = std::get_if<NeighborhoodExtractor>(&actor.kind);
    if (!ne) continue;
    auto &fp = out[static_cast<size_t>(actor.layer)];
    const int64_t k = ne->kernel;
    const int64_t padded_width = ne->image_width + 2 * int64_t{ne->pad};
    const int64_t words = mode == FootprintMode::kWindowOnly ? k * k : (k - 1) * padded_width + k * k;
    fp.extractors += 1;
    fp.words += words;
  }
  for (auto &fp : out) fp.bits = fp.words * word_bits;
  return out;
}

std::optional<std::vector<size_t>> topological_order(const ActorGraph &g) {
  const size_t n = g.actors.size();
  std::vector<std::vector<size_t>> succ(n);
  std::vector<size_t> indegree(n, 0);
  for (const auto &ch : g.channels) {
    if (ch.from.actor >= n || ch.to.actor >= n) return std::nullopt;
    succ[ch.from.actor].push_back(ch.to.actor);
    ++indegree[ch.to.actor];
  }
  std::vector<size_t> order, ready;
  for (size_t i = n; i-- > 0;) {
    if (indegree[i] == 0) ready.push_back(i);
  }
  while (!ready.empty()) {
    const size_t v = ready.back();
    ready.pop_back();
    order.push_back(v);
    for (size_t s : succ[v]) {
      if (--indegree[s] == 0) ready.push_back(s);
    }
  }
  if (order.size() != n) return std::nullopt;
  return order;
}

std::vector<std::string> check_graph(const ActorGraph &g) {
  std::vector<std::string> problems;
  const size_t n = g.actors.size();
  std::map<PortRef, int> feeds;
  for (const auto &ch : g.channels) {
    if (ch.from.actor >= n || ch.to.actor >= n) {
      problems.push_back("channel references a missing actor");
      continue;
    }
    const Actor &from = g.actors[ch.from.actor];
    const Actor &to = g.actors[ch.to.actor];
    if (ch.from.actor == ch.to.actor) problems.push_back("self-loop on " + from.id);
    if (ch.from.port < 0 || ch.from.port >= from.num_outputs()) {
      problems.push_back("bad output port " + std::to_string(ch.from.port) + " on " + from.id);
    }
    if (ch.to.port < 0 || ch.to.port >= to.num_inputs()) {
      problems.push_back("bad input port " + std::to_string(ch.to.port) + " on " + to.id);
    }
    ++feeds[ch.to];
  }
  for (size_t a = 0; a < n; ++a) {
    for (int p = 0; p < g.actors[a].num_inputs(); ++p) {
      const auto it = feeds.find({a, p});
      const int count = it == feeds.end() ? 0 : it->second;
      if (count != 1) {
        problems.push_back("input port " + std::to_string(p) + " of " + g.actors[a].id + " has " +
                           std::to_string(count) + " producers");
      }
    }
  }
  if (!topological_order(g)) problems.push_back("channels contain a cycle");
  return problems;
}

std::string to_dot(const ActorGraph &g) {
  std::ostringstream out;
  out << "digraph \"" << g.name << "\" {\n  rankdir=LR;\n  node [fontname=\"monospace\", fontsize=10];\n";
  for (size_t i = 0; i < g.actors.size(); ++i) {
    const Actor &a = g.actors[i];
    std::string label, shape = "box";
    std::visit(
        [&](const auto &k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, SourceActor>) {
            label = "in " + std::to_string(k.channel);
            shape = "invhouse";
          } else if constexpr (std::is_same_v<T, SinkActor>) {
            label = "out " + std::to_string(k.channel);
            shape = "house";
          } else if constexpr (std::is_same_v<T, NeighborhoodExtractor>) {
            label = "NE " + std::to_string(k.kernel) + "x" + std::to_string(k.kernel);
          } else if constexpr (std::is_same_v<T, MultActor>) {
            label = "x " + std::to_string(k.weight);
            shape = "circle";
          } else if constexpr (std::is_same_v<T, WireActor>) {
            label = "wire";
            shape = "point";
          } else if constexpr (std::is_same_v<T, ShiftActor>) {
            label = std::string(k.negative ? "-" : "") + "<<" + std::to_string(k.shift);
            shape = "circle";
          } else if constexpr (std::is_same_v<T, ConstZeroActor>) {
            label = "0";
            shape = "circle";
          } else if constexpr (std::is_same_v<T, AdderTreeActor>) {
            label = "tree/" + std::to_string(k.arity);
            shape = "circle";
          } else if constexpr (std::is_same_v<T, NeuronSumActor>) {
            label = "sum/" + std::to_string(k.arity) + " b=" + std::to_string(k.bias);
            shape = "doublecircle";
          } else if constexpr (std::is_same_v<T, ActivationActor>) {
            label = k.fn ? to_string(*k.fn) : "requant";
          } else if constexpr (std::is_same_v<T, PoolActor>) {
            label = std::string(to_string(k.mode)) + "pool " + std::to_string(k.kernel);
          }
        },
        a.kind);
    out << "  n" << i << " [label=\"" << a.id << "\\n" << label << "\", shape=" << shape << "];\n";
  }
  for (const auto &ch : g.channels) {
    out << "  n" << ch.from.actor << " -> n" << ch.to.actor << " [taillabel=\"" << ch.from.port
        << "\", headlabel=\"" << ch.to.port << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace dhm
