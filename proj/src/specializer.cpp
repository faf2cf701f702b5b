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

#include "dhm/specializer.hpp"

#include <iomanip>
#include <map>
#include <sstream>

#include <json.hpp>

namespace dhm {

MultClass classify_weight(int64_t w) {
  if (w == 0) return {MultClass::kZero, 0, false};
  if (w == 1) return {MultClass::kOne, 0, false};
  const uint64_t magnitude = w < 0 ? uint64_t{0} - static_cast<uint64_t>(w) : static_cast<uint64_t>(w);
  if ((magnitude & (magnitude - 1)) == 0) {
    int shift = 0;
    while ((uint64_t{1} << shift) != magnitude) ++shift;
    return {MultClass::kPowerOfTwo, shift, w < 0};
  }
  return {MultClass::kGeneric, 0, false};
}

ActorGraph specialize(const ActorGraph &g) {
  const size_t n = g.actors.size();
  std::vector<ActorKind> kinds;
  kinds.reserve(n);
  std::vector<bool> removed(n, false);
  for (const auto &a : g.actors) kinds.push_back(a.kind);

  // Producer of every input port.
  std::map<PortRef, PortRef> producer;
  std::vector<int> consumers(n, 0);
  for (const auto &ch : g.channels) {
    producer[ch.to] = ch.from;
    ++consumers[ch.from.actor];
  }

  for (size_t i = 0; i < n; ++i) {
    const auto *m = std::get_if<MultActor>(&g.actors[i].kind);
    if (!m) continue;
    switch (m->cls.kind) {
      case MultClass::kZero: removed[i] = true; break;
      case MultClass::kOne: kinds[i] = WireActor{m->neuron, m->channel, m->tap}; break;
      case MultClass::kPowerOfTwo:
        kinds[i] = ShiftActor{m->cls.shift, m->cls.negative, m->neuron, m->channel, m->tap};
        break;
      case MultClass::kGeneric: break;
    }
  }

  // Actors are stored in topological order, so one forward pass settles
  // arities of trees before the sums that consume them.
  auto live_inputs = [&](size_t actor, int arity) {
    int live = 0;
    for (int p = 0; p < arity; ++p) {
      const auto it = producer.find({actor, p});
      if (it != producer.end() && !removed[it->second.actor]) ++live;
    }
    return live;
  };
  std::map<size_t, PortRef> zero_trigger;  // neuron sum -> extractor tap feeding its ConstZero
  for (size_t i = 0; i < n; ++i) {
    if (auto *tree = std::get_if<AdderTreeActor>(&kinds[i])) {
      tree->arity = live_inputs(i, tree->arity);
      if (tree->arity == 0) removed[i] = true;
    } else if (auto *sum = std::get_if<NeuronSumActor>(&kinds[i])) {
      const int live = live_inputs(i, sum->arity);
      if (live == 0) {
        // Follow port 0 back through the (removed) tree and multiplier to the extractor.
        PortRef p = producer.at({i, 0});
        while (!std::holds_alternative<NeighborhoodExtractor>(g.actors[p.actor].kind)) p = producer.at({p.actor, 0});
        zero_trigger[i] = p;
        sum->arity = 1;
      } else {
        sum->arity = live;
      }
    }
  }

  // Drop extractors that no longer feed anything.
  std::vector<int> live_consumers(n, 0);
  for (const auto &ch : g.channels) {
    if (!removed[ch.to.actor]) ++live_consumers[ch.from.actor];
  }
  for (const auto &[sum, trigger] : zero_trigger) ++live_consumers[trigger.actor];
  for (size_t i = 0; i < n; ++i) {
    if (std::holds_alternative<NeighborhoodExtractor>(kinds[i]) && consumers[i] > 0 && live_consumers[i] == 0) {
      removed[i] = true;
    }
  }

  ActorGraph out = g;
  out.actors.clear();
  out.channels.clear();
  out.specialized = true;
  std::vector<size_t> remap(n, SIZE_MAX);
  std::map<size_t, size_t> zero_actor;  // neuron sum (old index) -> ConstZero (new index)
  for (size_t i = 0; i < n; ++i) {
    if (removed[i]) continue;
    if (const auto it = zero_trigger.find(i); it != zero_trigger.end()) {
      const auto &sum = std::get<NeuronSumActor>(kinds[i]);
      const Actor &orig = g.actors[i];
      const std::string prefix = orig.id.substr(0, orig.id.rfind('/'));
      out.actors.push_back({prefix + "/zero_n" + std::to_string(sum.neuron), orig.layer, ConstZeroActor{sum.neuron}});
      zero_actor[i] = out.actors.size() - 1;
    }
    remap[i] = out.actors.size();
    out.actors.push_back({g.actors[i].id, g.actors[i].layer, kinds[i]});
  }

  // Rewire, compacting the input ports of reduced trees and sums.
  std::map<size_t, int> next_port;
  for (const auto &ch : g.channels) {
    if (removed[ch.from.actor] || removed[ch.to.actor]) continue;
    const size_t to = remap[ch.to.actor];
    int port = ch.to.port;
    const auto &kind = out.actors[to].kind;
    if (std::holds_alternative<AdderTreeActor>(kind) || std::holds_alternative<NeuronSumActor>(kind)) {
      port = next_port[to]++;
    }
    out.channels.push_back({{remap[ch.from.actor], ch.from.port}, {to, port}});
  }
  for (const auto &[sum, zero] : zero_actor) {
    const PortRef trigger = zero_trigger.at(sum);
    out.channels.push_back({{remap[trigger.actor], trigger.port}, {zero, 0}});
    out.channels.push_back({{zero, 0}, {remap[sum], 0}});
  }
  for (auto &p : out.input_ports) p = remap[p];
  for (auto &p : out.output_ports) p = remap[p];
  return out;
}

Fraction ClassCounts::fraction(MultClass::Kind kind) const {
  int64_t count = 0;
  switch (kind) {
    case MultClass::kZero: count = zero; break;
    case MultClass::kOne: count = one; break;
    case MultClass::kPowerOfTwo: count = power_of_two; break;
    case MultClass::kGeneric: count = generic; break;
  }
  return {count, total()};
}

void ClassCounts::add(const MultClass &cls) {
  switch (cls.kind) {
    case MultClass::kZero: ++zero; break;
    case MultClass::kOne: ++one; break;
    case MultClass::kPowerOfTwo: ++power_of_two; break;
    case MultClass::kGeneric: ++generic; break;
  }
}

ClassCounts &ClassCounts::operator+=(const ClassCounts &o) {
  zero += o.zero;
  one += o.one;
  power_of_two += o.power_of_two;
  generic += o.generic;
  return *this;
}

KernelStats kernel_statistics(const QuantizedModel &qm) {
  KernelStats stats;
  for (size_t i = 0; i < qm.model.layers.size() && i < qm.layers.size(); ++i) {
    if (!qm.model.layers[i].is_conv()) continue;
    ClassCounts counts;
    for (int32_t w : qm.layers[i].weights) counts.add(classify_weight(w));
    stats.layers.emplace_back(qm.model.layers[i].name, counts);
    stats.total += counts;
  }
  return stats;
}

namespace {

nlohmann::ordered_json counts_json(const ClassCounts &c) {
  auto frac = [](const Fraction &f) { return nlohmann::ordered_json{{"num", f.num}, {"den", f.den}, {"value", f.value()}}; };
  return {
      {"total", c.total()},
      {"zero", c.zero},
      {"one", c.one},
      {"power_of_two", c.power_of_two},
      {"generic", c.generic},
      {"fractions",
       {{"zero", frac(c.fraction(MultClass::kZero))},
        {"one", frac(c.fraction(MultClass::kOne))},
        {"power_of_two", frac(c.fraction(MultClass::kPowerOfTwo))},
        {"generic", frac(c.fraction(MultClass::kGeneric))},
        {"special", frac(c.special_fraction())}}},
  };
}

}  // namespace

std::string kernel_stats_json(const KernelStats &stats) {
  nlohmann::ordered_json j;
  j["layers"] = nlohmann::ordered_json::array();
  for (const auto &[name, c] : stats.layers) {
    auto entry = counts_json(c);
    entry["name"] = name;
    j["layers"].push_back(entry);
  }
  j["total"] = counts_json(stats.total);
  return j.dump(2) + "\n";
}

std::string kernel_stats_table(const KernelStats &stats) {
  std::ostringstream out;
  auto pct = [](const Fraction &f) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * f.value() << "%";
    return s.str();
  };
  auto row = [&](const std::string &name, const ClassCounts &c) {
    out << std::left << std::setw(16) << name << std::right << std::setw(10) << c.total() << std::setw(10)
        << pct(c.fraction(MultClass::kZero)) << std::setw(10) << pct(c.fraction(MultClass::kOne)) << std::setw(10)
        << pct(c.fraction(MultClass::kPowerOfTwo)) << std::setw(10) << pct(c.fraction(MultClass::kGeneric))
        << std::setw(10) << pct(c.special_fraction()) << "\n";
  };
  out << std::left << std::setw(16) << "layer" << std::right << std::setw(10) << "weights" << std::setw(10) << "zero"
      << std::setw(10) << "one" << std::setw(10) << "pow2" << std::setw(10) << "generic" << std::setw(10) << "special"
      << "\n";
  for (const auto &[name, c] : stats.layers) row(name, c);
  row("total", stats.total);
  return out.str();
}

}  // namespace dhm
