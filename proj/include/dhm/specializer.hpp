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

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dhm/actor_graph.hpp"
#include "dhm/quantizer.hpp"

namespace dhm {

/// Zero for 0, One for 1, PowerOfTwo for +-2^k (including -1 as a negated
/// shift by zero), Generic otherwise.
MultClass classify_weight(int64_t w);

/// Rewrites constant multipliers by class:
///   Zero       -> removed, with the adder-tree arity reduced
///   One        -> WireActor
///   PowerOfTwo -> ShiftActor
///   Generic    -> kept
/// A convolution engine left with no inputs is removed from its neuron sum.
/// A neuron left with no engines is fed by a ConstZeroActor triggered by the
/// first tap of its channel-0 extractor. Idempotent.
ActorGraph specialize(const ActorGraph &g);

/// Exact rational n/d.
struct Fraction {
  int64_t num = 0;
  int64_t den = 1;
  double value() const { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Fraction &other) const { return num * other.den == other.num * den; }
};

struct ClassCounts {
  int64_t zero = 0;
  int64_t one = 0;
  int64_t power_of_two = 0;
  int64_t generic = 0;

  int64_t total() const { return zero + one + power_of_two + generic; }
  int64_t special() const { return zero + one + power_of_two; }
  Fraction fraction(MultClass::Kind kind) const;
  Fraction special_fraction() const { return {special(), total()}; }
  void add(const MultClass &cls);
  ClassCounts &operator+=(const ClassCounts &other);
  bool operator==(const ClassCounts &) const = default;
};

struct KernelStats {
  std::vector<std::pair<std::string, ClassCounts>> layers;  // conv layers only
  ClassCounts total;
};

/// Multiplier class histogram over every conv weight.
KernelStats kernel_statistics(const QuantizedModel &qm);

std::string kernel_stats_json(const KernelStats &stats);
std::string kernel_stats_table(const KernelStats &stats);

}  // namespace dhm
