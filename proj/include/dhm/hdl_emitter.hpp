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

// Structural VHDL-93 emission: a top-level netlist of per-layer entities
// built from the leaf library in hdl/, and a package of quantized constants.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dhm/actor_graph.hpp"
#include "dhm/quantizer.hpp"

namespace dhm {

struct EmitOptions {
  std::string topology_source;  // recorded in the manifest and README only
  std::string weights_source;
};

/// Instances of one leaf entity, grouped by identical generic bindings.
struct ManifestEntry {
  std::string entity;
  int64_t instances = 0;
  std::map<std::string, int64_t> bindings;  // rendered generic map -> count
};

struct HdlDesign {
  std::string name;  // VHDL identifier derived from the model name
  std::string toplevel_file;
  std::string params_file;
  std::string toplevel_source;
  std::string params_source;
  std::string manifest_json;
  std::string readme;
  std::vector<ManifestEntry> manifest;
};

/// Lowercase VHDL-93 basic identifier for an arbitrary name.
std::string vhdl_identifier(std::string_view name);

/// `bits`-wide two's-complement bit string of `value`, MSB first.
std::string twos_complement(int64_t value, int bits);

/// Params package: per-layer format constants plus weight and bias arrays
/// for every conv layer and lookup tables for tanh activations.
/// Throws Error(kUnsupported) for FC layers.
std::string emit_params(const QuantizedModel &qm);

/// Top-level netlist. Throws Error(kUnsupported) for FC layers and graphs
/// that do not match `qm`.
std::string emit_toplevel(const ActorGraph &g, const QuantizedModel &qm);

/// Leaf-entity instance counts of the netlist emitted for `g`.
std::vector<ManifestEntry> build_manifest(const ActorGraph &g);

HdlDesign emit_design(const ActorGraph &g, const QuantizedModel &qm, const EmitOptions &options);

/// Writes the design files into `dir`, creating it if needed. Returns the
/// written paths. Throws Error(kIo) naming the failing path.
std::vector<std::string> write_project(const HdlDesign &design, const std::string &dir);

/// Entity counts recorded in a manifest, in census terms.
EntityCounts census_from_manifest(std::string_view manifest_json);

/// Bit-string constant arrays of a params package, decoded back to
/// integers, keyed by constant name.
std::map<std::string, std::vector<int64_t>> parse_params_constants(std::string_view params_source);

}  // namespace dhm
