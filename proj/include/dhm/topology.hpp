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

#include <string>
#include <string_view>
#include <vector>

#include "dhm/model.hpp"

namespace dhm {

struct ParseResult {
  CnnModel model;
  std::vector<Diagnostic> warnings;
};

/// Parses the prototxt subset documented in docs/format-topology.md.
///
/// Conv input channels and FC input sizes are inferred from the preceding
/// layer. Well-formed keys outside the subset are skipped and reported as
/// warnings. Throws ParseError on malformed text and Error(kShape) or
/// Error(kUnsupported) when the network itself is rejected.
ParseResult parse_topology(std::string_view source);

/// Canonical prototxt text for `model`; parse_topology reads it back to an
/// equal model (weights excluded).
std::string serialize_topology(const CnnModel &model);

}  // namespace dhm
