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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dhm/fixed_point.hpp"
#include "dhm/model.hpp"

namespace dhm {

/// Integer tensor [channels][height][width] in one fixed-point format.
/// An input image is a FeatureMaps whose channels are streamed in raster
/// order, one token per pixel per channel.
struct FeatureMaps {
  Shape3 shape;
  FixedPointFormat format;
  std::vector<int64_t> data;

  FeatureMaps() = default;
  FeatureMaps(Shape3 s, FixedPointFormat f) : shape(s), format(f), data(static_cast<size_t>(s.elements()), 0) {}

  int64_t &at(int c, int y, int x) { return data[index(c, y, x)]; }
  int64_t at(int c, int y, int x) const { return data[index(c, y, x)]; }
  size_t index(int c, int y, int x) const {
    return (static_cast<size_t>(c) * shape.height + static_cast<size_t>(y)) * shape.width + static_cast<size_t>(x);
  }
  /// True when every value lies within `format`.
  bool in_range() const;

  bool operator==(const FeatureMaps &) const = default;
};

using PixelStream = FeatureMaps;

struct Coordinate {
  int channel = 0, row = 0, col = 0;
  bool operator==(const Coordinate &) const = default;
};

struct DiffReport {
  bool shape_match = true;
  bool format_match = true;
  bool exact = true;
  int64_t mismatches = 0;
  int64_t max_abs_diff = 0;
  std::optional<Coordinate> first_mismatch;
  std::string summary;
};

/// Element-wise comparison. Differing shapes produce a structural diff
/// (exact = false) rather than an error.
DiffReport compare(const FeatureMaps &a, const FeatureMaps &b);

/// Uniform random raw values over the whole format range.
FeatureMaps random_image(const Shape3 &shape, const FixedPointFormat &format, uint64_t seed);

/// Binary (P5) or ASCII (P2) PGM. Pixel p is read as the real value
/// p / (maxval + 1) and quantized into `format`.
FeatureMaps parse_pgm(std::span<const uint8_t> bytes, const FixedPointFormat &format);

/// Raw planar container: int32 little-endian values in [C][H][W] order,
/// described by a JSON sidecar.
std::string raw_header(const FeatureMaps &maps);
std::vector<uint8_t> raw_payload(const FeatureMaps &maps);
FeatureMaps parse_raw(std::string_view header_json, std::span<const uint8_t> payload);

/// Loads `path` as PGM when it has a .pgm extension, otherwise as raw
/// planar data with the sidecar at `path`.json. PGM input requires `format`.
FeatureMaps load_image(const std::string &path, const FixedPointFormat &format);

/// Writes `path` and `path`.json.
void save_raw(const std::string &path, const FeatureMaps &maps);

std::vector<uint8_t> read_file(const std::string &path);
void write_file(const std::string &path, std::string_view contents);

}  // namespace dhm
