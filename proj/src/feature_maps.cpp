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

#include "dhm/feature_maps.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

#include <json.hpp>

#include "dhm/error.hpp"
#include "dhm/quantizer.hpp"

namespace dhm {

bool FeatureMaps::in_range() const {
  return std::all_of(data.begin(), data.end(), [this](int64_t v) { return format.contains(v); });
}

DiffReport compare(const FeatureMaps &a, const FeatureMaps &b) {
  DiffReport r;
  r.format_match = a.format == b.format;
  if (!(a.shape == b.shape) || a.data.size() != b.data.size()) {
    r.shape_match = false;
    r.exact = false;
    r.summary = "shape mismatch: " + std::to_string(a.shape.channels) + "x" + std::to_string(a.shape.height) + "x" +
                std::to_string(a.shape.width) + " vs " + std::to_string(b.shape.channels) + "x" +
                std::to_string(b.shape.height) + "x" + std::to_string(b.shape.width);
    return r;
  }
  for (int c = 0; c < a.shape.channels; ++c) {
    for (int y = 0; y < a.shape.height; ++y) {
      for (int x = 0; x < a.shape.width; ++x) {
        const int64_t d = a.at(c, y, x) - b.at(c, y, x);
        if (d == 0) continue;
        ++r.mismatches;
        r.max_abs_diff = std::max(r.max_abs_diff, d < 0 ? -d : d);
        if (!r.first_mismatch) r.first_mismatch = Coordinate{c, y, x};
      }
    }
  }
  r.exact = r.mismatches == 0 && r.format_match;
  if (r.exact) {
    r.summary = "exact match (" + std::to_string(a.data.size()) + " values)";
  } else if (r.mismatches == 0) {
    r.summary = "values match but formats differ: " + to_string(a.format) + " vs " + to_string(b.format);
  } else {
    const auto &m = *r.first_mismatch;
    r.summary = std::to_string(r.mismatches) + " mismatches, first at (" + std::to_string(m.channel) + "," +
                std::to_string(m.row) + "," + std::to_string(m.col) + "), max abs diff " +
                std::to_string(r.max_abs_diff);
  }
  return r;
}

FeatureMaps random_image(const Shape3 &shape, const FixedPointFormat &format, uint64_t seed) {
  FeatureMaps maps(shape, format);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int64_t> dist(format.min_raw(), format.max_raw());
  for (auto &v : maps.data) v = dist(rng);
  return maps;
}

namespace {

class PgmReader {
 public:
  explicit PgmReader(std::span<const uint8_t> bytes) : b_(bytes) {}

  int number() {
    skip_space();
    if (pos_ >= b_.size() || !std::isdigit(b_[pos_])) throw Error(ErrorCode::kParse, "malformed PGM header");
    int64_t v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + (b_[pos_++] - '0');
      if (v > (int64_t{1} << 30)) throw Error(ErrorCode::kParse, "PGM header value too large");
    }
    return static_cast<int>(v);
  }

  void skip_space() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  size_t pos_ = 0;
  std::span<const uint8_t> b_;
};

}  // namespace

FeatureMaps parse_pgm(std::span<const uint8_t> bytes, const FixedPointFormat &format) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '2')) {
    throw Error(ErrorCode::kParse, "not a PGM file (expected P5 or P2 magic)");
  }
  const bool binary = bytes[1] == '5';
  PgmReader r(bytes);
  r.pos_ = 2;
  const int width = r.number();
  const int height = r.number();
  const int maxval = r.number();
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) throw Error(ErrorCode::kParse, "bad PGM dimensions");
  FeatureMaps maps({1, height, width}, format);
  const double scale = 1.0 / (maxval + 1.0);
  if (binary) {
    ++r.pos_;  // single whitespace after maxval
    const size_t bpp = maxval < 256 ? 1 : 2;
    if (bytes.size() < r.pos_ + maps.data.size() * bpp) throw Error(ErrorCode::kParse, "truncated PGM pixel data");
    for (size_t i = 0; i < maps.data.size(); ++i) {
      int p = bytes[r.pos_ + i * bpp];
      if (bpp == 2) p = (p << 8) | bytes[r.pos_ + i * bpp + 1];
      maps.data[i] = quantize_value(p * scale, format);
    }
  } else {
    for (auto &v : maps.data) v = quantize_value(r.number() * scale, format);
  }
  return maps;
}

std::string raw_header(const FeatureMaps &maps) {
  nlohmann::ordered_json j{
      {"format", "dhm-raw-planar"},
      {"version", 1},
      {"dtype", "int32le"},
      {"channels", maps.shape.channels},
      {"height", maps.shape.height},
      {"width", maps.shape.width},
      {"total_bits", maps.format.total_bits},
      {"frac_bits", maps.format.frac_bits},
  };
  return j.dump(2) + "\n";
}

std::vector<uint8_t> raw_payload(const FeatureMaps &maps) {
  std::vector<uint8_t> out;
  out.reserve(maps.data.size() * 4);
  for (int64_t v : maps.data) {
    const auto u = static_cast<uint32_t>(static_cast<int32_t>(v));
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(u >> (8 * i)));
  }
  return out;
}

FeatureMaps parse_raw(std::string_view header_json, std::span<const uint8_t> payload) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header_json);
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::kParse, std::string("raw image header: ") + e.what());
  }
  Shape3 shape;
  FixedPointFormat format;
  try {
    if (j.value("dtype", "int32le") != "int32le") throw Error(ErrorCode::kUnsupported, "raw image dtype must be int32le");
    shape = {j.at("channels").get<int>(), j.at("height").get<int>(), j.at("width").get<int>()};
    format = {j.at("total_bits").get<int>(), j.at("frac_bits").get<int>()};
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::kParse, std::string("raw image header: ") + e.what());
  }
  if (shape.channels <= 0 || shape.height <= 0 || shape.width <= 0) throw Error(ErrorCode::kShape, "raw image has empty shape");
  if (!format.valid()) throw Error(ErrorCode::kParse, "raw image header has an invalid format " + to_string(format));
  FeatureMaps maps(shape, format);
  if (payload.size() != maps.data.size() * 4) {
    throw Error(ErrorCode::kShape, "raw image payload has " + std::to_string(payload.size()) + " bytes, expected " +
                                       std::to_string(maps.data.size() * 4));
  }
  for (size_t i = 0; i < maps.data.size(); ++i) {
    uint32_t u = 0;
    for (int k = 0; k < 4; ++k) u |= uint32_t{payload[i * 4 + k]} << (8 * k);
    maps.data[i] = static_cast<int32_t>(u);
  }
  if (!maps.in_range()) throw Error(ErrorCode::kShape, "raw image value outside " + to_string(format));
  return maps;
}

std::vector<uint8_t> read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string &path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path + "'");
}

FeatureMaps load_image(const std::string &path, const FixedPointFormat &format) {
  const auto bytes = read_file(path);
  const bool pgm = path.size() >= 4 && path.compare(path.size() - 4, 4, ".pgm") == 0;
  if (pgm) return parse_pgm(bytes, format);
  const auto header = read_file(path + ".json");
  return parse_raw(std::string_view(reinterpret_cast<const char *>(header.data()), header.size()), bytes);
}

void save_raw(const std::string &path, const FeatureMaps &maps) {
  const auto payload = raw_payload(maps);
  write_file(path, std::string_view(reinterpret_cast<const char *>(payload.data()), payload.size()));
  write_file(path + ".json", raw_header(maps));
}

}  // namespace dhm
