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

#include "dhm/weights.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "dhm/error.hpp"

namespace dhm {
namespace {

constexpr std::string_view kMagic = "HDW1";

struct Record {
  std::vector<int64_t> dims;
  uint64_t offset = 0;
  int line = 0;

  int64_t elements() const {
    int64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

using RecordKey = std::pair<std::string, std::string>;  // (layer, role)

[[noreturn]] void malformed(int line, const std::string &message) {
  throw Error(ErrorCode::kWeights, "weights manifest line " + std::to_string(line) + ": " + message);
}

template <typename T>
bool parse_number(std::string_view s, T &out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> parts;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) parts.push_back(line.substr(i, j - i));
    i = j;
  }
  return parts;
}

float read_f32le(const uint8_t *p) {
  const uint32_t bits = uint32_t{p[0]} | (uint32_t{p[1]} << 8) | (uint32_t{p[2]} << 16) | (uint32_t{p[3]} << 24);
  return std::bit_cast<float>(bits);
}

void write_f32le(std::vector<uint8_t> &out, float v) {
  const auto bits = std::bit_cast<uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(bits >> (8 * i)));
}

}  // namespace

WeightsResult load_weights(std::span<const uint8_t> container, const CnnModel &model) {
  const std::string_view text(reinterpret_cast<const char *>(container.data()), container.size());

  std::map<RecordKey, Record> records;
  size_t pos = 0;
  int line_no = 0;
  bool ended = false;
  while (pos < text.size()) {
    const size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) break;
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (line_no == 1) {
      if (line != kMagic) throw Error(ErrorCode::kWeights, "not an .hdw container (missing HDW1 magic)");
      continue;
    }
    const auto parts = split_ws(line);
    if (parts.empty() || parts[0].front() == '#') continue;
    if (parts[0] == "end" && parts.size() == 1) {
      ended = true;
      break;
    }
    if (parts[0] != "tensor" || parts.size() != 5) {
      malformed(line_no, "expected 'tensor <layer> <weight|bias> <d0,d1,...> <offset>'");
    }
    const std::string layer(parts[1]);
    const std::string role(parts[2]);
    if (role != "weight" && role != "bias") malformed(line_no, "unknown tensor role '" + role + "'");

    Record rec;
    rec.line = line_no;
    std::string_view dims = parts[3];
    while (!dims.empty()) {
      const size_t comma = dims.find(',');
      const auto piece = dims.substr(0, comma);
      int64_t d = 0;
      if (!parse_number(piece, d) || d < 1) malformed(line_no, "bad dimension '" + std::string(piece) + "'");
      rec.dims.push_back(d);
      if (comma == std::string_view::npos) break;
      dims.remove_prefix(comma + 1);
    }
    if (rec.dims.empty()) malformed(line_no, "tensor needs at least one dimension");
    if (!parse_number(parts[4], rec.offset) || rec.offset % 4 != 0) {
      malformed(line_no, "offset must be a non-negative multiple of 4");
    }
    if (!records.emplace(RecordKey{layer, role}, rec).second) {
      malformed(line_no, "duplicate record for " + layer + "." + role);
    }
  }
  if (!ended) throw Error(ErrorCode::kWeights, "weights manifest is not terminated by an 'end' line");

  const std::span<const uint8_t> payload = container.subspan(pos);

  WeightsResult result{model, {}};
  auto fetch = [&](const LayerSpec &layer, const std::string &role, int64_t expected) {
    const auto it = records.find({layer.name, role});
    if (it == records.end()) {
      throw Error(ErrorCode::kWeights, "missing " + role + " record for layer '" + layer.name + "'");
    }
    const Record &rec = it->second;
    const int64_t count = rec.elements();
    if (count != expected) {
      throw Error(ErrorCode::kWeights, "element-count mismatch for " + layer.name + "." + role + ": manifest declares " +
                                           std::to_string(count) + ", layer needs " + std::to_string(expected));
    }
    const uint64_t available = rec.offset <= payload.size() ? (payload.size() - rec.offset) / 4 : 0;
    if (available < static_cast<uint64_t>(expected)) {
      throw Error(ErrorCode::kWeights, "element-count mismatch for " + layer.name + "." + role + ": payload holds " +
                                           std::to_string(available) + " floats at offset " +
                                           std::to_string(rec.offset) + ", layer needs " + std::to_string(expected));
    }
    std::vector<float> values(static_cast<size_t>(expected));
    for (size_t i = 0; i < values.size(); ++i) {
      values[i] = read_f32le(payload.data() + rec.offset + 4 * i);
      if (!std::isfinite(values[i])) {
        throw Error(ErrorCode::kWeights, "non-finite " + role + " in layer '" + layer.name + "' at flat index " +
                                             std::to_string(i));
      }
    }
    records.erase(it);
    return values;
  };

  for (auto &layer : result.model.layers) {
    if (!layer.has_parameters()) continue;
    layer.weights = fetch(layer, "weight", layer.expected_weight_count());
    if (layer.expected_bias_count() > 0) {
      layer.biases = fetch(layer, "bias", layer.expected_bias_count());
    } else {
      layer.biases.reset();
    }
  }
  for (const auto &[key, rec] : records) {
    result.warnings.push_back({Severity::kWarning, key.first,
                               "unused " + key.second + " record on manifest line " + std::to_string(rec.line)});
  }
  return result;
}

std::vector<uint8_t> serialize_weights(const CnnModel &model) {
  std::ostringstream header;
  header << kMagic << "\n";
  std::vector<uint8_t> payload;
  auto add = [&](const std::string &layer, const char *role, const std::vector<int64_t> &dims,
                 const std::vector<float> &values) {
    header << "tensor " << layer << " " << role << " ";
    for (size_t i = 0; i < dims.size(); ++i) header << (i ? "," : "") << dims[i];
    header << " " << payload.size() << "\n";
    for (float v : values) write_f32le(payload, v);
  };
  for (const auto &layer : model.layers) {
    if (const auto *conv = std::get_if<ConvParams>(&layer.kind)) {
      if (layer.weights) add(layer.name, "weight", {conv->num_output, conv->channels, conv->kernel, conv->kernel}, *layer.weights);
      if (layer.biases) add(layer.name, "bias", {conv->num_output}, *layer.biases);
    } else if (const auto *fc = std::get_if<FullyConnectedParams>(&layer.kind)) {
      if (layer.weights) add(layer.name, "weight", {fc->num_output, fc->inputs}, *layer.weights);
      if (layer.biases) add(layer.name, "bias", {fc->num_output}, *layer.biases);
    }
  }
  header << "end\n";
  const std::string h = header.str();
  std::vector<uint8_t> out(h.begin(), h.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

}  // namespace dhm
