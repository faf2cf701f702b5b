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

#include "dhm/dhm.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <sstream>
#include <string>

#include <json.hpp>

#include "dhm/actor_graph.hpp"
#include "dhm/error.hpp"
#include "dhm/estimator.hpp"
#include "dhm/feature_maps.hpp"
#include "dhm/golden.hpp"
#include "dhm/hdl_emitter.hpp"
#include "dhm/model.hpp"
#include "dhm/quantizer.hpp"
#include "dhm/simulator.hpp"
#include "dhm/specializer.hpp"
#include "dhm/topology.hpp"
#include "dhm/weights.hpp"

struct dhm_model {
  dhm_model(dhm::CnnModel m, std::vector<dhm::Diagnostic> w) : model(std::move(m)), warnings(std::move(w)) {
    for (const auto &d : warnings) warning_text.push_back(dhm::to_string(d));
  }
  dhm::CnnModel model;
  std::vector<dhm::Diagnostic> warnings;
  std::vector<std::string> warning_text;
};
struct dhm_quant_options {
  dhm::QuantizeOptions options;
};
struct dhm_qmodel {
  dhm::QuantizedModel qm;
};
struct dhm_graph {
  dhm::ActorGraph graph;
};
struct dhm_calibration {
  dhm::Calibration calibration;
};
struct dhm_image {
  dhm::FeatureMaps maps;
};

namespace {

using nlohmann::ordered_json;

thread_local std::string last_error;

dhm_status status_of(dhm::ErrorCode code) { return static_cast<dhm_status>(static_cast<int>(code)); }

template <typename F>
dhm_status guard(F &&f) {
  try {
    f();
    last_error.clear();
    return DHM_OK;
  } catch (const dhm::Error &e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc &) {
    last_error = "out of memory";
    return DHM_ERR_INTERNAL;
  } catch (const std::exception &e) {
    last_error = std::string("internal error: ") + e.what();
    return DHM_ERR_INTERNAL;
  }
}

void require(bool ok, const char *what) {
  if (!ok) throw dhm::Error(dhm::ErrorCode::kInvalidArgument, std::string(what) + " must not be NULL");
}

void check_frac(int frac_bits, int total_bits) {
  if (frac_bits < 0 || frac_bits >= total_bits) {
    throw dhm::Error(dhm::ErrorCode::kInvalidArgument,
                     "fractional bits must be in [0, " + std::to_string(total_bits - 1) + "]");
  }
}

char *dup_string(const std::string &s) {
  char *out = static_cast<char *>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

ordered_json shape_json(const dhm::Shape3 &s) { return {{"channels", s.channels}, {"height", s.height}, {"width", s.width}}; }

ordered_json diag_json(const dhm::Diagnostic &d) {
  return {{"severity", d.severity == dhm::Severity::kError ? "error" : "warning"}, {"layer", d.layer}, {"message", d.message}};
}

ordered_json counts_json(const dhm::EntityCounts &c) {
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

std::string text_of(const std::vector<uint8_t> &bytes) { return {bytes.begin(), bytes.end()}; }

}  // namespace

extern "C" {

const char *dhm_version(void) { return DHM_VERSION; }

const char *dhm_status_string(dhm_status status) {
  switch (status) {
    case DHM_OK: return "ok";
    case DHM_ERR_INVALID_ARGUMENT: return "invalid argument";
    case DHM_ERR_PARSE: return "parse error";
    case DHM_ERR_SHAPE: return "shape error";
    case DHM_ERR_WEIGHTS: return "weights error";
    case DHM_ERR_QUANTIZE: return "quantization error";
    case DHM_ERR_UNSUPPORTED: return "unsupported";
    case DHM_ERR_IO: return "i/o error";
    case DHM_ERR_SIMULATION: return "simulation error";
    case DHM_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char *dhm_last_error(void) { return last_error.c_str(); }

void dhm_string_free(char *s) { std::free(s); }

dhm_status dhm_model_parse(const char *text, size_t length, dhm_model **out) {
  return guard([&] {
    require(text && out, "text and out");
    auto result = dhm::parse_topology(std::string_view(text, length));
    *out = new dhm_model{std::move(result.model), std::move(result.warnings)};
  });
}

dhm_status dhm_model_parse_file(const char *path, dhm_model **out) {
  return guard([&] {
    require(path && out, "path and out");
    const std::string text = text_of(dhm::read_file(path));
    try {
      auto result = dhm::parse_topology(text);
      *out = new dhm_model{std::move(result.model), std::move(result.warnings)};
    } catch (const dhm::Error &e) {
      const bool located = dynamic_cast<const dhm::ParseError *>(&e) != nullptr;
      throw dhm::Error(e.code(), std::string(path) + (located ? ":" : ": ") + e.what());
    }
  });
}

dhm_status dhm_model_load_weights(const dhm_model *model, const uint8_t *data, size_t length, dhm_model **out) {
  return guard([&] {
    require(model && data && out, "model, data and out");
    auto result = dhm::load_weights(std::span<const uint8_t>(data, length), model->model);
    auto warnings = model->warnings;
    warnings.insert(warnings.end(), result.warnings.begin(), result.warnings.end());
    *out = new dhm_model{std::move(result.model), std::move(warnings)};
  });
}

dhm_status dhm_model_load_weights_file(const dhm_model *model, const char *path, dhm_model **out) {
  return guard([&] {
    require(model && path && out, "model, path and out");
    const auto bytes = dhm::read_file(path);
    try {
      auto result = dhm::load_weights(bytes, model->model);
      auto warnings = model->warnings;
      warnings.insert(warnings.end(), result.warnings.begin(), result.warnings.end());
      *out = new dhm_model{std::move(result.model), std::move(warnings)};
    } catch (const dhm::Error &e) {
      throw dhm::Error(e.code(), std::string(path) + ": " + e.what());
    }
  });
}

dhm_status dhm_model_summary_json(const dhm_model *model, char **out) {
  return guard([&] {
    require(model && out, "model and out");
    const auto &m = model->model;
    const auto shapes = dhm::propagate_shapes(m);
    ordered_json j;
    j["name"] = m.name;
    j["input"] = shape_json(m.input);
    j["layers"] = ordered_json::array();
    for (size_t i = 0; i < m.layers.size(); ++i) {
      const auto &l = m.layers[i];
      ordered_json e{{"name", l.name}, {"type", dhm::kind_name(l.kind)}};
      if (i < shapes.size()) e["input"] = shape_json(shapes[i]);
      if (i + 1 < shapes.size()) e["output"] = shape_json(shapes[i + 1]);
      e["weights_loaded"] = l.weights.has_value();
      j["layers"].push_back(e);
    }
    j["warnings"] = ordered_json::array();
    for (const auto &d : model->warnings) j["warnings"].push_back(diag_json(d));
    j["diagnostics"] = ordered_json::array();
    for (const auto &d : dhm::validate_model(m)) j["diagnostics"].push_back(diag_json(d));
    *out = dup_string(j.dump(2) + "\n");
  });
}

size_t dhm_model_warning_count(const dhm_model *model) { return model ? model->warning_text.size() : 0; }

const char *dhm_model_warning(const dhm_model *model, size_t index) {
  return model && index < model->warning_text.size() ? model->warning_text[index].c_str() : nullptr;
}

dhm_status dhm_model_error_count(const dhm_model *model, int *out) {
  return guard([&] {
    require(model && out, "model and out");
    int n = 0;
    for (const auto &d : dhm::validate_model(model->model)) n += d.severity == dhm::Severity::kError;
    *out = n;
  });
}

dhm_status dhm_model_serialize(const dhm_model *model, char **out) {
  return guard([&] {
    require(model && out, "model and out");
    *out = dup_string(dhm::serialize_topology(model->model));
  });
}

dhm_status dhm_model_ops_per_pixel(const dhm_model *model, double *out) {
  return guard([&] {
    require(model && out, "model and out");
    *out = dhm::ops_per_pixel(model->model);
  });
}

void dhm_model_free(dhm_model *model) { delete model; }

double dhm_throughput_gops(double ops_per_pixel, double fmax_hz) { return dhm::throughput_gops(ops_per_pixel, fmax_hz); }

dhm_status dhm_quant_options_create(int total_bits, dhm_quant_options **out) {
  return guard([&] {
    require(out, "out");
    if (total_bits < 2 || total_bits > 32) {
      throw dhm::Error(dhm::ErrorCode::kInvalidArgument, "bits must be in [2, 32], got " + std::to_string(total_bits));
    }
    *out = new dhm_quant_options{};
    (*out)->options.total_bits = total_bits;
  });
}

dhm_status dhm_quant_options_set_weight_frac(dhm_quant_options *options, const char *layer, int frac_bits) {
  return guard([&] {
    require(options && layer, "options and layer");
    check_frac(frac_bits, options->options.total_bits);
    options->options.weight_frac[layer] = frac_bits;
  });
}

dhm_status dhm_quant_options_set_data_frac(dhm_quant_options *options, const char *layer, int frac_bits) {
  return guard([&] {
    require(options && layer, "options and layer");
    check_frac(frac_bits, options->options.total_bits);
    options->options.data_frac[layer] = frac_bits;
  });
}

dhm_status dhm_quant_options_set_input_frac(dhm_quant_options *options, int frac_bits) {
  return guard([&] {
    require(options, "options");
    check_frac(frac_bits, options->options.total_bits);
    options->options.input_frac = frac_bits;
  });
}

void dhm_quant_options_free(dhm_quant_options *options) { delete options; }

dhm_status dhm_quantize(const dhm_model *model, const dhm_quant_options *options, dhm_qmodel **out) {
  return guard([&] {
    require(model && options && out, "model, options and out");
    *out = new dhm_qmodel{dhm::quantize_model(model->model, options->options)};
  });
}

dhm_status dhm_qmodel_summary_json(const dhm_qmodel *qm, char **out) {
  return guard([&] {
    require(qm && out, "qm and out");
    ordered_json j;
    j["name"] = qm->qm.model.name;
    j["bits"] = qm->qm.total_bits;
    j["input_format"] = dhm::to_string(qm->qm.input_format);
    j["layers"] = ordered_json::array();
    for (size_t i = 0; i < qm->qm.layers.size(); ++i) {
      const auto &l = qm->qm.layers[i];
      j["layers"].push_back({{"name", qm->qm.model.layers[i].name},
                             {"input_format", dhm::to_string(l.input_format)},
                             {"weight_format", l.weight_format ? ordered_json(dhm::to_string(*l.weight_format)) : ordered_json(nullptr)},
                             {"output_format", dhm::to_string(l.output_format)},
                             {"saturated", l.saturated}});
    }
    *out = dup_string(j.dump(2) + "\n");
  });
}

dhm_status dhm_kernel_stats_json(const dhm_qmodel *qm, char **out) {
  return guard([&] {
    require(qm && out, "qm and out");
    *out = dup_string(dhm::kernel_stats_json(dhm::kernel_statistics(qm->qm)));
  });
}

dhm_status dhm_kernel_stats_table(const dhm_qmodel *qm, char **out) {
  return guard([&] {
    require(qm && out, "qm and out");
    *out = dup_string(dhm::kernel_stats_table(dhm::kernel_statistics(qm->qm)));
  });
}

void dhm_qmodel_free(dhm_qmodel *qm) { delete qm; }

dhm_status dhm_graph_build(const dhm_qmodel *qm, int nef, dhm_graph **out) {
  return guard([&] {
    require(qm && out, "qm and out");
    *out = new dhm_graph{dhm::build_actor_graph(qm->qm, nef != 0)};
  });
}

dhm_status dhm_graph_specialize(const dhm_graph *graph, dhm_graph **out) {
  return guard([&] {
    require(graph && out, "graph and out");
    *out = new dhm_graph{dhm::specialize(graph->graph)};
  });
}

dhm_status dhm_graph_census_json(const dhm_graph *graph, char **out) {
  return guard([&] {
    require(graph && out, "graph and out");
    const auto census = dhm::count_entities(graph->graph);
    ordered_json j;
    j["name"] = graph->graph.name;
    j["nef"] = graph->graph.nef;
    j["specialized"] = graph->graph.specialized;
    j["actors"] = graph->graph.actors.size();
    j["channels"] = graph->graph.channels.size();
    j["layers"] = ordered_json::array();
    for (const auto &[name, c] : census.layers) {
      auto e = counts_json(c);
      e["name"] = name;
      j["layers"].push_back(e);
    }
    j["total"] = counts_json(census.total);
    *out = dup_string(j.dump(2) + "\n");
  });
}

dhm_status dhm_graph_footprint_json(const dhm_graph *graph, dhm_footprint_mode mode, int word_bits, char **out) {
  return guard([&] {
    require(graph && out, "graph and out");
    if (word_bits < 1) throw dhm::Error(dhm::ErrorCode::kInvalidArgument, "word_bits must be positive");
    const auto m = mode == DHM_FOOTPRINT_WINDOW ? dhm::FootprintMode::kWindowOnly : dhm::FootprintMode::kArchitectural;
    ordered_json j;
    j["mode"] = mode == DHM_FOOTPRINT_WINDOW ? "window" : "architectural";
    j["word_bits"] = word_bits;
    j["layers"] = ordered_json::array();
    int64_t total = 0;
    for (const auto &f : dhm::memory_footprint(graph->graph, m, word_bits)) {
      j["layers"].push_back({{"name", f.layer}, {"extractors", f.extractors}, {"words", f.words}, {"bits", f.bits}});
      total += f.bits;
    }
    j["total_bits"] = total;
    *out = dup_string(j.dump(2) + "\n");
  });
}

dhm_status dhm_graph_dot(const dhm_graph *graph, char **out) {
  return guard([&] {
    require(graph && out, "graph and out");
    *out = dup_string(dhm::to_dot(graph->graph));
  });
}

void dhm_graph_free(dhm_graph *graph) { delete graph; }

dhm_status dhm_calibration_load_file(const char *path, dhm_calibration **out) {
  return guard([&] {
    require(path && out, "path and out");
    *out = new dhm_calibration{dhm::parse_calibration(text_of(dhm::read_file(path)))};
  });
}

void dhm_calibration_free(dhm_calibration *calibration) { delete calibration; }

dhm_status dhm_estimate(const dhm_qmodel *qm, const dhm_graph *graph, const dhm_calibration *calibration,
                        double fmax_hz, int as_table, char **out) {
  return guard([&] {
    require(qm && graph && out, "qm, graph and out");
    const auto cal = calibration ? calibration->calibration : dhm::default_calibration();
    std::optional<double> fmax;
    if (fmax_hz > 0) fmax = fmax_hz;
    const auto report = dhm::estimate_network(qm->qm, graph->graph, cal, fmax);
    *out = dup_string(as_table ? dhm::report_table(report) : dhm::report_json(report));
  });
}

dhm_status dhm_emit(const dhm_graph *graph, const dhm_qmodel *qm, const char *topology_source,
                    const char *weights_source, const char *out_dir, char **manifest, char **files) {
  return guard([&] {
    require(graph && qm && manifest, "graph, qm and manifest");
    dhm::EmitOptions options;
    options.topology_source = topology_source ? topology_source : "";
    options.weights_source = weights_source ? weights_source : "";
    const auto design = dhm::emit_design(graph->graph, qm->qm, options);
    std::string list;
    if (out_dir) {
      for (const auto &p : dhm::write_project(design, out_dir)) list += p + "\n";
    }
    *manifest = dup_string(design.manifest_json);
    if (files) *files = dup_string(list);
  });
}

dhm_status dhm_image_load(const char *path, const dhm_qmodel *qm, dhm_image **out) {
  return guard([&] {
    require(path && qm && out, "path, qm and out");
    auto maps = dhm::load_image(path, qm->qm.input_format);
    *out = new dhm_image{std::move(maps)};
  });
}

dhm_status dhm_image_random(const dhm_qmodel *qm, uint64_t seed, dhm_image **out) {
  return guard([&] {
    require(qm && out, "qm and out");
    *out = new dhm_image{dhm::random_image(qm->qm.model.input, qm->qm.input_format, seed)};
  });
}

dhm_status dhm_image_save_raw(const dhm_image *image, const char *path) {
  return guard([&] {
    require(image && path, "image and path");
    dhm::save_raw(path, image->maps);
  });
}

dhm_status dhm_image_shape(const dhm_image *image, int *channels, int *height, int *width) {
  return guard([&] {
    require(image, "image");
    if (channels) *channels = image->maps.shape.channels;
    if (height) *height = image->maps.shape.height;
    if (width) *width = image->maps.shape.width;
  });
}

dhm_status dhm_image_values(const dhm_image *image, const int64_t **values, size_t *count) {
  return guard([&] {
    require(image && values && count, "image, values and count");
    *values = image->maps.data.data();
    *count = image->maps.data.size();
  });
}

void dhm_image_free(dhm_image *image) { delete image; }

dhm_status dhm_simulate(const dhm_graph *graph, const dhm_image *image, dhm_schedule schedule, uint64_t seed,
                        dhm_image **output, char **stats) {
  return guard([&] {
    require(graph && image && output, "graph, image and output");
    dhm::SimOptions options;
    options.policy = schedule == DHM_SCHEDULE_REVERSE  ? dhm::SchedulePolicy::kReverse
                     : schedule == DHM_SCHEDULE_RANDOM ? dhm::SchedulePolicy::kRandom
                                                       : dhm::SchedulePolicy::kRoundRobin;
    options.seed = seed;
    auto result = dhm::simulate(graph->graph, image->maps, options);
    if (stats) {
      const auto expected = dhm::expected_firings(graph->graph);
      int64_t total = 0;
      for (int64_t f : result.firings) total += f;
      ordered_json j;
      j["firings"] = total;
      j["firings_match_expected"] = expected == result.firings;
      j["max_queue_depth"] = result.max_queue_depth;
      j["sweeps"] = result.sweeps;
      j["first_window"] = ordered_json::array();
      for (const auto &[actor, index] : result.first_window) {
        j["first_window"].push_back({{"actor", graph->graph.actors[actor].id}, {"input_index", index}});
      }
      *stats = dup_string(j.dump(2) + "\n");
    }
    *output = new dhm_image{std::move(result.output)};
  });
}

dhm_status dhm_golden(const dhm_qmodel *qm, const dhm_image *image, dhm_image **output) {
  return guard([&] {
    require(qm && image && output, "qm, image and output");
    auto layers = dhm::golden_inference(qm->qm, image->maps);
    *output = new dhm_image{layers.empty() ? image->maps : std::move(layers.back())};
  });
}

dhm_status dhm_compare(const dhm_image *a, const dhm_image *b, int *exact, char **report) {
  return guard([&] {
    require(a && b && exact, "a, b and exact");
    const auto diff = dhm::compare(a->maps, b->maps);
    *exact = diff.exact ? 1 : 0;
    if (report) {
      ordered_json j{{"exact", diff.exact},
                     {"shape_match", diff.shape_match},
                     {"format_match", diff.format_match},
                     {"mismatches", diff.mismatches},
                     {"max_abs_diff", diff.max_abs_diff},
                     {"summary", diff.summary}};
      if (diff.first_mismatch) {
        j["first_mismatch"] = {{"channel", diff.first_mismatch->channel},
                               {"row", diff.first_mismatch->row},
                               {"col", diff.first_mismatch->col}};
      } else {
        j["first_mismatch"] = nullptr;
      }
      *report = dup_string(j.dump(2) + "\n");
    }
  });
}

}  // extern "C"
