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

// Exercises the shared library through its C header only.

#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "dhm/dhm.h"

namespace {

const char *kModels = DHM_SOURCE_DIR "/models/";

struct Owned {
  char *p = nullptr;
  ~Owned() { dhm_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct Pipeline {
  dhm_model *topo = nullptr;
  dhm_model *model = nullptr;
  dhm_quant_options *opts = nullptr;
  dhm_qmodel *qm = nullptr;
  dhm_graph *graph = nullptr;
  dhm_graph *spec = nullptr;

  explicit Pipeline(const std::string &name, int bits = 8) {
    REQUIRE(dhm_model_parse_file((std::string(kModels) + name + ".prototxt").c_str(), &topo) == DHM_OK);
    REQUIRE(dhm_model_load_weights_file(topo, (std::string(kModels) + name + ".hdw").c_str(), &model) == DHM_OK);
    REQUIRE(dhm_quant_options_create(bits, &opts) == DHM_OK);
    REQUIRE(dhm_quantize(model, opts, &qm) == DHM_OK);
    REQUIRE(dhm_graph_build(qm, 1, &graph) == DHM_OK);
    REQUIRE(dhm_graph_specialize(graph, &spec) == DHM_OK);
  }
  ~Pipeline() {
    dhm_graph_free(spec);
    dhm_graph_free(graph);
    dhm_qmodel_free(qm);
    dhm_quant_options_free(opts);
    dhm_model_free(model);
    dhm_model_free(topo);
  }
};

}  // namespace

TEST_CASE("version and status strings") {
  CHECK(std::string(dhm_version()) == DHM_VERSION);
  CHECK(std::string(dhm_status_string(DHM_OK)) == "ok");
  for (int s = DHM_ERR_INVALID_ARGUMENT; s <= DHM_ERR_INTERNAL; ++s) {
    CHECK(std::strlen(dhm_status_string(static_cast<dhm_status>(s))) > 0);
  }
}

TEST_CASE("parse errors map to status codes with a message") {
  dhm_model *m = nullptr;
  const std::string bad = "input_shape { dim: 1 dim: 1 dim: 8 dim: 8 }\nlayer { name: \n";
  CHECK(dhm_model_parse(bad.data(), bad.size(), &m) == DHM_ERR_PARSE);
  CHECK(m == nullptr);
  CHECK(std::string(dhm_last_error()).find("3:1") != std::string::npos);

  const std::string empty = "input_shape { dim: 1 dim: 1 dim: 8 dim: 8 }\n";
  CHECK(dhm_model_parse(empty.data(), empty.size(), &m) == DHM_ERR_SHAPE);
  CHECK(std::string(dhm_last_error()) == "empty network");

  CHECK(dhm_model_parse_file("/nonexistent/x.prototxt", &m) == DHM_ERR_IO);
  CHECK(dhm_model_parse(nullptr, 0, &m) == DHM_ERR_INVALID_ARGUMENT);
  CHECK(dhm_model_parse(empty.data(), empty.size(), nullptr) == DHM_ERR_INVALID_ARGUMENT);
}

TEST_CASE("free functions accept NULL") {
  dhm_model_free(nullptr);
  dhm_qmodel_free(nullptr);
  dhm_graph_free(nullptr);
  dhm_image_free(nullptr);
  dhm_calibration_free(nullptr);
  dhm_quant_options_free(nullptr);
  dhm_string_free(nullptr);
}

TEST_CASE("dummy layer census through the C API") {
  Pipeline p("dummy_layer");
  Owned census;
  REQUIRE(dhm_graph_census_json(p.graph, &census.p) == DHM_OK);
  const auto j = nlohmann::json::parse(census.str());
  CHECK(j["total"]["multipliers"] == 135);
  CHECK(j["total"]["adders"] == 20);
  CHECK(j["total"]["activations"] == 5);
}

TEST_CASE("model summary, serialization and ops") {
  Pipeline p("lenet5");
  double ops = 0;
  REQUIRE(dhm_model_ops_per_pixel(p.model, &ops) == DHM_OK);
  CHECK(ops == 25850);
  int errors = -1;
  REQUIRE(dhm_model_error_count(p.model, &errors) == DHM_OK);
  CHECK(errors == 0);
  CHECK(dhm_model_warning_count(p.model) == 0);
  CHECK(dhm_model_warning(p.model, 0) == nullptr);
  Owned text;
  REQUIRE(dhm_model_serialize(p.topo, &text.p) == DHM_OK);
  dhm_model *again = nullptr;
  REQUIRE(dhm_model_parse(text.p, std::strlen(text.p), &again) == DHM_OK);
  Owned a, b;
  REQUIRE(dhm_model_summary_json(p.topo, &a.p) == DHM_OK);
  REQUIRE(dhm_model_summary_json(again, &b.p) == DHM_OK);
  CHECK(a.str() == b.str());
  dhm_model_free(again);
  CHECK(dhm_throughput_gops(26500, 69.14e6) == doctest::Approx(1832.21));
}

TEST_CASE("quantization options are validated") {
  dhm_quant_options *o = nullptr;
  CHECK(dhm_quant_options_create(1, &o) == DHM_ERR_INVALID_ARGUMENT);
  REQUIRE(dhm_quant_options_create(8, &o) == DHM_OK);
  CHECK(dhm_quant_options_set_weight_frac(o, "conv1", 9) == DHM_ERR_INVALID_ARGUMENT);
  CHECK(dhm_quant_options_set_weight_frac(o, "conv1", 4) == DHM_OK);
  CHECK(dhm_quant_options_set_data_frac(o, "nope", 4) == DHM_OK);  // checked when quantizing
  dhm_model *topo = nullptr, *model = nullptr;
  REQUIRE(dhm_model_parse_file(DHM_SOURCE_DIR "/models/dummy_layer.prototxt", &topo) == DHM_OK);
  REQUIRE(dhm_model_load_weights_file(topo, DHM_SOURCE_DIR "/models/dummy_layer.hdw", &model) == DHM_OK);
  dhm_qmodel *qm = nullptr;
  CHECK(dhm_quantize(model, o, &qm) == DHM_ERR_INVALID_ARGUMENT);
  CHECK(dhm_quantize(topo, o, &qm) != DHM_OK);  // no weights loaded
  dhm_model_free(model);
  dhm_model_free(topo);
  dhm_quant_options_free(o);
}

TEST_CASE("simulation equals golden, under every schedule") {
  Pipeline p("lenet5_relu", 5);
  dhm_image *img = nullptr, *golden = nullptr;
  REQUIRE(dhm_image_random(p.qm, 7, &img) == DHM_OK);
  REQUIRE(dhm_golden(p.qm, img, &golden) == DHM_OK);
  int c = 0, h = 0, w = 0;
  REQUIRE(dhm_image_shape(golden, &c, &h, &w) == DHM_OK);
  CHECK(c == 50);
  CHECK(h == 4);
  CHECK(w == 4);
  for (auto schedule : {DHM_SCHEDULE_ROUND_ROBIN, DHM_SCHEDULE_REVERSE, DHM_SCHEDULE_RANDOM}) {
    dhm_image *out = nullptr;
    Owned stats;
    REQUIRE(dhm_simulate(p.spec, img, schedule, 3, &out, &stats.p) == DHM_OK);
    int exact = 0;
    Owned report;
    REQUIRE(dhm_compare(out, golden, &exact, &report.p) == DHM_OK);
    CHECK(exact == 1);
    const auto j = nlohmann::json::parse(stats.str());
    CHECK(j["firings_match_expected"] == true);
    dhm_image_free(out);
  }
  dhm_image_free(golden);
  dhm_image_free(img);
}

TEST_CASE("raw images round trip through files") {
  Pipeline p("dummy_layer");
  dhm_image *img = nullptr, *back = nullptr;
  REQUIRE(dhm_image_random(p.qm, 1, &img) == DHM_OK);
  const auto path = (std::filesystem::temp_directory_path() / "dhm_capi_img.raw").string();
  REQUIRE(dhm_image_save_raw(img, path.c_str()) == DHM_OK);
  REQUIRE(dhm_image_load(path.c_str(), p.qm, &back) == DHM_OK);
  const int64_t *a = nullptr, *b = nullptr;
  size_t na = 0, nb = 0;
  REQUIRE(dhm_image_values(img, &a, &na) == DHM_OK);
  REQUIRE(dhm_image_values(back, &b, &nb) == DHM_OK);
  REQUIRE(na == nb);
  CHECK(std::memcmp(a, b, na * sizeof(int64_t)) == 0);
  CHECK(na == 3u * 8u * 8u);
  dhm_image *missing = nullptr;
  CHECK(dhm_image_load("/nonexistent.raw", p.qm, &missing) == DHM_ERR_IO);
  dhm_image_free(back);
  dhm_image_free(img);
  std::remove(path.c_str());
  std::remove((path + ".json").c_str());
}

TEST_CASE("estimate, footprint, DOT and stats") {
  Pipeline p("alexnet_conv1");
  Owned a, b;
  REQUIRE(dhm_graph_footprint_json(p.graph, DHM_FOOTPRINT_WINDOW, 8, &a.p) == DHM_OK);
  CHECK(nlohmann::json::parse(a.str())["total_bits"] == 363 * 8);
  dhm_graph *no_nef = nullptr;
  REQUIRE(dhm_graph_build(p.qm, 0, &no_nef) == DHM_OK);
  REQUIRE(dhm_graph_footprint_json(no_nef, DHM_FOOTPRINT_WINDOW, 8, &b.p) == DHM_OK);
  CHECK(nlohmann::json::parse(b.str())["total_bits"] == 34848 * 8);
  dhm_graph_free(no_nef);

  Owned est, table, stats, dot;
  REQUIRE(dhm_estimate(p.qm, p.spec, nullptr, 100e6, 0, &est.p) == DHM_OK);
  const auto j = nlohmann::json::parse(est.str());
  CHECK(j["schema"] == "dhm-resource-report/1");
  CHECK(j["throughput_gops"].get<double>() == doctest::Approx(35040 * 0.1));
  REQUIRE(dhm_estimate(p.qm, p.spec, nullptr, 0, 1, &table.p) == DHM_OK);
  CHECK(table.str().find("total") != std::string::npos);
  REQUIRE(dhm_kernel_stats_json(p.qm, &stats.p) == DHM_OK);
  CHECK(nlohmann::json::parse(stats.str())["total"]["total"] == 96 * 3 * 121);
  Owned small_dot;
  Pipeline d("dummy_layer");
  REQUIRE(dhm_graph_dot(d.graph, &small_dot.p) == DHM_OK);
  CHECK(small_dot.str().rfind("digraph", 0) == 0);

  dhm_calibration *cal = nullptr;
  CHECK(dhm_calibration_load_file("/nonexistent.json", &cal) == DHM_ERR_IO);
  REQUIRE(dhm_calibration_load_file(DHM_SOURCE_DIR "/data/calibration.json", &cal) == DHM_OK);
  Owned with_cal;
  REQUIRE(dhm_estimate(p.qm, p.spec, cal, 0, 0, &with_cal.p) == DHM_OK);
  CHECK(nlohmann::json::parse(with_cal.str())["total"]["logic_elements"] == j["total"]["logic_elements"]);
  dhm_calibration_free(cal);
}

TEST_CASE("emission dry run and write") {
  Pipeline p("dummy_layer");
  Owned manifest, files;
  REQUIRE(dhm_emit(p.spec, p.qm, "t", "w", nullptr, &manifest.p, &files.p) == DHM_OK);
  CHECK(files.str().empty());
  const auto dir = (std::filesystem::temp_directory_path() / "dhm_capi_emit").string();
  std::filesystem::remove_all(dir);
  Owned manifest2, files2;
  REQUIRE(dhm_emit(p.spec, p.qm, "t", "w", dir.c_str(), &manifest2.p, &files2.p) == DHM_OK);
  CHECK(manifest.str() == manifest2.str());
  const std::string written = files2.str();
  CHECK(std::count(written.begin(), written.end(), '\n') == 4);
  CHECK(std::filesystem::exists(dir + "/dummy_layer_toplevel.vhd"));
  std::filesystem::remove_all(dir);
}
