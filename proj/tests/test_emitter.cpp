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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "dhm/actor_graph.hpp"
#include "dhm/error.hpp"
#include "dhm/feature_maps.hpp"
#include "dhm/hdl_emitter.hpp"
#include "dhm/specializer.hpp"
#include "support.hpp"
#include "vhdl_check.hpp"

using namespace dhm;
using dhm::testing::Rng;

namespace {

QuantizedModel random_quantized(Rng &rng) {
  const CnnModel m = dhm::testing::with_random_weights(dhm::testing::random_network(rng), rng);
  return quantize_model(m, {rng.coin() ? 5 : 8, {}, {}, {}});
}

std::string slurp(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

dhm::testing::VhdlDesign leaf_library() {
  dhm::testing::VhdlDesign d;
  for (const auto &entry : std::filesystem::directory_iterator(DHM_SOURCE_DIR "/hdl")) {
    if (entry.path().extension() == ".vhd") dhm::testing::vhdl_declarations(slurp(entry.path()), d);
  }
  return d;
}

}  // namespace

TEST_CASE("vhdl identifiers and bit strings") {
  CHECK(vhdl_identifier("conv1") == "conv1");
  CHECK(vhdl_identifier("Conv-1/a") == "conv_1_a");
  CHECK(vhdl_identifier("__x__") == "x");
  CHECK(vhdl_identifier("1st") == "l_1st");
  CHECK(vhdl_identifier("") == "l");
  CHECK(vhdl_identifier("signal") == "signal_l");
  CHECK(vhdl_identifier("a  b") == "a_b");
  CHECK(twos_complement(5, 4) == "0101");
  CHECK(twos_complement(-1, 4) == "1111");
  CHECK(twos_complement(-8, 4) == "1000");
  CHECK(twos_complement(3, 1) == "1");
}

TEST_CASE("the leaf library declares every entity the emitter can use") {
  const auto lib = leaf_library();
  for (const char *e : {"dhm_neighborhood_extractor", "dhm_mult_const", "dhm_mult_var", "dhm_shift", "dhm_const_zero",
                        "dhm_adder_tree", "dhm_neuron_sum", "dhm_activation", "dhm_pool"}) {
    CAPTURE(e);
    CHECK(lib.entities.count(e) == 1);
  }
  CHECK(lib.constants.count("fn_tanh") == 1);
}

TEST_CASE("emitted netlists instantiate only declared entities with matching interfaces") {
  Rng rng(61);
  for (int i = 0; i < 40; ++i) {
    const auto qm = random_quantized(rng);
    auto g = build_actor_graph(qm, rng.coin(0.7));
    if (rng.coin(0.6)) g = specialize(g);
    const auto design = emit_design(g, qm, {"t.prototxt", "w.hdw"});
    auto vhdl = leaf_library();
    dhm::testing::vhdl_declarations(design.params_source, vhdl);
    dhm::testing::vhdl_declarations(design.toplevel_source, vhdl);
    dhm::testing::vhdl_check_instances(design.toplevel_source, vhdl);
    CAPTURE(i);
    CHECK(vhdl.problems.empty());
    for (size_t p = 0; p < vhdl.problems.size() && p < 5; ++p) MESSAGE(vhdl.problems[p]);
    CHECK(vhdl.entities.count(design.name + "_toplevel") == 1);
  }
}

TEST_CASE("the checker notices broken netlists") {
  Rng rng(62);
  const auto qm = random_quantized(rng);
  const auto design = emit_design(build_actor_graph(qm), qm, {});
  auto broken = design.toplevel_source;
  const auto at = broken.find("entity work.dhm_neighborhood_extractor");
  REQUIRE(at != std::string::npos);
  broken.replace(at, 38, "entity work.dhm_neighbourhood_extractor");
  auto vhdl = leaf_library();
  dhm::testing::vhdl_declarations(design.params_source, vhdl);
  dhm::testing::vhdl_declarations(broken, vhdl);
  dhm::testing::vhdl_check_instances(broken, vhdl);
  CHECK_FALSE(vhdl.problems.empty());
}

TEST_CASE("emission is deterministic") {
  Rng rng(63);
  for (int i = 0; i < 20; ++i) {
    const auto qm = random_quantized(rng);
    const auto g = specialize(build_actor_graph(qm));
    const auto a = emit_design(g, qm, {"a", "b"});
    const auto b = emit_design(specialize(build_actor_graph(qm)), qm, {"a", "b"});
    CHECK(a.toplevel_source == b.toplevel_source);
    CHECK(a.params_source == b.params_source);
    CHECK(a.manifest_json == b.manifest_json);
    CHECK(a.readme == b.readme);
  }
}

TEST_CASE("manifest counts equal the graph census on random models") {
  Rng rng(64);
  for (int i = 0; i < 50; ++i) {
    const auto qm = random_quantized(rng);
    auto g = build_actor_graph(qm, rng.coin());
    if (rng.coin(0.7)) g = specialize(g);
    const auto design = emit_design(g, qm, {});
    const auto census = count_entities(g).total;
    CHECK(census_from_manifest(design.manifest_json) == census);
    const auto j = nlohmann::json::parse(design.manifest_json);
    CHECK(j.at("schema") == "dhm-manifest/1");
    CHECK(j.at("census").at("total").at("multipliers") == census.multipliers);
  }
}

TEST_CASE("params package constants decode back to the quantized tensors") {
  Rng rng(65);
  for (int i = 0; i < 30; ++i) {
    const auto qm = random_quantized(rng);
    const auto constants = parse_params_constants(emit_params(qm));
    for (size_t l = 0; l < qm.model.layers.size(); ++l) {
      if (!qm.model.layers[l].is_conv()) continue;
      std::string prefix = vhdl_identifier(qm.model.layers[l].name);
      for (auto &ch : prefix) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      const auto &w = constants.at(prefix + "_WEIGHTS");
      CHECK(std::vector<int64_t>(qm.layers[l].weights.begin(), qm.layers[l].weights.end()) == w);
      if (!qm.layers[l].biases.empty()) {
        CHECK(std::vector<int64_t>(qm.layers[l].biases.begin(), qm.layers[l].biases.end()) ==
              constants.at(prefix + "_BIASES"));
      }
    }
  }
}

TEST_CASE("duplicate identifiers after sanitizing get numeric suffixes") {
  CnnModel m;
  m.name = "Dup Net";
  m.input = {1, 8, 8};
  m.layers.push_back(dhm::testing::make_conv("conv-1", 1, 1, 3));
  m.layers.push_back(dhm::testing::make_conv("conv_1", 1, 1, 3));
  Rng rng(66);
  m = dhm::testing::with_random_weights(m, rng);
  const auto qm = quantize_model(m, {8, {}, {}, {}});
  const auto d = emit_design(build_actor_graph(qm), qm, {});
  CHECK(d.name == "dup_net");
  CHECK(d.toplevel_source.find("entity dup_net_conv_1 is") != std::string::npos);
  CHECK(d.toplevel_source.find("entity dup_net_conv_1_2 is") != std::string::npos);
  CHECK(d.params_source.find("CONV_1_2_WEIGHTS") != std::string::npos);
}

TEST_CASE("write_project writes four files and reports I/O failures") {
  Rng rng(67);
  const auto qm = random_quantized(rng);
  const auto d = emit_design(build_actor_graph(qm), qm, {});
  const auto dir = std::filesystem::temp_directory_path() / "dhm_emit_test";
  std::filesystem::remove_all(dir);
  const auto files = write_project(d, (dir / "nested").string());
  CHECK(files.size() == 4);
  for (const auto &f : files) CHECK(std::filesystem::exists(f));
  CHECK(slurp(dir / "nested" / d.toplevel_file) == d.toplevel_source);
  try {
    write_project(d, (dir / "nested" / d.toplevel_file / "x").string());
    FAIL("expected an I/O error");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kIo);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("tanh layers emit a lookup table; FC layers are refused") {
  CnnModel m = dhm::testing::single_conv(2, 1, 3, 6, 6);
  m.layers.push_back(dhm::testing::make_act("t1", ActivationFn::kTanh));
  Rng rng(68);
  m = dhm::testing::with_random_weights(m, rng);
  const auto qm = quantize_model(m, {5, {}, {}, {}});
  const auto params = emit_params(qm);
  CHECK(params.find("CONV1_TANH_LUT : int_array(0 to 31)") != std::string::npos);  // fused into conv1
  const auto top = emit_toplevel(specialize(build_actor_graph(qm)), qm);
  CHECK(top.find("FN => FN_TANH") != std::string::npos);

  CnnModel fc_model = m;
  LayerSpec fc;
  fc.name = "ip";
  fc.kind = FullyConnectedParams{2, 32, false};
  fc.weights = std::vector<float>(64, 0.1f);
  fc_model.layers.push_back(fc);
  const auto qfc = quantize_model(fc_model, {5, {}, {}, {}});
  CHECK_THROWS_AS(emit_params(qfc), Error);
}
