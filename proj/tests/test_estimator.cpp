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

#include <cmath>
#include <string>

#include "dhm/actor_graph.hpp"
#include "dhm/error.hpp"
#include "dhm/estimator.hpp"
#include "dhm/specializer.hpp"
#include "dhm/topology.hpp"
#include "support.hpp"

using namespace dhm;
using dhm::testing::Rng;

namespace {

const MultClass::Kind kOrder[] = {MultClass::kZero, MultClass::kOne, MultClass::kPowerOfTwo, MultClass::kGeneric};

int64_t &slot(ClassCounts &c, MultClass::Kind k) {
  switch (k) {
    case MultClass::kZero: return c.zero;
    case MultClass::kOne: return c.one;
    case MultClass::kPowerOfTwo: return c.power_of_two;
    default: return c.generic;
  }
}

CnnModel parse(const std::string &text) { return parse_topology(text).model; }

std::string conv_block(const std::string &name, int n, int k) {
  return "layer { name: \"" + name + "\" type: \"Convolution\" convolution_param { num_output: " +
         std::to_string(n) + " kernel_size: " + std::to_string(k) + " } }\n";
}

std::string pool_block(const std::string &name) {
  return "layer { name: \"" + name + "\" type: \"Pooling\" pooling_param { pool: MAX kernel_size: 2 stride: 2 } }\n";
}

std::string input(int c, int h, int w) {
  return "input_shape { dim: 1 dim: " + std::to_string(c) + " dim: " + std::to_string(h) + " dim: " +
         std::to_string(w) + " }\n";
}

// N*C*K*K MACs plus bias add and activation per neuron; K*K-1 compares per pooled channel.
double oracle_conv_ops(int n, int c, int k) { return double(n) * c * k * k + 2.0 * n; }
double oracle_pool_ops(int c) { return 3.0 * c; }

}  // namespace

TEST_CASE("calibration anchors are reproduced by the engine model") {
  const auto cal = default_calibration();
  ClassCounts generic;
  generic.generic = 9;
  CHECK(estimate_conv_engine(3, 8, generic, MultiplierMapping::kVariable, cal) == doctest::Approx(380.0));
  CHECK(estimate_conv_engine(3, 8, generic, MultiplierMapping::kConstant, cal) == doctest::Approx(121.0));
  ClassCounts zero;
  zero.zero = 9;
  CHECK(estimate_conv_engine(3, 8, zero, MultiplierMapping::kConstant, cal) == doctest::Approx(5.0));
  CHECK(engine_base_cost(3, 8, cal) == doctest::Approx(5.0));
  // Tree alone: base plus 9 adder inputs of 2b bits.
  CHECK(engine_base_cost(3, 8, cal) + 9 * cal.adder_alm_per_bit() * 16 == doctest::Approx(70.0));
  CHECK(cal.adder_alm_per_bit() == doctest::Approx(65.0 / 144.0));
  CHECK(cal.variable_mult_alm_per_bit2() == doctest::Approx(310.0 / 576.0));
  CHECK(cal.constant_mult_alm_per_bit2() == doctest::Approx(51.0 / 576.0));
  ClassCounts bad;
  bad.generic = 8;
  CHECK_THROWS_AS(estimate_conv_engine(3, 8, bad, MultiplierMapping::kConstant, cal), Error);
}

TEST_CASE("engine cost is monotone in class hardness") {
  const auto cal = default_calibration();
  Rng rng(51);
  for (int i = 0; i < 500; ++i) {
    const int k = rng.pick(std::vector<int>{1, 3, 5, 7, 11});
    const int bits = rng.uniform(2, 16);
    ClassCounts h = dhm::testing::random_histogram(rng, k * k);
    const double before = estimate_conv_engine(k, bits, h, MultiplierMapping::kConstant, cal);
    const double variable = estimate_conv_engine(k, bits, h, MultiplierMapping::kVariable, cal);
    CHECK(variable >= before);
    // Promote one tap to each strictly harder class.
    for (int from = 0; from < 4; ++from) {
      if (slot(h, kOrder[from]) == 0) continue;
      for (int to = from + 1; to < 4; ++to) {
        ClassCounts harder = h;
        --slot(harder, kOrder[from]);
        ++slot(harder, kOrder[to]);
        CHECK(estimate_conv_engine(k, bits, harder, MultiplierMapping::kConstant, cal) >= before);
      }
    }
    // Wider operands never get cheaper.
    CHECK(estimate_conv_engine(k, bits + 1, h, MultiplierMapping::kConstant, cal) >= before);
  }
}

TEST_CASE("ops per pixel of the reference topologies") {
  const CnnModel lenet = parse(input(1, 28, 28) + conv_block("conv1", 20, 5) + pool_block("pool1") +
                               conv_block("conv2", 50, 5) + pool_block("pool2"));
  const double lenet_ops = oracle_conv_ops(20, 1, 5) + oracle_pool_ops(20) + oracle_conv_ops(50, 20, 5) + oracle_pool_ops(50);
  CHECK(ops_per_pixel(lenet) == doctest::Approx(lenet_ops));
  CHECK(lenet_ops == 25850);

  const CnnModel face = parse(input(1, 240, 320) + conv_block("conv1", 6, 7) + pool_block("pool1") +
                              conv_block("conv2", 10, 7) + pool_block("pool2") + conv_block("conv3", 30, 3));
  CHECK(ops_per_pixel(face) == doctest::Approx(oracle_conv_ops(6, 1, 7) + oracle_pool_ops(6) + oracle_conv_ops(10, 6, 7) +
                                               oracle_pool_ops(10) + oracle_conv_ops(30, 10, 3)));

  const CnnModel car = parse(input(3, 96, 96) + conv_block("conv1", 32, 5) + pool_block("pool1") +
                             conv_block("conv2", 32, 5) + pool_block("pool2"));
  CHECK(ops_per_pixel(car) == doctest::Approx(oracle_conv_ops(32, 3, 5) + oracle_pool_ops(32) +
                                              oracle_conv_ops(32, 32, 5) + oracle_pool_ops(32)));

  // A fused rectifier adds nothing; a standalone one adds one op per channel.
  const CnnModel fused = parse(input(1, 8, 8) + conv_block("c", 2, 3) + "layer { name: \"r\" type: \"ReLU\" }\n");
  CHECK(ops_per_pixel(fused) == doctest::Approx(oracle_conv_ops(2, 1, 3)));
  const CnnModel standalone = parse(input(1, 8, 8) + conv_block("c", 2, 3) + pool_block("p") +
                                    "layer { name: \"r\" type: \"ReLU\" }\n");
  CHECK(ops_per_pixel(standalone) == doctest::Approx(oracle_conv_ops(2, 1, 3) + oracle_pool_ops(2) + 2));
}

TEST_CASE("throughput is ops times pixel clock") {
  CHECK(throughput_gops(26500, 69.14e6) == doctest::Approx(1832.21));
  CHECK(throughput_gops(1000, 1e9) == doctest::Approx(1000));
  CHECK(throughput_gops(0, 1e8) == 0);
}

TEST_CASE("network estimate of one engine matches the engine model") {
  // One neuron, one channel: the conv layer is NE + engine + neuron sum + activation.
  Rng rng(52);
  const auto cal = default_calibration();
  for (int i = 0; i < 50; ++i) {
    CnnModel m = dhm::testing::single_conv(1, 1, 3, 6, 6);
    std::vector<float> w(9);
    for (auto &x : w) x = static_cast<float>(rng.uniform(-3, 3));
    if (std::all_of(w.begin(), w.end(), [](float x) { return x == 0; })) w[0] = 3;
    m.layers[0].weights = w;
    m.layers[0].biases = std::vector<float>{0};
    QuantizeOptions o;
    o.weight_frac["conv1"] = 0;
    const auto qm = quantize_model(m, o);
    const auto stats = kernel_statistics(qm);
    for (bool spec : {false, true}) {
      auto g = build_actor_graph(qm);
      if (spec) g = specialize(g);
      const auto r = estimate_network(qm, g, cal);
      const auto mapping = spec ? MultiplierMapping::kConstant : MultiplierMapping::kVariable;
      const double engine = estimate_conv_engine(3, 8, stats.total, mapping, cal);
      const double fixed = cal.register_alm_per_bit * 9 * 8                           // extractor
                           + cal.adder_alm_per_bit() * accumulator_bits(8, 9) * 2    // sum: 1 input + bias
                           + cal.activation_alm_per_bit * 8;
      CHECK(r.layers[0].logic_elements == doctest::Approx(engine + fixed));
    }
  }
}

TEST_CASE("specialization shrinks the estimate and report JSON round-trips") {
  Rng rng(53);
  const auto cal = default_calibration();
  for (int i = 0; i < 30; ++i) {
    const CnnModel m = dhm::testing::with_random_weights(dhm::testing::random_network(rng), rng);
    const auto qm = quantize_model(m, {5, {}, {}, {}});
    const auto g = build_actor_graph(qm);
    const auto plain = estimate_network(qm, g, cal, 50e6);
    const auto spec = estimate_network(qm, specialize(g), cal, 50e6);
    CHECK(spec.total.logic_elements < plain.total.logic_elements);
    CHECK(plain.total.ops_per_pixel == doctest::Approx(ops_per_pixel(m)));
    CHECK(plain.throughput_gops.value() == doctest::Approx(ops_per_pixel(m) * 0.05));
    CHECK(parse_report_json(report_json(plain)) == plain);
    CHECK(parse_report_json(report_json(spec)) == spec);
    CHECK(report_table(spec).find("total") != std::string::npos);
  }
}

TEST_CASE("calibration JSON round trip and validation") {
  auto cal = default_calibration();
  CHECK(parse_calibration(calibration_json(cal)) == cal);
  cal.variable_engine_alm = 400;
  cal.family = "other";
  CHECK(parse_calibration(calibration_json(cal)) == cal);
  CHECK_THROWS_AS(parse_calibration("{"), Error);
  CHECK_THROWS_AS(parse_calibration("[1, 2]"), Error);
}
