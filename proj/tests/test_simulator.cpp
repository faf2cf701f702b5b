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

#include <string>

#include "dhm/actor_graph.hpp"
#include "dhm/error.hpp"
#include "dhm/golden.hpp"
#include "dhm/quantizer.hpp"
#include "dhm/simulator.hpp"
#include "dhm/specializer.hpp"
#include "support.hpp"

using namespace dhm;
using dhm::testing::Rng;

namespace {

QuantizedModel random_quantized(Rng &rng, const dhm::testing::NetShape &shape = {}) {
  const CnnModel m = dhm::testing::with_random_weights(dhm::testing::random_network(rng, shape), rng);
  return quantize_model(m, {rng.coin() ? 5 : 8, {}, {}, {}});
}

// Window (top, left) of a zero-padded frame, straight from the definition.
std::vector<int64_t> direct_window(const std::vector<int64_t> &frame, int w, int h, int k, int pad, int top, int left) {
  std::vector<int64_t> out;
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < k; ++c) {
      const int y = top + r - pad;
      const int x = left + c - pad;
      out.push_back(y < 0 || y >= h || x < 0 || x >= w ? 0 : frame[static_cast<size_t>(y) * w + x]);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("line buffer warm-up: K=3 on an 8-wide frame fires first at token 18") {
  LineBuffer lb(3, 1, 0, 8, 8);
  int64_t first = -1;
  for (int64_t i = 0; i < 64; ++i) {
    const auto windows = lb.push(i);
    if (first < 0 && !windows.empty()) first = i;
  }
  CHECK(first == 18);
  CHECK(lb.frame_done());
}

TEST_CASE("line buffer warm-up follows (K-1)(W+1) and shifts by pad") {
  for (int k : {1, 3, 5, 7}) {
    for (int w : {7, 8, 13}) {
      for (int pad = 0; pad < k; ++pad) {
        LineBuffer lb(k, 1, pad, w, 9);
        int64_t first = -1;
        for (int64_t i = 0; i < int64_t{w} * 9 && first < 0; ++i) {
          if (!lb.push(i).empty()) first = i;
        }
        const int lag = k - 1 - pad;
        CAPTURE(k);
        CAPTURE(w);
        CAPTURE(pad);
        CHECK(first == int64_t{lag} * w + lag);
      }
    }
  }
}

TEST_CASE("line buffer windows equal direct extraction from the padded frame") {
  Rng rng(41);
  for (int trial = 0; trial < 300; ++trial) {
    const int k = rng.uniform(1, 6);
    const int stride = rng.uniform(1, 3);
    const int pad = rng.uniform(0, k - 1);
    const int w = rng.uniform(std::max(1, k - 2 * pad), 14);
    const int h = rng.uniform(std::max(1, k - 2 * pad), 14);
    std::vector<int64_t> frame(static_cast<size_t>(w) * h);
    for (auto &v : frame) v = rng.uniform(-100, 100);

    LineBuffer lb(k, stride, pad, w, h);
    std::vector<std::vector<int64_t>> got;
    for (auto v : frame) {
      for (auto &win : lb.push(v)) got.push_back(win);
    }
    std::vector<std::vector<int64_t>> want;
    for (int top = 0; top + k <= h + 2 * pad; top += stride)
      for (int left = 0; left + k <= w + 2 * pad; left += stride) want.push_back(direct_window(frame, w, h, k, pad, top, left));
    CHECK(got == want);
    CHECK(lb.windows_per_frame() == static_cast<int64_t>(want.size()));
    lb.reset();
    CHECK_FALSE(lb.frame_done());
  }
}

TEST_CASE("golden conv matches the brute-force oracle") {
  Rng rng(42);
  for (int i = 0; i < 40; ++i) {
    dhm::testing::NetShape shape;
    shape.max_convs = 1;
    shape.allow_pool = false;
    shape.allow_activation = false;
    const auto qm = random_quantized(rng, shape);
    const auto image = random_image(qm.model.input, qm.input_format, 1000 + i);
    const auto out = golden_inference(qm, image);
    const auto &spec = std::get<ConvParams>(qm.model.layers[0].kind);
    const auto oracle = dhm::testing::brute_force_conv(spec, qm.layers[0], image);
    CHECK(compare(out[0], oracle).exact);
  }
}

TEST_CASE("simulation is bit-identical to the golden model on random networks") {
  Rng rng(43);
  for (int i = 0; i < 100; ++i) {
    const auto qm = random_quantized(rng);
    const auto image = random_image(qm.model.input, qm.input_format, 2000 + i);
    const auto golden = golden_inference(qm, image).back();
    const auto g = build_actor_graph(qm, rng.coin(0.7));
    const auto sim = simulate(g, image);
    const auto diff = compare(sim.output, golden);
    CAPTURE(i);
    CAPTURE(diff.summary);
    CHECK(diff.exact);
    CHECK(sim.firings == expected_firings(g));
    CHECK(compare(simulate(specialize(g), image).output, golden).exact);
  }
}

TEST_CASE("every schedule yields the same streams and firing counts") {
  Rng rng(44);
  for (int i = 0; i < 30; ++i) {
    const auto qm = random_quantized(rng);
    const auto image = random_image(qm.model.input, qm.input_format, 3000 + i);
    const auto g = specialize(build_actor_graph(qm));
    const auto base = simulate(g, image, {SchedulePolicy::kRoundRobin, 0});
    for (auto policy : {SchedulePolicy::kReverse, SchedulePolicy::kRandom}) {
      for (uint64_t seed : {1u, 7u}) {
        const auto other = simulate(g, image, {policy, seed});
        CHECK(other.output == base.output);
        CHECK(other.firings == base.firings);
      }
    }
  }
}

TEST_CASE("first window positions are reported per extractor") {
  const auto qm = quantize_model(
      [] {
        CnnModel m = dhm::testing::single_conv(2, 2, 3, 8, 8);
        m.layers[0].weights = std::vector<float>(36, 0.25f);
        m.layers[0].biases = std::vector<float>(2, 0.0f);
        return m;
      }(),
      {8, {}, {}, {}});
  const auto g = build_actor_graph(qm);
  const auto sim = simulate(g, random_image(qm.model.input, qm.input_format, 5));
  REQUIRE(sim.first_window.size() == 2);
  for (const auto &[actor, index] : sim.first_window) {
    CHECK(std::holds_alternative<NeighborhoodExtractor>(g.actors[actor].kind));
    CHECK(index == 18);
  }
  CHECK(sim.max_queue_depth >= 1);
  CHECK(sim.sweeps >= 1);
}

TEST_CASE("simulation errors: wrong image, starved actor, oversized accumulator") {
  CnnModel m = dhm::testing::single_conv(2, 1, 3, 6, 6);
  m.layers[0].weights = std::vector<float>(18, 0.3f);
  m.layers[0].biases = std::vector<float>(2, 0.0f);
  const auto qm = quantize_model(m, {8, {}, {}, {}});
  const auto g = build_actor_graph(qm);

  try {
    simulate(g, random_image({1, 5, 6}, qm.input_format, 1));
    FAIL("expected a shape error");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kShape);
  }

  // Cut the feed of one tree input: the tree starves while others fire.
  auto broken = g;
  for (size_t i = 0; i < broken.channels.size(); ++i) {
    if (std::holds_alternative<AdderTreeActor>(broken.actors[broken.channels[i].to.actor].kind) &&
        broken.channels[i].to.port == 4) {
      broken.channels.erase(broken.channels.begin() + static_cast<long>(i));
      break;
    }
  }
  try {
    simulate(broken, random_image(qm.model.input, qm.input_format, 1));
    FAIL("expected a deadlock");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kSimulation);
    CHECK(std::string(e.what()).find("tree_n") != std::string::npos);
  }

  const auto wide = quantize_model(m, {32, {}, {}, {}});
  CHECK_THROWS_AS(check_accumulator_width(wide), Error);
  try {
    simulate(build_actor_graph(wide), random_image(wide.model.input, wide.input_format, 1));
    FAIL("expected unsupported");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kUnsupported);
  }
}

TEST_CASE("golden model handles pooling, tanh and FC layers") {
  CnnModel m = dhm::testing::single_conv(2, 1, 3, 6, 6);
  m.layers.push_back(dhm::testing::make_act("t", ActivationFn::kTanh));
  m.layers.push_back(dhm::testing::make_pool("p", 2, 2, PoolMode::kAvg));
  LayerSpec fc;
  fc.name = "ip";
  fc.kind = FullyConnectedParams{3, 8, true};
  m.layers.push_back(fc);
  Rng rng(45);
  m = dhm::testing::with_random_weights(m, rng);
  const auto qm = quantize_model(m, {8, {}, {}, {}});
  const auto outs = golden_inference(qm, random_image(m.input, qm.input_format, 9));
  REQUIRE(outs.size() == 4);
  CHECK(outs[1].shape == Shape3{2, 4, 4});
  CHECK(outs[2].shape == Shape3{2, 2, 2});
  CHECK(outs[3].shape == Shape3{3, 1, 1});
  for (const auto &o : outs) CHECK(o.in_range());
  // Average of each 2x2 block, rounded half away from zero.
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) {
        const int64_t s = outs[1].at(c, 2 * y, 2 * x) + outs[1].at(c, 2 * y, 2 * x + 1) +
                          outs[1].at(c, 2 * y + 1, 2 * x) + outs[1].at(c, 2 * y + 1, 2 * x + 1);
        const double avg = static_cast<double>(s) / 4.0;
        CHECK(outs[2].at(c, y, x) == static_cast<int64_t>(std::round(avg)));
      }
}
