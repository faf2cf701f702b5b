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

// Token-level execution of an ActorGraph.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dhm/actor_graph.hpp"
#include "dhm/feature_maps.hpp"

namespace dhm {

/// Order in which actors are visited during each sweep. The graph is a
/// Kahn network, so every policy yields the same output streams.
enum class SchedulePolicy { kRoundRobin, kReverse, kRandom };

struct SimOptions {
  SchedulePolicy policy = SchedulePolicy::kRoundRobin;
  uint64_t seed = 0;  // kRandom only
};

/// Raster-order window buffer over a frame zero-padded by `pad`: a shift
/// register of (K-1) padded lines plus K cells. Push real pixels in raster
/// order; padding cells are inserted automatically.
class LineBuffer {
 public:
  LineBuffer(int kernel, int stride, int pad, int width, int height);

  /// Pushes one real pixel. Returns the windows completed by it (and, after
  /// the last pixel of the frame, by the trailing padding), each as K*K
  /// values in row-major window order.
  std::vector<std::vector<int64_t>> push(int64_t value);

  /// Windows per frame.
  int64_t windows_per_frame() const;
  bool frame_done() const { return real_pushed_ == int64_t{width_} * height_; }
  /// Reset for the next frame.
  void reset();

 private:
  void push_padded(int64_t value, std::vector<std::vector<int64_t>> &out);

  int kernel_, stride_, pad_, width_, height_, padded_width_, padded_height_;
  std::vector<int64_t> cells_;  // ring buffer of the most recent padded cells
  size_t head_ = 0;
  int64_t padded_pushed_ = 0;
  int64_t real_pushed_ = 0;
};

struct SimResult {
  FeatureMaps output;
  std::vector<int64_t> firings;      // per actor
  size_t max_queue_depth = 0;        // high-water mark over all input queues
  int64_t sweeps = 0;
  /// Extractor actor index and the 0-based input token index at which it
  /// produced its first window.
  std::vector<std::pair<size_t, int64_t>> first_window;
};

/// Runs one frame through the graph. Throws Error(kShape) on an image that
/// does not match the graph input and Error(kSimulation) on deadlock, naming
/// the starved actor.
SimResult simulate(const ActorGraph &g, const FeatureMaps &image, const SimOptions &options = {});

/// Firings each actor must perform for one frame, derived from the graph
/// parameters alone.
std::vector<int64_t> expected_firings(const ActorGraph &g);

}  // namespace dhm
