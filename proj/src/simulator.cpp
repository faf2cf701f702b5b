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

#include "dhm/simulator.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <random>

#include "dhm/error.hpp"

namespace dhm {

LineBuffer::LineBuffer(int kernel, int stride, int pad, int width, int height)
    : kernel_(kernel),
      stride_(stride),
      pad_(pad),
      width_(width),
      height_(height),
      padded_width_(width + 2 * pad),
      padded_height_(height + 2 * pad),
      cells_(static_cast<size_t>((kernel - 1) * (width + 2 * pad) + kernel), 0) {}

void LineBuffer::reset() {
  std::fill(cells_.begin(), cells_.end(), 0);
  head_ = 0;
  padded_pushed_ = 0;
  real_pushed_ = 0;
}

int64_t LineBuffer::windows_per_frame() const {
  const int64_t rows = (padded_height_ - kernel_) / stride_ + 1;
  const int64_t cols = (padded_width_ - kernel_) / stride_ + 1;
  return rows > 0 && cols > 0 ? rows * cols : 0;
}

void LineBuffer::push_padded(int64_t value, std::vector<std::vector<int64_t>> &out) {
  const size_t size = cells_.size();
  cells_[head_] = value;
  head_ = (head_ + 1) % size;
  const int64_t q = padded_pushed_++;
  const int64_t py = q / padded_width_, px = q % padded_width_;
  const int64_t top = py - (kernel_ - 1), left = px - (kernel_ - 1);
  if (top < 0 || left < 0 || top % stride_ != 0 || left % stride_ != 0) return;
  std::vector<int64_t> window(static_cast<size_t>(kernel_) * kernel_);
  for (int r = 0; r < kernel_; ++r) {
    for (int c = 0; c < kernel_; ++c) {
      const size_t back = static_cast<size_t>(kernel_ - 1 - r) * padded_width_ + static_cast<size_t>(kernel_ - 1 - c);
      window[static_cast<size_t>(r) * kernel_ + c] = cells_[(head_ + size - 1 - back) % size];
    }
  }
  out.push_back(std::move(window));
}

std::vector<std::vector<int64_t>> LineBuffer::push(int64_t value) {
  if (frame_done()) throw Error(ErrorCode::kSimulation, "line buffer received more pixels than one frame");
  std::vector<std::vector<int64_t>> out;
  const int64_t y = real_pushed_ / width_, x = real_pushed_ % width_;
  const int64_t target = (y + pad_) * padded_width_ + (x + pad_);
  while (padded_pushed_ < target) push_padded(0, out);
  push_padded(value, out);
  ++real_pushed_;
  if (frame_done()) {
    while (padded_pushed_ < int64_t{padded_width_} * padded_height_) push_padded(0, out);
  }
  return out;
}

namespace {

void check_accumulators(const ActorGraph &g) {
  for (const auto &l : g.layers) {
    if (l.kind != GraphLayer::kConv || !l.weight_format) continue;
    const int bits = std::max(l.input_format.total_bits, l.weight_format->total_bits);
    const int acc = accumulator_bits(bits, int64_t{l.in_shape.channels} * l.kernel * l.kernel + 1);
    if (acc > 63) {
      throw Error(ErrorCode::kUnsupported,
                  "layer '" + l.name + "' needs a " + std::to_string(acc) + "-bit accumulator; at most 63 bits are supported");
    }
  }
}

class Engine {
 public:
  Engine(const ActorGraph &g, const SimOptions &options) : g_(g), options_(options), rng_(options.seed) {
    const size_t n = g.actors.size();
    queues_.resize(n);
    fanout_.resize(n);
    for (size_t i = 0; i < n; ++i) {
      queues_[i].resize(static_cast<size_t>(g.actors[i].num_inputs()));
      fanout_[i].resize(static_cast<size_t>(g.actors[i].num_outputs()));
    }
    for (const auto &ch : g.channels) fanout_[ch.from.actor][static_cast<size_t>(ch.from.port)].push_back(ch.to);
    buffers_.resize(n);
    consumed_.assign(n, 0);
    first_window_.assign(n, -1);
    result_.firings.assign(n, 0);
    for (size_t i = 0; i < n; ++i) {
      if (const auto *ne = std::get_if<NeighborhoodExtractor>(&g.actors[i].kind)) {
        buffers_[i].emplace_back(ne->kernel, ne->stride, ne->pad, ne->image_width, ne->image_height);
      } else if (const auto *p = std::get_if<PoolActor>(&g.actors[i].kind)) {
        buffers_[i].emplace_back(p->kernel, p->stride, 0, p->image_width, p->image_height);
      }
    }
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), size_t{0});
    if (options.policy == SchedulePolicy::kReverse) std::reverse(order_.begin(), order_.end());
    sink_tokens_.resize(g.output_ports.size());
  }

  SimResult run(const FeatureMaps &image) {
    const int64_t pixels = int64_t{image.shape.height} * image.shape.width;
    for (int64_t i = 0; i < pixels; ++i) {
      const int y = static_cast<int>(i / image.shape.width), x = static_cast<int>(i % image.shape.width);
      for (size_t c = 0; c < g_.input_ports.size(); ++c) {
        const size_t src = g_.input_ports[c];
        ++result_.firings[src];
        emit(src, 0, image.at(static_cast<int>(c), y, x));
      }
      run_to_quiescence();
    }
    check_drained();
    assemble();
    return std::move(result_);
  }

 private:
  void emit(size_t actor, int port, int64_t value) {
    for (const PortRef &to : fanout_[actor][static_cast<size_t>(port)]) {
      auto &q = queues_[to.actor][static_cast<size_t>(to.port)];
      q.push_back(value);
      result_.max_queue_depth = std::max(result_.max_queue_depth, q.size());
    }
  }

  bool can_fire(size_t a) const {
    const auto &qs = queues_[a];
    if (qs.empty()) return false;
    return std::all_of(qs.begin(), qs.end(), [](const auto &q) { return !q.empty(); });
  }

  int64_t pop(size_t a, size_t port) {
    auto &q = queues_[a][port];
    const int64_t v = q.front();
    q.pop_front();
    return v;
  }

  void fire(size_t a) {
    ++result_.firings[a];
    const Actor &actor = g_.actors[a];
    std::visit(
        [&](const auto &k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, SinkActor>) {
            sink_tokens_[static_cast<size_t>(k.channel)].push_back(pop(a, 0));
          } else if constexpr (std::is_same_v<T, NeighborhoodExtractor>) {
            const int64_t index = consumed_[a]++;
            const auto windows = buffers_[a].front().push(pop(a, 0));
            for (const auto &w : windows) {
              if (first_window_[a] < 0) {
                first_window_[a] = index;
                result_.first_window.emplace_back(a, index);
              }
              for (size_t t = 0; t < w.size(); ++t) emit(a, static_cast<int>(t), w[t]);
            }
          } else if constexpr (std::is_same_v<T, PoolActor>) {
            const auto windows = buffers_[a].front().push(pop(a, 0));
            for (const auto &w : windows) {
              int64_t v = 0;
              if (k.mode == PoolMode::kMax) {
                v = *std::max_element(w.begin(), w.end());
              } else {
                v = rounding_divide(std::accumulate(w.begin(), w.end(), int64_t{0}), static_cast<int64_t>(w.size()));
              }
              emit(a, 0, v);
            }
          } else if constexpr (std::is_same_v<T, MultActor>) {
            emit(a, 0, pop(a, 0) * k.weight);
          } else if constexpr (std::is_same_v<T, WireActor>) {
            emit(a, 0, pop(a, 0));
          } else if constexpr (std::is_same_v<T, ShiftActor>) {
            const int64_t v = pop(a, 0) * (int64_t{1} << k.shift);
            emit(a, 0, k.negative ? -v : v);
          } else if constexpr (std::is_same_v<T, ConstZeroActor>) {
            pop(a, 0);
            emit(a, 0, 0);
          } else if constexpr (std::is_same_v<T, AdderTreeActor>) {
            int64_t s = 0;
            for (size_t p = 0; p < queues_[a].size(); ++p) s += pop(a, p);
            emit(a, 0, s);
          } else if constexpr (std::is_same_v<T, NeuronSumActor>) {
            int64_t s = k.bias * (int64_t{1} << k.bias_shift);
            for (size_t p = 0; p < queues_[a].size(); ++p) s += pop(a, p);
            emit(a, 0, s);
          } else if constexpr (std::is_same_v<T, ActivationActor>) {
            int64_t v = requantize(pop(a, 0), k.input_frac, k.mid);
            if (k.fn == ActivationFn::kReLU) v = std::max<int64_t>(0, v);
            else if (k.fn == ActivationFn::kTanh) v = tanh_lut_value(v, k.mid, k.out);
            emit(a, 0, v);
          } else if constexpr (std::is_same_v<T, SourceActor>) {
            throw Error(ErrorCode::kInternal, "source actor '" + actor.id + "' fired by the scheduler");
          }
        },
        actor.kind);
  }

  void run_to_quiescence() {
    for (;;) {
      ++result_.sweeps;
      if (options_.policy == SchedulePolicy::kRandom) std::shuffle(order_.begin(), order_.end(), rng_);
      bool progress = false;
      for (size_t a : order_) {
        while (can_fire(a)) {
          fire(a);
          progress = true;
        }
      }
      if (!progress) return;
    }
  }

  void check_drained() const {
    for (size_t a = 0; a < queues_.size(); ++a) {
      const auto &qs = queues_[a];
      size_t pending = 0;
      int empty_port = -1;
      for (size_t p = 0; p < qs.size(); ++p) {
        pending += qs[p].size();
        if (qs[p].empty() && empty_port < 0) empty_port = static_cast<int>(p);
      }
      if (pending == 0) continue;
      std::string msg = "deadlock: actor '" + g_.actors[a].id + "' holds " + std::to_string(pending) + " pending tokens";
      if (empty_port >= 0) msg += " and is starved on input port " + std::to_string(empty_port);
      throw Error(ErrorCode::kSimulation, msg);
    }
  }

  void assemble() {
    const Shape3 &shape = g_.output_shape;
    result_.output = FeatureMaps(shape, g_.output_format);
    const auto expected = static_cast<size_t>(int64_t{shape.height} * shape.width);
    for (size_t c = 0; c < sink_tokens_.size(); ++c) {
      const auto &tokens = sink_tokens_[c];
      if (tokens.size() != expected) {
        throw Error(ErrorCode::kSimulation, "sink '" + g_.actors[g_.output_ports[c]].id + "' received " +
                                                std::to_string(tokens.size()) + " tokens, expected " +
                                                std::to_string(expected));
      }
      std::copy(tokens.begin(), tokens.end(), result_.output.data.begin() + static_cast<std::ptrdiff_t>(c * expected));
    }
  }

  const ActorGraph &g_;
  SimOptions options_;
  std::mt19937_64 rng_;
  std::vector<std::vector<std::deque<int64_t>>> queues_;
  std::vector<std::vector<std::vector<PortRef>>> fanout_;
  std::vector<std::vector<LineBuffer>> buffers_;  // at most one per actor
  std::vector<int64_t> consumed_;
  std::vector<int64_t> first_window_;
  std::vector<size_t> order_;
  std::vector<std::vector<int64_t>> sink_tokens_;
  SimResult result_;
};

}  // namespace

SimResult simulate(const ActorGraph &g, const FeatureMaps &image, const SimOptions &options) {
  if (!(image.shape == g.input_shape)) {
    throw Error(ErrorCode::kShape, "image is " + std::to_string(image.shape.channels) + "x" +
                                       std::to_string(image.shape.height) + "x" + std::to_string(image.shape.width) +
                                       ", graph expects " + std::to_string(g.input_shape.channels) + "x" +
                                       std::to_string(g.input_shape.height) + "x" + std::to_string(g.input_shape.width));
  }
  if (!(image.format == g.input_format)) {
    throw Error(ErrorCode::kShape, "image format " + to_string(image.format) + " differs from graph input format " +
                                       to_string(g.input_format));
  }
  if (!image.in_range()) throw Error(ErrorCode::kShape, "image value outside its format range");
  if (g.input_ports.size() != static_cast<size_t>(g.input_shape.channels)) {
    throw Error(ErrorCode::kInvalidArgument, "graph input ports do not match its input shape");
  }
  check_accumulators(g);
  Engine engine(g, options);
  return engine.run(image);
}

std::vector<int64_t> expected_firings(const ActorGraph &g) {
  const size_t n = g.actors.size();
  std::vector<int64_t> firings(n, 0), produced(n, 0), received(n, -1);
  const auto order = topological_order(g);
  if (!order) throw Error(ErrorCode::kInvalidArgument, "graph has a cycle");
  std::vector<std::vector<size_t>> successors(n);
  for (const auto &ch : g.channels) {
    if (ch.to.port == 0) successors[ch.from.actor].push_back(ch.to.actor);
  }
  const int64_t pixels = int64_t{g.input_shape.height} * g.input_shape.width;
  for (size_t a : *order) {
    const auto &kind = g.actors[a].kind;
    const int64_t in = received[a] < 0 ? 0 : received[a];
    if (std::holds_alternative<SourceActor>(kind)) {
      firings[a] = produced[a] = pixels;
    } else if (const auto *ne = std::get_if<NeighborhoodExtractor>(&kind)) {
      firings[a] = in;
      produced[a] = LineBuffer(ne->kernel, ne->stride, ne->pad, ne->image_width, ne->image_height).windows_per_frame();
    } else if (const auto *p = std::get_if<PoolActor>(&kind)) {
      firings[a] = in;
      produced[a] = LineBuffer(p->kernel, p->stride, 0, p->image_width, p->image_height).windows_per_frame();
    } else {
      firings[a] = produced[a] = in;
    }
    for (size_t s : successors[a]) received[s] = produced[a];
  }
  return firings;
}

}  // namespace dhm
