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

// dhmc: command-line driver over the C API.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "dhm/dhm.h"

namespace {

enum class LogLevel { kError, kWarn, kInfo, kDebug };

LogLevel log_level() {
  const char *env = std::getenv("DHM_LOG_LEVEL");
  const std::string v = env ? env : "warn";
  if (v == "error") return LogLevel::kError;
  if (v == "info") return LogLevel::kInfo;
  if (v == "debug") return LogLevel::kDebug;
  return LogLevel::kWarn;
}

void log(LogLevel level, const std::string &msg) {
  static const LogLevel threshold = log_level();
  if (level > threshold) return;
  static const char *names[] = {"error", "warning", "info", "debug"};
  std::cerr << "dhmc: " << names[static_cast<int>(level)] << ": " << msg << "\n";
}

/// Failure carrying a process exit code.
struct Exit {
  int code;
};

constexpr int kExitValidation = 1;
constexpr int kExitInternal = 2;

int exit_code(dhm_status s) {
  return s == DHM_ERR_INTERNAL || s == DHM_ERR_SIMULATION ? kExitInternal : kExitValidation;
}

void check(dhm_status s) {
  if (s == DHM_OK) return;
  log(LogLevel::kError, dhm_last_error());
  throw Exit{exit_code(s)};
}

struct StringDeleter {
  void operator()(char *s) const { dhm_string_free(s); }
};
using String = std::unique_ptr<char, StringDeleter>;

template <typename T, void (*Free)(T *)>
struct HandleDeleter {
  void operator()(T *p) const { Free(p); }
};
using Model = std::unique_ptr<dhm_model, HandleDeleter<dhm_model, dhm_model_free>>;
using QOptions = std::unique_ptr<dhm_quant_options, HandleDeleter<dhm_quant_options, dhm_quant_options_free>>;
using QModel = std::unique_ptr<dhm_qmodel, HandleDeleter<dhm_qmodel, dhm_qmodel_free>>;
using Graph = std::unique_ptr<dhm_graph, HandleDeleter<dhm_graph, dhm_graph_free>>;
using Calibration = std::unique_ptr<dhm_calibration, HandleDeleter<dhm_calibration, dhm_calibration_free>>;
using Image = std::unique_ptr<dhm_image, HandleDeleter<dhm_image, dhm_image_free>>;

String take(char *s) { return String(s); }

struct Config {
  std::string topology;
  std::string weights;
  int bits = 8;
  std::vector<std::string> weight_frac;
  std::vector<std::string> data_frac;
  int input_frac = -1;
  bool no_nef = false;
  bool no_specialize = false;
  bool json = false;
};

void add_model_options(CLI::App *cmd, Config &cfg) {
  cmd->add_option("topology", cfg.topology, "Network topology (.prototxt subset)")->required()->check(CLI::ExistingFile);
  cmd->add_option("weights", cfg.weights, "Weights container (.hdw)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--bits,-b", cfg.bits, "Total bits of every fixed-point format")->check(CLI::Range(2, 32));
  cmd->add_option("--frac", cfg.weight_frac, "Weight fractional bits for a layer, as LAYER=F (repeatable)");
  cmd->add_option("--data-frac", cfg.data_frac, "Output fractional bits for a layer, as LAYER=F (repeatable)");
  cmd->add_option("--input-frac", cfg.input_frac, "Fractional bits of the input pixels (default: bits-1)");
}

void add_graph_options(CLI::App *cmd, Config &cfg) {
  cmd->add_flag("--no-nef", cfg.no_nef, "One neighborhood extractor per (neuron, channel) instead of per channel");
  cmd->add_flag("--no-specialize", cfg.no_specialize, "Keep every multiplier as a run-time multiplier");
}

std::pair<std::string, int> split_override(const std::string &s) {
  const auto eq = s.rfind('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == s.size()) {
    log(LogLevel::kError, "expected LAYER=F, got '" + s + "'");
    throw Exit{kExitValidation};
  }
  try {
    size_t used = 0;
    const int v = std::stoi(s.substr(eq + 1), &used);
    if (used != s.size() - eq - 1) throw std::invalid_argument(s);
    return {s.substr(0, eq), v};
  } catch (const std::exception &) {
    log(LogLevel::kError, "fractional bits in '" + s + "' is not an integer");
    throw Exit{kExitValidation};
  }
}

void print_warnings(const dhm_model *m) {
  for (size_t i = 0; i < dhm_model_warning_count(m); ++i) log(LogLevel::kWarn, dhm_model_warning(m, i));
}

struct Pipeline {
  Model model;
  QModel qm;
};

Pipeline load(const Config &cfg) {
  Pipeline p;
  dhm_model *topology = nullptr;
  check(dhm_model_parse_file(cfg.topology.c_str(), &topology));
  const Model t(topology);
  dhm_model *weighted = nullptr;
  check(dhm_model_load_weights_file(t.get(), cfg.weights.c_str(), &weighted));
  p.model.reset(weighted);
  print_warnings(p.model.get());

  dhm_quant_options *raw = nullptr;
  check(dhm_quant_options_create(cfg.bits, &raw));
  const QOptions options(raw);
  for (const auto &s : cfg.weight_frac) {
    const auto [layer, f] = split_override(s);
    check(dhm_quant_options_set_weight_frac(options.get(), layer.c_str(), f));
  }
  for (const auto &s : cfg.data_frac) {
    const auto [layer, f] = split_override(s);
    check(dhm_quant_options_set_data_frac(options.get(), layer.c_str(), f));
  }
  if (cfg.input_frac >= 0) check(dhm_quant_options_set_input_frac(options.get(), cfg.input_frac));
  dhm_qmodel *qm = nullptr;
  check(dhm_quantize(p.model.get(), options.get(), &qm));
  p.qm.reset(qm);
  log(LogLevel::kInfo, "quantized " + cfg.topology + " at " + std::to_string(cfg.bits) + " bits");
  return p;
}

Graph graph_of(const Config &cfg, const dhm_qmodel *qm, bool specialize) {
  dhm_graph *g = nullptr;
  check(dhm_graph_build(qm, cfg.no_nef ? 0 : 1, &g));
  Graph graph(g);
  if (specialize && !cfg.no_specialize) {
    dhm_graph *s = nullptr;
    check(dhm_graph_specialize(graph.get(), &s));
    graph.reset(s);
  }
  return graph;
}

int run_compile(const Config &cfg, const std::string &out_dir, bool dry_run) {
  if (!dry_run && out_dir.empty()) {
    log(LogLevel::kError, "compile needs --output DIR or --dry-run");
    return kExitValidation;
  }
  const auto p = load(cfg);
  const auto g = graph_of(cfg, p.qm.get(), true);
  char *manifest = nullptr, *files = nullptr;
  check(dhm_emit(g.get(), p.qm.get(), cfg.topology.c_str(), cfg.weights.c_str(), dry_run ? nullptr : out_dir.c_str(),
                 &manifest, &files));
  const String m = take(manifest), f = take(files);
  if (dry_run) {
    std::cout << m.get();
  } else {
    std::cout << f.get();
  }
  return 0;
}

int run_simulate(const Config &cfg, const std::string &image_path, uint64_t seed, const std::string &schedule,
                 const std::string &dump, bool golden_only) {
  const auto p = load(cfg);
  dhm_image *raw = nullptr;
  if (image_path.empty()) {
    check(dhm_image_random(p.qm.get(), seed, &raw));
  } else {
    check(dhm_image_load(image_path.c_str(), p.qm.get(), &raw));
  }
  const Image image(raw);
  dhm_image *golden_raw = nullptr;
  check(dhm_golden(p.qm.get(), image.get(), &golden_raw));
  const Image golden(golden_raw);
  if (golden_only) {
    if (!dump.empty()) check(dhm_image_save_raw(golden.get(), dump.c_str()));
    std::cout << (cfg.json ? "{\n  \"mode\": \"golden-only\"\n}\n" : "golden model evaluated\n");
    return 0;
  }
  dhm_graph *probe = nullptr;
  if (dhm_graph_build(p.qm.get(), 1, &probe) == DHM_ERR_UNSUPPORTED) {
    log(LogLevel::kError, std::string(dhm_last_error()) + " (rerun with --golden-only)");
    throw Exit{kExitValidation};
  }
  dhm_graph_free(probe);
  const auto g = graph_of(cfg, p.qm.get(), true);
  const dhm_schedule policy = schedule == "reverse" ? DHM_SCHEDULE_REVERSE
                              : schedule == "random" ? DHM_SCHEDULE_RANDOM
                                                     : DHM_SCHEDULE_ROUND_ROBIN;
  dhm_image *out_raw = nullptr;
  char *stats_raw = nullptr;
  check(dhm_simulate(g.get(), image.get(), policy, seed, &out_raw, &stats_raw));
  const Image out(out_raw);
  const String stats = take(stats_raw);
  if (!dump.empty()) check(dhm_image_save_raw(out.get(), dump.c_str()));
  int exact = 0;
  char *report_raw = nullptr;
  check(dhm_compare(out.get(), golden.get(), &exact, &report_raw));
  const String report = take(report_raw);
  if (cfg.json) {
    nlohmann::ordered_json j;
    j["exact"] = exact != 0;
    j["comparison"] = nlohmann::ordered_json::parse(report.get());
    j["simulation"] = nlohmann::ordered_json::parse(stats.get());
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << (exact ? "exact match" : "MISMATCH") << " between simulation and golden model\n" << report.get();
  }
  return exact ? 0 : kExitValidation;
}

int run_stats(const Config &cfg) {
  const auto p = load(cfg);
  char *raw = nullptr;
  check(cfg.json ? dhm_kernel_stats_json(p.qm.get(), &raw) : dhm_kernel_stats_table(p.qm.get(), &raw));
  std::cout << take(raw).get();
  return 0;
}

int run_estimate(const Config &cfg, double fmax_mhz, const std::string &calibration_path) {
  const auto p = load(cfg);
  const auto g = graph_of(cfg, p.qm.get(), true);
  Calibration cal;
  if (!calibration_path.empty()) {
    dhm_calibration *c = nullptr;
    check(dhm_calibration_load_file(calibration_path.c_str(), &c));
    cal.reset(c);
  }
  char *raw = nullptr;
  check(dhm_estimate(p.qm.get(), g.get(), cal.get(), fmax_mhz * 1e6, cfg.json ? 0 : 1, &raw));
  std::cout << take(raw).get();
  return 0;
}

int run_graph(const Config &cfg, bool census, const std::string &footprint) {
  const auto p = load(cfg);
  const auto g = graph_of(cfg, p.qm.get(), !cfg.no_specialize);
  char *raw = nullptr;
  if (census) {
    check(dhm_graph_census_json(g.get(), &raw));
  } else if (!footprint.empty()) {
    check(dhm_graph_footprint_json(g.get(), footprint == "window" ? DHM_FOOTPRINT_WINDOW : DHM_FOOTPRINT_ARCHITECTURAL,
                                   cfg.bits, &raw));
  } else {
    check(dhm_graph_dot(g.get(), &raw));
  }
  std::cout << take(raw).get();
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"dhmc: compile a CNN into a direct-hardware-mapped VHDL netlist", "dhmc"};
  app.set_version_flag("--version", dhm_version());
  app.require_subcommand(1);
  app.footer("Environment: DHM_LOG_LEVEL=error|warn|info|debug (default warn).\n"
             "Exit status: 0 success, 1 invalid input or mismatch, 2 internal error.");

  Config cfg;
  std::string out_dir, image, schedule = "round-robin", dump, calibration, footprint;
  bool dry_run = false, golden_only = false, census = false;
  uint64_t seed = 1;
  double fmax_mhz = 0;

  auto *compile = app.add_subcommand("compile", "Emit the VHDL netlist, params package and manifest");
  add_model_options(compile, cfg);
  add_graph_options(compile, cfg);
  compile->add_option("--output,-o", out_dir, "Output directory");
  compile->add_flag("--dry-run", dry_run, "Write nothing; print the manifest");

  auto *simulate = app.add_subcommand("simulate", "Run the actor graph on an image and compare with the golden model");
  add_model_options(simulate, cfg);
  add_graph_options(simulate, cfg);
  simulate->add_option("--image", image, "Input image: .pgm, or raw planar with a .json sidecar (default: random)")
      ->check(CLI::ExistingFile);
  simulate->add_option("--seed", seed, "Seed of the random image and of the random schedule");
  simulate->add_option("--schedule", schedule, "Actor visiting order")
      ->check(CLI::IsMember({"round-robin", "reverse", "random"}));
  simulate->add_option("--dump", dump, "Write the output feature maps as raw planar data to this path");
  simulate->add_flag("--golden-only", golden_only, "Evaluate the golden model only (networks with FC layers)");
  simulate->add_flag("--json", cfg.json, "Machine-readable output");

  auto *stats = app.add_subcommand("stats", "Multiplier class statistics of the quantized kernels");
  add_model_options(stats, cfg);
  stats->add_flag("--json", cfg.json, "Machine-readable output");

  auto *estimate = app.add_subcommand("estimate", "Estimate logic, buffer memory, ops per pixel and throughput");
  add_model_options(estimate, cfg);
  add_graph_options(estimate, cfg);
  estimate->add_option("--fmax", fmax_mhz, "Pixel clock in MHz used for the throughput figure")
      ->check(CLI::PositiveNumber);
  estimate->add_option("--calibration", calibration, "Calibration JSON (default: built in)")->check(CLI::ExistingFile);
  estimate->add_flag("--json", cfg.json, "Machine-readable output");

  auto *graph = app.add_subcommand("graph", "Dump the actor graph as DOT, its entity census or its buffer memory");
  add_model_options(graph, cfg);
  add_graph_options(graph, cfg);
  auto *census_flag = graph->add_flag("--census", census, "Print the entity census as JSON instead of DOT");
  graph->add_option("--footprint", footprint, "Print extractor buffer memory as JSON")
      ->check(CLI::IsMember({"window", "architectural"}))
      ->excludes(census_flag);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*compile) return run_compile(cfg, out_dir, dry_run);
    if (*simulate) return run_simulate(cfg, image, seed, schedule, dump, golden_only);
    if (*stats) return run_stats(cfg);
    if (*estimate) return run_estimate(cfg, fmax_mhz, calibration);
    if (*graph) return run_graph(cfg, census, footprint);
  } catch (const Exit &e) {
    return e.code;
  } catch (const std::exception &e) {
    log(LogLevel::kError, std::string("internal error: ") + e.what());
    return kExitInternal;
  }
  return kExitInternal;
}
