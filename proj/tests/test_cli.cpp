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

// Runs the dhmc executable as a user would.

#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const std::string kModels = DHM_SOURCE_DIR "/models/";

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run dhmc(const std::string &args, const std::string &env = "") {
  const auto err_path = fs::temp_directory_path() / ("dhmc_cli_err_" + std::to_string(::getpid()));
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" DHMC_PATH "' " + args + " 2>'" + err_path.string() + "'";
  Run r;
  FILE *p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf;
  size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream e(err_path);
  std::ostringstream s;
  s << e.rdbuf();
  r.err = s.str();
  fs::remove(err_path);
  return r;
}

std::string model(const std::string &name) { return "'" + kModels + name + ".prototxt' '" + kModels + name + ".hdw'"; }

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_hdw(const fs::path &p, const std::string &manifest, size_t floats) {
  std::ofstream out(p, std::ios::binary);
  out << manifest;
  for (size_t i = 0; i < floats; ++i) {
    const float v = (i % 7 == 0) ? -0.25f : 0.125f * static_cast<float>(i % 5);
    char raw[4];
    std::memcpy(raw, &v, 4);
    out.write(raw, 4);
  }
}

}  // namespace

TEST_CASE("help text matches the CLI reference") {
  const std::string doc = slurp(DHM_SOURCE_DIR "/docs/cli.md");
  REQUIRE_FALSE(doc.empty());
  for (const std::string sub : {"", "compile", "simulate", "stats", "estimate", "graph"}) {
    const auto r = dhmc(sub + (sub.empty() ? "" : " ") + "--help");
    CAPTURE(sub);
    CHECK(r.code == 0);
    CHECK(doc.find("```text\n" + r.out + "```") != std::string::npos);
  }
  const auto v = dhmc("--version");
  CHECK(v.code == 0);
  CHECK(v.out == std::string(DHM_VERSION) + "\n");
}

TEST_CASE("compile writes byte-identical projects on repeated runs") {
  const auto a = fs::temp_directory_path() / "dhmc_cli_a";
  const auto b = fs::temp_directory_path() / "dhmc_cli_b";
  fs::remove_all(a);
  fs::remove_all(b);
  REQUIRE(dhmc("compile " + model("lenet5_relu") + " -b 5 -o '" + a.string() + "'").code == 0);
  REQUIRE(dhmc("compile " + model("lenet5_relu") + " -b 5 -o '" + b.string() + "'").code == 0);
  int files = 0;
  for (const auto &e : fs::directory_iterator(a)) {
    ++files;
    CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
  }
  CHECK(files == 4);
  CHECK(fs::exists(a / "lenet5_relu_toplevel.vhd"));
  CHECK(fs::exists(a / "lenet5_relu_params.vhd"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("compile --dry-run prints the manifest") {
  const auto r = dhmc("compile " + model("dummy_layer") + " --dry-run --no-specialize");
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["census"]["total"]["multipliers"] == 135);
  CHECK(j["options"]["specialized"] == false);
}

TEST_CASE("simulate reports an exact match") {
  auto r = dhmc("simulate " + model("lenet5_relu") + " -b 5 --seed 4");
  CHECK(r.code == 0);
  CHECK(r.out.find("exact match") != std::string::npos);
  r = dhmc("simulate " + model("dummy_layer") + " --schedule random --seed 9 --json --no-nef");
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["exact"] == true);

  // Round trip through a dumped raw image.
  const auto dump = fs::temp_directory_path() / "dhmc_cli_dump.raw";
  r = dhmc("simulate " + model("dummy_layer") + " --dump '" + dump.string() + "'");
  CHECK(r.code == 0);
  CHECK(fs::file_size(dump) == 5u * 6 * 6 * 4);
  CHECK(fs::exists(dump.string() + ".json"));
  fs::remove(dump);
  fs::remove(dump.string() + ".json");
}

TEST_CASE("simulate accepts PGM input") {
  const auto pgm = fs::temp_directory_path() / "dhmc_cli.pgm";
  {
    std::ofstream out(pgm, std::ios::binary);
    out << "P5\n28 28\n255\n";
    for (int i = 0; i < 28 * 28; ++i) out.put(static_cast<char>((i * 37) % 256));
  }
  const auto r = dhmc("simulate " + model("lenet5") + " --image '" + pgm.string() + "'");
  CHECK(r.code == 0);
  fs::remove(pgm);
}

TEST_CASE("stats, estimate and graph subcommands") {
  auto r = dhmc("stats " + model("lenet5") + " -b 5 --json");
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(r.out)["total"]["total"] == 25500);

  r = dhmc("estimate " + model("lenet5") + " -b 5 --fmax 69.14 --json");
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["total"]["ops_per_pixel"] == 25850.0);
  CHECK(j["throughput_gops"].get<double>() == doctest::Approx(25850 * 0.06914));

  r = dhmc("estimate " + model("lenet5") + " --calibration '" DHM_SOURCE_DIR "/data/calibration.json'");
  CHECK(r.code == 0);
  CHECK(r.out.find("total") != std::string::npos);

  r = dhmc("graph " + model("alexnet_conv1") + " --footprint window --no-nef");
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(r.out)["total_bits"] == 34848 * 8);

  r = dhmc("graph " + model("conv_c6_n16") + " --census --no-specialize");
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(r.out)["total"]["multipliers"] == 2400);

  r = dhmc("graph " + model("dummy_layer"));
  CHECK(r.code == 0);
  CHECK(r.out.rfind("digraph", 0) == 0);
}

TEST_CASE("errors exit with status 1 and a message") {
  const auto bad = fs::temp_directory_path() / "dhmc_cli_bad.prototxt";
  {
    std::ofstream out(bad);
    out << "input_shape { dim: 1 dim: 1 dim: 8 dim: 8 }\nlayer { name: \"c\" type: \"Convolution\"\n";
  }
  auto r = dhmc("compile '" + bad.string() + "' '" + kModels + "lenet5.hdw' --dry-run");
  CHECK(r.code == 1);
  CHECK(r.err.find("dhmc: error:") != std::string::npos);
  CHECK(r.err.find("dhmc_cli_bad.prototxt") != std::string::npos);
  fs::remove(bad);

  r = dhmc("compile '" + kModels + "lenet5.prototxt' '" + kModels + "dummy_layer.hdw' --dry-run");
  CHECK(r.code == 1);
  CHECK(r.err.find("conv1") != std::string::npos);

  r = dhmc("compile /nonexistent.prototxt /nonexistent.hdw");
  CHECK(r.code == 1);
  r = dhmc("simulate " + model("dummy_layer") + " --schedule sideways");
  CHECK(r.code == 1);
  r = dhmc("");
  CHECK(r.code == 1);
  r = dhmc("stats " + model("lenet5") + " --frac conv9=3");
  CHECK(r.code == 1);
  r = dhmc("stats " + model("lenet5") + " --frac conv1");
  CHECK(r.code == 1);
}

TEST_CASE("fully connected networks run under --golden-only") {
  const auto dir = fs::temp_directory_path() / "dhmc_cli_fc";
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "fc.prototxt");
    out << "input_shape { dim: 1 dim: 1 dim: 6 dim: 6 }\n"
           "layer { name: \"c\" type: \"Convolution\" convolution_param { num_output: 2 kernel_size: 3 } }\n"
           "layer { name: \"ip\" type: \"InnerProduct\" inner_product_param { num_output: 3 } }\n";
  }
  write_hdw(dir / "fc.hdw",
            "HDW1\ntensor c weight 2,1,3,3 0\ntensor c bias 2 72\ntensor ip weight 3,32 80\ntensor ip bias 3 464\nend\n",
            18 + 2 + 96 + 3);
  const std::string args = "'" + (dir / "fc.prototxt").string() + "' '" + (dir / "fc.hdw").string() + "'";
  auto r = dhmc("simulate " + args);
  CHECK(r.code == 1);
  CHECK(r.err.find("--golden-only") != std::string::npos);
  r = dhmc("simulate " + args + " --golden-only --json");
  CHECK(r.code == 0);
  r = dhmc("compile " + args + " --dry-run");
  CHECK(r.code == 1);
  fs::remove_all(dir);
}

TEST_CASE("log level comes from the environment") {
  const auto quiet = dhmc("stats " + model("lenet5"), "DHM_LOG_LEVEL=error");
  const auto chatty = dhmc("stats " + model("lenet5"), "DHM_LOG_LEVEL=debug");
  CHECK(quiet.code == 0);
  CHECK(chatty.code == 0);
  CHECK(quiet.err.empty());
  CHECK(chatty.err.find("dhmc: info:") != std::string::npos);
  CHECK(quiet.out == chatty.out);
}
