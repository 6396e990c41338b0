// Copyright 2026 The JECS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_util.hpp"

#include "jecs/cli.hpp"

using namespace jecs;
using namespace jecs::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("jecs_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(JECS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

RunConfig quick_config(const fs::path& out) {
  Overrides o;
  o.output_dir = out.string();
  o.reps = 3;
  return resolve(o);
}

// 6 x 2 fixture written as CSV files.
std::pair<fs::path, fs::path> write_fixture(const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream(dir / "test.csv") << "item_id,m1,m2\n"
                                     "a,-3,-2.5\nb,0.1,4.2\nc,-1.5,-2\nd,5,5.5\ne,-2.2,-0.3\nf,1,-4\n";
  std::ofstream(dir / "cal.csv") << "item_id,m1,m2\n"
                                    "c0,3.1,4.4\nc1,4.5,3.9\nc2,5.2,4.8\nc3,3.7,5.6\nc4,4.1,2.9\nc5,2.8,4.1\n";
  return {dir / "test.csv", dir / "cal.csv"};
}

}  // namespace

TEST_CASE("config resolution: defaults, file, then flags") {
  const auto dir = scratch("config");
  fs::create_directories(dir);
  std::ofstream(dir / "cfg.json") << R"({"generator":"split","split":{"rho":0.5},"protocol":{"reps":7,"seed":9},
                                          "jecs":{"lambda":0.6},"procedures":["jmcs"]})";
  Overrides o;
  o.config_path = (dir / "cfg.json").string();
  auto rc = resolve(o);
  CHECK(rc.generator.kind == GeneratorKind::Split);
  CHECK(rc.generator.split.rho == 0.5);
  CHECK(rc.protocol.reps == 7);
  CHECK(rc.seed == 9);
  CHECK(rc.protocol.jecs.pinned_lambda == 0.6);
  CHECK(rc.procedures == std::vector<Procedure>{Procedure::JMCS});
  o.reps = 11;
  o.rho = 0.25;
  o.seed = 4;
  rc = resolve(o);
  CHECK(rc.protocol.reps == 11);
  CHECK(rc.generator.split.rho == 0.25);
  CHECK(rc.protocol.seed == 4);
  CHECK(rc.generator.split.seed == 4);

  std::ofstream(dir / "bad.json") << R"({"protocol":{"repz":3}})";
  o.config_path = (dir / "bad.json").string();
  REQUIRE_ERROR_KIND(resolve(o), ErrorKind::Parameter);
  std::ofstream(dir / "broken.json") << "{";
  o.config_path = (dir / "broken.json").string();
  REQUIRE_ERROR_KIND(resolve(o), ErrorKind::Parse);
  o.config_path = (dir / "missing.json").string();
  REQUIRE_ERROR_KIND(resolve(o), ErrorKind::Io);
}

TEST_CASE("resolved config round-trips through JSON") {
  Overrides o;
  o.k = 8;
  o.alpha = std::vector<double>{0.05, 0.15};
  const auto rc = resolve(o);
  RunConfig back;
  apply_config(rc.to_json(), back);
  CHECK(back.to_json() == rc.to_json());
  CHECK_FALSE(rc.to_json()["protocol"].contains("parallelism"));
}

TEST_CASE("scores: one record gives a 1x1 CSV") {
  std::istringstream in(R"({"item_id":"x","model_id":"m","token_logprobs":[-1,-3],"dist_mean":[0,0],"dist_std":[1,1]})");
  ScoresArgs a;
  const auto out = render_scores(in, a);
  REQUIRE(out.size() == 1);
  CHECK(out.at("scores_minkpp_test.csv") == "item_id,m\nx,-3\n");
}

TEST_CASE("scores: golden fixture through the command") {
  const auto dir = scratch("scores");
  ScoresArgs a;
  a.input = JECS_FIXTURE_DIR "/golden_tokens.jsonl";
  a.detectors = {"minkpp", "mink"};
  cmd_scores(a, quick_config(dir));
  CHECK(slurp(dir / "scores_minkpp_test.csv") == slurp(JECS_FIXTURE_DIR "/golden_minkpp_test.csv"));
  CHECK(fs::exists(dir / "scores_mink_test.csv"));
  const auto manifest = json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["command"] == "scores");
  CHECK(manifest["artifacts"].size() == 2);
}

TEST_CASE("scores: failures leave no output behind") {
  const auto dir = scratch("scores_fail");
  fs::create_directories(dir);
  std::ofstream(dir / "empty.jsonl") << "";
  std::ofstream(dir / "bad.jsonl") << R"({"item_id":"x","model_id":"m","token_logprobs":[-1],"dist_mean":[0],"dist_std":[1]})"
                                    << "\n{oops\n";
  ScoresArgs a;
  a.input = (dir / "empty.jsonl").string();
  const auto out = dir / "out";
  REQUIRE_ERROR_KIND(cmd_scores(a, quick_config(out)), ErrorKind::Parse);
  CHECK_FALSE(fs::exists(out));
  a.input = (dir / "bad.jsonl").string();
  REQUIRE_ERROR_KIND(cmd_scores(a, quick_config(out)), ErrorKind::Parse);
  CHECK_FALSE(fs::exists(out));
  CHECK(run_cli("scores --input " + (dir / "bad.jsonl").string() + " --out " + out.string()) == 1);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("select: jmcs matches the library call") {
  const auto dir = scratch("select");
  const auto [test_csv, cal_csv] = write_fixture(dir);
  SelectArgs a{test_csv.string(), cal_csv.string(), "jmcs", 0.5};
  const auto files = cmd_select(a, quick_config(dir / "out"));
  std::ifstream t(test_csv), c(cal_csv);
  const auto test = read_score_csv(t);
  const auto cal = as_calibration(read_score_csv(c));
  const auto expected = jmcs_select(test, cal, 0.5);
  const auto got = json::parse(files.at("selection.json"));
  REQUIRE(got.size() == 1);
  CHECK(got[0] == to_json(expected, test.items));
  CHECK(slurp(dir / "out" / "selection.json") == files.at("selection.json"));
}

TEST_CASE("select: union emits K+1 results, jecs writes its envelope") {
  const auto dir = scratch("select_union");
  const auto [test_csv, cal_csv] = write_fixture(dir);
  SelectArgs a{test_csv.string(), cal_csv.string(), "union", 0.3};
  const auto files = cmd_select(a, quick_config(dir / "out"));
  const auto got = json::parse(files.at("selection.json"));
  REQUIRE(got.size() == 3);
  CHECK(got[0]["model"] == "m1");
  CHECK(got[2]["procedure"] == "union");

  a.procedure = "jecs";
  const auto j = json::parse(cmd_select(a, quick_config(dir / "out2")).at("selection.json"));
  CHECK(j[0]["procedure"] == "jecs");
  // Six items cannot fill a tail, so JECS degrades to the max-p baseline.
  CHECK(j[0]["envelope_fallback"] == true);
}

TEST_CASE("select: usage and alignment errors") {
  const auto dir = scratch("select_err");
  const auto [test_csv, cal_csv] = write_fixture(dir);
  SelectArgs a{test_csv.string(), cal_csv.string(), "holm", 0.1};
  REQUIRE_ERROR_KIND(cmd_select(a, quick_config(dir / "out")), ErrorKind::Parameter);
  a.procedure = "jmcs";
  a.alpha = 1.5;
  REQUIRE_ERROR_KIND(cmd_select(a, quick_config(dir / "out")), ErrorKind::Parameter);
  std::ofstream(dir / "cal3.csv") << "item_id,m1,m3\nc0,1,2\n";
  a.alpha = 0.1;
  a.cal_csv = (dir / "cal3.csv").string();
  REQUIRE_ERROR_KIND(cmd_select(a, quick_config(dir / "out")), ErrorKind::Alignment);

  const auto base = "select --test " + test_csv.string() + " --cal " + cal_csv.string() + " --out " + (dir / "o").string();
  CHECK(run_cli(base + " --procedure jmcs --alpha 0.2") == 0);
  CHECK(run_cli(base + " --procedure jmcs --alpha 1.5") == 2);
  CHECK(run_cli(base + " --procedure holm") == 2);
  CHECK(run_cli("select --test " + test_csv.string()) == 2);
  CHECK(run_cli("frobnicate") == 2);
}

TEST_CASE("simulate: artifacts and determinism") {
  const auto dir = scratch("simulate");
  auto rc = quick_config(dir / "a");
  cmd_simulate(rc);
  for (const char* f : {"results.csv", "summary.csv", "chart.svg", "labels.csv", "world_test.csv", "world_cal.csv",
                        "manifest.json"})
    CHECK(fs::exists(dir / "a" / f));
  const auto summary = slurp(dir / "a" / "summary.csv");
  CHECK(summary.rfind("procedure,alpha,axis,axis_value,reps,gcr,gcp_std_err,mean_power,power_std_err\n", 0) == 0);
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 1 + 4 * 5);
  const auto again = render_simulate(rc);
  CHECK(again.at("summary.csv") == summary);
  rc.protocol.parallelism = 3;
  CHECK(render_simulate(rc).at("results.csv") == slurp(dir / "a" / "results.csv"));
}

TEST_CASE("simulate: a one-rep smoke run is fast") {
  const auto dir = scratch("smoke");
  const auto start = std::chrono::steady_clock::now();
  CHECK(run_cli("simulate --reps 1 --out " + dir.string()) == 0);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(5));
  CHECK(fs::exists(dir / "summary.csv"));
}

TEST_CASE("sweep: single value matches simulate, K sweep row count") {
  Overrides o;
  o.reps = 3;
  o.procedures = std::vector<std::string>{"jecs"};
  const auto rc = resolve(o);
  const std::vector<double> one{static_cast<double>(rc.generator.synthetic.K)};
  const auto sw = render_sweep(SweepAxis::K, one, rc);
  const auto sim = render_simulate(rc);
  auto strip_axis = [](std::string s) {
    std::string out;
    std::istringstream in(s);
    std::string line;
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::string cell;
      std::istringstream ls(line);
      while (std::getline(ls, cell, ',')) cells.push_back(cell);
      cells.erase(cells.begin() + 2, cells.begin() + 4);
      for (auto& c : cells) out += c + ",";
      out += "\n";
    }
    return out;
  };
  CHECK(strip_axis(sw.at("summary.csv")) == strip_axis(sim.at("summary.csv")));

  const std::vector<double> ks{2, 4, 8, 16};
  const auto k = render_sweep(SweepAxis::K, ks, rc);
  const auto& s = k.at("summary.csv");
  CHECK(std::count(s.begin(), s.end(), '\n') == 1 + 4 * 5);

  const std::vector<double> lambdas{0.5, 0.8};
  const auto l = render_sweep(SweepAxis::Lambda, lambdas, rc).at("summary.csv");
  CHECK(l.find(",lambda,adaptive,") != std::string::npos);
}

TEST_CASE("check-assumptions and null-curves") {
  const auto rc = quick_config(scratch("diag"));
  const auto d = json::parse(render_check_assumptions(rc, 0.5).at("diagnostics.json"));
  CHECK(d["lambda"] == 0.5);
  CHECK(d["n_null"].get<int>() + d["n_pure"].get<int>() == 840);
  const auto curves = render_null_curves(8).at("null_curves_K8.csv");
  CHECK(curves.rfind("t,cdf,density\n0,0,0\n", 0) == 0);
  CHECK(curves.find("\n1,1,8\n") != std::string::npos);
}

TEST_CASE("output directory comes from the environment by default") {
  ::setenv(kOutputDirEnv, "/tmp/jecs_env_out", 1);
  CHECK(default_output_dir() == "/tmp/jecs_env_out");
  CHECK(resolve(Overrides{}).output_dir == "/tmp/jecs_env_out");
  ::unsetenv(kOutputDirEnv);
  CHECK(default_output_dir() == "jecs_out");
}
