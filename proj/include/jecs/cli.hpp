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

#pragma once

// Batch commands behind the `jecs` executable. Each command resolves a
// declarative JSON config overlaid by flags, renders every artifact in
// memory and only then writes them, together with a manifest.json, into the
// output directory. Nothing is written when a command fails.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "jecs/conformal.hpp"
#include "jecs/envelope.hpp"
#include "jecs/error.hpp"
#include "jecs/harness.hpp"
#include "jecs/report.hpp"
#include "jecs/score_matrix.hpp"
#include "jecs/scores.hpp"
#include "jecs/selection.hpp"
#include "jecs/simgen.hpp"

#ifndef JECS_VERSION
#define JECS_VERSION "0.0.0"
#endif

namespace jecs::cli {

using json = nlohmann::json;

inline constexpr const char* kOutputDirEnv = "JECS_OUTPUT_DIR";

inline std::string default_output_dir() {
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return "jecs_out";
}

/// Flag values; unset fields fall back to the config document, then to the
/// built-in defaults.
struct Overrides {
  std::optional<std::string> config_path;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::optional<std::vector<double>> alpha;
  std::optional<std::vector<double>> lambda_grid;
  std::optional<double> lambda;
  std::optional<std::size_t> k;
  std::optional<double> rho;
  std::optional<double> mu;
  std::optional<double> member_prob;
  std::optional<std::size_t> n_pool;
  std::optional<double> subsample;
  std::optional<std::size_t> parallelism;
  std::optional<std::vector<std::string>> procedures;
  std::optional<std::string> per_model_pi0;
  std::optional<double> knn_exponent;
};

/// Fully resolved run configuration.
struct RunConfig {
  GeneratorSpec generator;
  ProtocolConfig protocol;
  std::vector<Procedure> procedures{Procedure::Union, Procedure::Intersection, Procedure::JMCS, Procedure::JECS};
  std::string config_path;
  std::string output_dir = default_output_dir();
  std::uint64_t seed = 1;
  bool procedures_explicit = false;

  /// Everything except parallelism, which never affects results.
  json to_json() const {
    json j;
    j["generator"] = generator.kind == GeneratorKind::Synthetic ? "synthetic" : "split";
    const auto& s = generator.synthetic;
    j["synthetic"] = {{"n_pool", s.n_pool}, {"cal_fraction", s.cal_fraction}, {"K", s.K},
                      {"member_prob", s.member_prob}, {"mu", s.mu}, {"seed", s.seed}};
    const auto& sp = generator.split;
    j["split"] = {{"n_pool", sp.n_pool}, {"a", sp.a}, {"b", sp.b}, {"rho", sp.rho}, {"K", sp.K},
                  {"seed", sp.seed}, {"mu", generator.split_mu}};
    j["protocol"] = {{"reps", protocol.reps},
                     {"subsample_fraction", protocol.subsample_fraction},
                     {"alpha_grid", protocol.alpha_grid},
                     {"seed", protocol.seed},
                     {"per_model_pi0", protocol.per_model.pi0 == PerModelPi0::Storey ? "storey" : "one"},
                     {"storey_lambda", protocol.per_model.storey_lambda}};
    j["jecs"] = {{"lambda_grid", protocol.jecs.lambda_grid},
                 {"lambda", protocol.jecs.pinned_lambda ? json(*protocol.jecs.pinned_lambda) : json(nullptr)},
                 {"knn_exponent", protocol.jecs.tail.knn_exponent},
                 {"min_tail", protocol.jecs.tail.min_tail}};
    json procs = json::array();
    for (auto p : procedures) procs.push_back(to_string(p));
    j["procedures"] = procs;
    return j;
  }
};

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T>
void take(const json& section, const char* key, T& dst, const std::string& where) {
  if (!section.contains(key) || section.at(key).is_null()) return;
  try {
    dst = section.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::Parameter, "config field " + where + "." + key + " has the wrong type");
  }
}

inline void check_known(const json& section, std::initializer_list<const char*> keys, const std::string& where) {
  for (const auto& [k, v] : section.items()) {
    bool ok = false;
    for (const char* key : keys) ok = ok || k == key;
    require(ok, ErrorKind::Parameter, "unknown config field " + where + "." + k);
  }
}

inline PerModelPi0 parse_pi0_rule(const std::string& s) {
  if (s == "storey") return PerModelPi0::Storey;
  if (s == "one" || s == "bh") return PerModelPi0::One;
  fail(ErrorKind::Parameter, "per_model_pi0 must be 'storey' or 'one'");
}

}  // namespace detail

inline void apply_config(const json& doc, RunConfig& rc) {
  require(doc.is_object(), ErrorKind::Parameter, "config must be a JSON object");
  detail::check_known(doc, {"generator", "synthetic", "split", "protocol", "jecs", "procedures"}, "config");
  if (doc.contains("generator")) {
    const auto g = doc.at("generator").get<std::string>();
    require(g == "synthetic" || g == "split", ErrorKind::Parameter, "config.generator must be synthetic or split");
    rc.generator.kind = g == "synthetic" ? GeneratorKind::Synthetic : GeneratorKind::Split;
  }
  if (doc.contains("synthetic")) {
    const auto& s = doc.at("synthetic");
    detail::check_known(s, {"n_pool", "cal_fraction", "K", "member_prob", "mu", "seed"}, "synthetic");
    auto& c = rc.generator.synthetic;
    detail::take(s, "n_pool", c.n_pool, "synthetic");
    detail::take(s, "cal_fraction", c.cal_fraction, "synthetic");
    detail::take(s, "K", c.K, "synthetic");
    detail::take(s, "member_prob", c.member_prob, "synthetic");
    detail::take(s, "mu", c.mu, "synthetic");
    detail::take(s, "seed", c.seed, "synthetic");
  }
  if (doc.contains("split")) {
    const auto& s = doc.at("split");
    detail::check_known(s, {"n_pool", "a", "b", "rho", "K", "seed", "mu"}, "split");
    auto& c = rc.generator.split;
    detail::take(s, "n_pool", c.n_pool, "split");
    detail::take(s, "a", c.a, "split");
    detail::take(s, "b", c.b, "split");
    detail::take(s, "rho", c.rho, "split");
    detail::take(s, "K", c.K, "split");
    detail::take(s, "seed", c.seed, "split");
    detail::take(s, "mu", rc.generator.split_mu, "split");
  }
  if (doc.contains("protocol")) {
    const auto& s = doc.at("protocol");
    detail::check_known(s, {"reps", "subsample_fraction", "alpha_grid", "seed", "parallelism", "per_model_pi0",
                            "storey_lambda"},
                        "protocol");
    auto& c = rc.protocol;
    detail::take(s, "reps", c.reps, "protocol");
    detail::take(s, "subsample_fraction", c.subsample_fraction, "protocol");
    detail::take(s, "alpha_grid", c.alpha_grid, "protocol");
    detail::take(s, "seed", c.seed, "protocol");
    detail::take(s, "parallelism", c.parallelism, "protocol");
    std::string rule;
    detail::take(s, "per_model_pi0", rule, "protocol");
    if (!rule.empty()) c.per_model.pi0 = detail::parse_pi0_rule(rule);
    detail::take(s, "storey_lambda", c.per_model.storey_lambda, "protocol");
  }
  if (doc.contains("jecs")) {
    const auto& s = doc.at("jecs");
    detail::check_known(s, {"lambda_grid", "lambda", "knn_exponent", "min_tail"}, "jecs");
    auto& c = rc.protocol.jecs;
    detail::take(s, "lambda_grid", c.lambda_grid, "jecs");
    if (s.contains("lambda") && !s.at("lambda").is_null()) c.pinned_lambda = s.at("lambda").get<double>();
    detail::take(s, "knn_exponent", c.tail.knn_exponent, "jecs");
    detail::take(s, "min_tail", c.tail.min_tail, "jecs");
  }
  if (doc.contains("procedures")) {
    rc.procedures.clear();
    rc.procedures_explicit = true;
    for (const auto& p : doc.at("procedures")) rc.procedures.push_back(parse_procedure(p.get<std::string>()));
  }
}

inline void apply_overrides(const Overrides& o, RunConfig& rc) {
  if (o.seed) {
    rc.seed = *o.seed;
    rc.generator.synthetic.seed = *o.seed;
    rc.generator.split.seed = *o.seed;
    rc.protocol.seed = *o.seed;
  }
  if (o.output_dir) rc.output_dir = *o.output_dir;
  if (o.reps) rc.protocol.reps = *o.reps;
  if (o.alpha) rc.protocol.alpha_grid = *o.alpha;
  if (o.lambda_grid) rc.protocol.jecs.lambda_grid = *o.lambda_grid;
  if (o.lambda) rc.protocol.jecs.pinned_lambda = *o.lambda;
  if (o.k) {
    rc.generator.synthetic.K = *o.k;
    rc.generator.split.K = *o.k;
  }
  if (o.rho) rc.generator.split.rho = *o.rho;
  if (o.mu) {
    rc.generator.synthetic.mu = *o.mu;
    rc.generator.split_mu = *o.mu;
  }
  if (o.member_prob) rc.generator.synthetic.member_prob = *o.member_prob;
  if (o.n_pool) {
    rc.generator.synthetic.n_pool = *o.n_pool;
    rc.generator.split.n_pool = *o.n_pool;
  }
  if (o.subsample) rc.protocol.subsample_fraction = *o.subsample;
  if (o.parallelism) rc.protocol.parallelism = *o.parallelism;
  if (o.procedures) {
    rc.procedures.clear();
    rc.procedures_explicit = true;
    for (const auto& p : *o.procedures) rc.procedures.push_back(parse_procedure(p));
  }
  if (o.per_model_pi0) rc.protocol.per_model.pi0 = detail::parse_pi0_rule(*o.per_model_pi0);
  if (o.knn_exponent) rc.protocol.jecs.tail.knn_exponent = *o.knn_exponent;
}

/// Defaults, then the config document (if any), then flags.
inline RunConfig resolve(const Overrides& o, std::optional<GeneratorKind> kind = std::nullopt) {
  RunConfig rc;
  if (o.config_path) {
    rc.config_path = *o.config_path;
    json doc;
    try {
      doc = json::parse(detail::read_file(*o.config_path));
    } catch (const json::exception& e) {
      fail(ErrorKind::Parse, "config '" + *o.config_path + "': " + e.what());
    }
    apply_config(doc, rc);
    if (doc.contains("protocol") && doc["protocol"].contains("seed")) rc.seed = rc.protocol.seed;
  }
  if (kind) rc.generator.kind = *kind;
  apply_overrides(o, rc);
  rc.protocol.validate();
  if (rc.protocol.jecs.pinned_lambda)
    require(*rc.protocol.jecs.pinned_lambda > 0.0 && *rc.protocol.jecs.pinned_lambda < 1.0, ErrorKind::Parameter,
            "lambda must lie in (0,1)");
  require(!rc.procedures.empty(), ErrorKind::Parameter, "no procedures selected");
  return rc;
}

inline json manifest(const std::string& command, const RunConfig& rc, const std::vector<std::string>& artifacts,
                     json extra = json::object()) {
  json m;
  m["command"] = command;
  m["config_path"] = rc.config_path;
  m["seed"] = rc.seed;
  m["output_dir"] = rc.output_dir;
  m["versions"] = {{"jecs", JECS_VERSION}, {"compiler", __VERSION__}, {"cplusplus", __cplusplus}};
  m["config"] = rc.to_json();
  m["artifacts"] = artifacts;
  for (auto& [k, v] : extra.items()) m[k] = v;
  return m;
}

/// Rendered artifacts, keyed by file name.
using Outputs = std::map<std::string, std::string>;

/// Writes every artifact plus manifest.json; on any failure the files
/// written so far are removed again.
inline void write_outputs(const std::string& dir, const Outputs& files) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::Io, "cannot create output directory '" + dir + "': " + ec.message());
  std::vector<fs::path> written;
  try {
    for (const auto& [name, body] : files) {
      const fs::path path = fs::path(dir) / name;
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      require(static_cast<bool>(out), ErrorKind::Io, "cannot write '" + path.string() + "'");
      written.push_back(path);
      out << body;
      out.close();
      require(static_cast<bool>(out), ErrorKind::Io, "short write to '" + path.string() + "'");
    }
  } catch (...) {
    for (const auto& p : written) fs::remove(p, ec);
    throw;
  }
}

inline Outputs with_manifest(Outputs files, const std::string& command, const RunConfig& rc,
                             json extra = json::object()) {
  std::vector<std::string> names;
  for (const auto& [name, body] : files) names.push_back(name);
  files["manifest.json"] = manifest(command, rc, names, std::move(extra)).dump(2) + "\n";
  return files;
}

// ---------------------------------------------------------------------------
// scores

struct ScoresArgs {
  std::string input;
  std::vector<std::string> detectors{"minkpp"};
  double k_percent = 20.0;
  double sigma_floor = 1e-6;
};

inline Outputs render_scores(std::istream& jsonl, const ScoresArgs& a) {
  const auto corpus = read_token_jsonl(jsonl);
  Outputs out;
  for (const auto& d : a.detectors) {
    ScoreConfig cfg{parse_score_kind(d), a.k_percent, a.sigma_floor};
    cfg.validate();
    const auto test = score_matrix(corpus.test, cfg);
    std::ostringstream test_csv;
    write_score_csv(test_csv, test);
    out["scores_" + d + "_test.csv"] = test_csv.str();
    if (!corpus.cal.empty()) {
      const auto cal = score_matrix(corpus.cal, cfg);
      require(cal.models == test.models, ErrorKind::Alignment,
              "calibration records cover different models than test records");
      std::ostringstream cal_csv;
      write_score_csv(cal_csv, cal);
      out["scores_" + d + "_cal.csv"] = cal_csv.str();
    }
  }
  return out;
}

inline Outputs cmd_scores(const ScoresArgs& a, const RunConfig& rc) {
  std::ifstream in(a.input, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open '" + a.input + "'");
  auto files = render_scores(in, a);
  json extra = {{"input", a.input}, {"detectors", a.detectors}, {"k_percent", a.k_percent},
                {"sigma_floor", a.sigma_floor}};
  files = with_manifest(std::move(files), "scores", rc, extra);
  write_outputs(rc.output_dir, files);
  return files;
}

// ---------------------------------------------------------------------------
// select

struct SelectArgs {
  std::string test_csv;
  std::string cal_csv;
  std::string procedure = "jecs";
  double alpha = 0.1;
};

inline Outputs render_select(const ScoreMatrix& test, const CalibrationScores& cal, const SelectArgs& a,
                             const RunConfig& rc) {
  check_alpha(a.alpha);
  const auto proc = parse_procedure(a.procedure);
  check_aligned(test, cal);
  test.validate();
  cal.validate();
  const auto pvals = conformal_pvalues(test, cal);
  json results = json::array();
  Outputs out;
  switch (proc) {
    case Procedure::PerModelBH:
    case Procedure::Union:
    case Procedure::Intersection: {
      const auto per_model = per_model_select(pvals, a.alpha, rc.protocol.per_model);
      for (const auto& r : per_model) results.push_back(to_json(r, test.items, test.models));
      if (proc != Procedure::PerModelBH) results.push_back(to_json(compose_naive(per_model, proc), test.items));
      break;
    }
    case Procedure::JMCS:
      results.push_back(to_json(jmcs_from_maxp(max_p(pvals).values, a.alpha), test.items));
      break;
    case Procedure::JECS: {
      const auto cal_fit = jecs_calibrate(max_p(pvals).values, rc.protocol.jecs);
      results.push_back(to_json(jecs_from_calibration(cal_fit, a.alpha), test.items));
      if (cal_fit.fit) {
        std::ostringstream env;
        write_envelope_csv(env, *cal_fit.fit);
        out["envelope.csv"] = env.str();
      }
      break;
    }
  }
  out["selection.json"] = results.dump(2) + "\n";
  return out;
}

inline Outputs cmd_select(const SelectArgs& a, const RunConfig& rc) {
  std::ifstream t(a.test_csv, std::ios::binary), c(a.cal_csv, std::ios::binary);
  require(static_cast<bool>(t), ErrorKind::Io, "cannot open '" + a.test_csv + "'");
  require(static_cast<bool>(c), ErrorKind::Io, "cannot open '" + a.cal_csv + "'");
  const auto test = read_score_csv(t);
  const auto cal = as_calibration(read_score_csv(c));
  auto files = render_select(test, cal, a, rc);
  json extra = {{"test_csv", a.test_csv}, {"cal_csv", a.cal_csv}, {"procedure", a.procedure}, {"alpha", a.alpha}};
  files = with_manifest(std::move(files), "select", rc, extra);
  write_outputs(rc.output_dir, files);
  return files;
}

// ---------------------------------------------------------------------------
// simulate / sweep

inline Outputs render_cells(std::span<const SweepCell> cells, const std::string& title) {
  Outputs out;
  std::ostringstream results, summary, svg;
  write_results_csv(results, cells);
  write_summary_csv(summary, cells);
  write_svg_chart(svg, cells, title);
  out["results.csv"] = results.str();
  out["summary.csv"] = summary.str();
  out["chart.svg"] = svg.str();
  return out;
}

inline Outputs render_simulate(const RunConfig& rc) {
  const auto world = make_world(rc.generator);
  std::vector<SweepCell> cells{{"none", "", run_protocol(world, rc.procedures, rc.protocol)}};
  const std::string kind = rc.generator.kind == GeneratorKind::Synthetic ? "synthetic" : "split";
  auto out = render_cells(cells, "simulate " + kind + ": GCR (lines) and power (bars) vs alpha");
  std::ostringstream labels, test_csv, cal_csv;
  write_labels_csv(labels, world);
  write_score_csv(test_csv, world.test);
  write_score_csv(cal_csv, as_score_matrix(world.cal));
  out["labels.csv"] = labels.str();
  out["world_test.csv"] = test_csv.str();
  out["world_cal.csv"] = cal_csv.str();
  return out;
}

inline Outputs cmd_simulate(const RunConfig& rc) {
  auto files = with_manifest(render_simulate(rc), "simulate", rc);
  write_outputs(rc.output_dir, files);
  return files;
}

inline Outputs render_sweep(SweepAxis axis, std::span<const double> values, const RunConfig& rc) {
  SweepConfig sc{rc.generator, rc.protocol, rc.procedures};
  const auto cells = sweep(axis, values, sc);
  return render_cells(cells, std::string("sweep over ") + to_string(axis));
}

inline Outputs cmd_sweep(SweepAxis axis, const std::vector<double>& values, const RunConfig& rc) {
  auto files = with_manifest(render_sweep(axis, values, rc), "sweep", rc,
                             {{"axis", to_string(axis)}, {"values", values}});
  write_outputs(rc.output_dir, files);
  return files;
}

// ---------------------------------------------------------------------------
// check-assumptions / null-curves

inline Outputs render_check_assumptions(const RunConfig& rc, double lambda) {
  const auto world = make_world(rc.generator);
  const auto d = check_assumptions(world, lambda);
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json("unavailable"); };
  json j = {{"lambda", d.lambda},
            {"n_null", d.n_null},
            {"n_pure", d.n_pure},
            {"convexity_violation", opt(d.convexity_violation)},
            {"tail_dominance_margin", opt(d.tail_dominance_margin)}};
  return {{"diagnostics.json", j.dump(2) + "\n"}};
}

inline Outputs cmd_check_assumptions(const RunConfig& rc, double lambda) {
  auto files = with_manifest(render_check_assumptions(rc, lambda), "check-assumptions", rc, {{"lambda", lambda}});
  write_outputs(rc.output_dir, files);
  return files;
}

inline Outputs render_null_curves(std::size_t K) {
  std::ostringstream os;
  os << "t,cdf,density\n";
  for (const auto& r : null_reference_curves(K))
    os << format_number(r[0]) << ',' << format_number(r[1]) << ',' << format_number(r[2]) << '\n';
  return {{"null_curves_K" + std::to_string(K) + ".csv", os.str()}};
}

inline Outputs cmd_null_curves(std::size_t K, const RunConfig& rc) {
  auto files = with_manifest(render_null_curves(K), "null-curves", rc, {{"K", K}});
  write_outputs(rc.output_dir, files);
  return files;
}

}  // namespace jecs::cli
