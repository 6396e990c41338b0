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

// Command-line front end. Exit codes: 0 success, 1 data or I/O error,
// 2 usage error.

#include <iostream>

#include "CLI11.hpp"

#include "jecs/cli.hpp"

namespace {

using jecs::cli::Overrides;

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON config file; flags override its fields");
  cmd->add_option("--out", o.output_dir, "Output directory (default $JECS_OUTPUT_DIR or ./jecs_out)");
  cmd->add_option("--seed", o.seed, "Master seed");
}

void add_run_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--reps", o.reps, "Monte Carlo repetitions");
  cmd->add_option("--alpha", o.alpha, "Target level(s)")->delimiter(',');
  cmd->add_option("--lambda-grid", o.lambda_grid, "Candidate lambda values for JECS")->delimiter(',');
  cmd->add_option("--lambda", o.lambda, "Pin the JECS lambda instead of selecting it");
  cmd->add_option("--k", o.k, "Number of models K");
  cmd->add_option("--rho", o.rho, "Per-model training fraction (split generator)");
  cmd->add_option("--mu", o.mu, "Member score shift");
  cmd->add_option("--member-prob", o.member_prob, "Per-model membership probability (synthetic)");
  cmd->add_option("--n-pool", o.n_pool, "Pool size");
  cmd->add_option("--subsample", o.subsample, "Per-repetition subsample fraction");
  cmd->add_option("--parallelism", o.parallelism, "Worker threads; results do not depend on it");
  cmd->add_option("--procedures", o.procedures, "union,intersection,jmcs,jecs,per_model")->delimiter(',');
  cmd->add_option("--per-model-pi0", o.per_model_pi0, "Per-model null proportion: storey or one");
  cmd->add_option("--knn-exponent", o.knn_exponent, "Tail neighbour count exponent");
}

jecs::GeneratorKind parse_generator(const std::string& s) {
  if (s == "synthetic") return jecs::GeneratorKind::Synthetic;
  if (s == "split") return jecs::GeneratorKind::Split;
  jecs::fail(jecs::ErrorKind::Parameter, "generator must be 'synthetic' or 'split'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint envelope conformal selection of jointly unseen items"};
  app.set_version_flag("--version", JECS_VERSION);
  app.require_subcommand(1);

  Overrides o;
  std::string generator;

  jecs::cli::ScoresArgs scores_args;
  auto* scores = app.add_subcommand("scores", "Turn token-level JSONL into per-model score CSVs");
  add_common(scores, o);
  scores->add_option("--input", scores_args.input, "Token-level JSONL file")->required();
  scores->add_option("--detectors", scores_args.detectors, "minkpp,mink,perplexity,mentropy")->delimiter(',');
  scores->add_option("--k-percent", scores_args.k_percent, "Bottom-k percentage for min-k scores");
  scores->add_option("--sigma-floor", scores_args.sigma_floor, "Lower bound on the token std");

  jecs::cli::SelectArgs select_args;
  auto* select = app.add_subcommand("select", "Run one selection procedure on score CSVs");
  add_common(select, o);
  select->add_option("--test", select_args.test_csv, "Test score CSV")->required();
  select->add_option("--cal", select_args.cal_csv, "Calibration score CSV")->required();
  select->add_option("--procedure", select_args.procedure, "per_model|jmcs|jecs|union|intersection");
  select->add_option("--alpha", select_args.alpha, "Target level in (0,1)");
  select->add_option("--lambda-grid", o.lambda_grid, "Candidate lambda values")->delimiter(',');
  select->add_option("--lambda", o.lambda, "Pin lambda");
  select->add_option("--per-model-pi0", o.per_model_pi0, "storey or one");
  select->add_option("--knn-exponent", o.knn_exponent, "Tail neighbour count exponent");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo evaluation on a simulated world");
  add_common(simulate, o);
  add_run_options(simulate, o);
  simulate->add_option("generator,--generator", generator, "synthetic or split");

  std::string axis;
  std::vector<double> values;
  auto* sweep = app.add_subcommand("sweep", "Repeat the evaluation along one parameter axis");
  add_common(sweep, o);
  add_run_options(sweep, o);
  sweep->add_option("generator,--generator", generator, "synthetic or split");
  sweep->add_option("--axis", axis, "alpha|lambda|K|rho")->required();
  sweep->add_option("--values", values, "Axis values")->delimiter(',')->required();

  double check_lambda = 0.5;
  auto* check = app.add_subcommand("check-assumptions", "Diagnose envelope assumptions on a simulated world");
  add_common(check, o);
  add_run_options(check, o);
  check->add_option("generator,--generator", generator, "synthetic or split");
  check->add_option("--at-lambda", check_lambda, "Boundary used for the tail comparison");

  std::size_t curves_k = 4;
  auto* curves = app.add_subcommand("null-curves", "Reference CDF and density of the max of K uniforms");
  add_common(curves, o);
  curves->add_option("--k", curves_k, "Number of models K");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    std::optional<jecs::GeneratorKind> kind;
    if (!generator.empty()) kind = parse_generator(generator);
    if (*scores) {
      jecs::cli::cmd_scores(scores_args, jecs::cli::resolve(o));
    } else if (*select) {
      jecs::cli::cmd_select(select_args, jecs::cli::resolve(o));
    } else if (*simulate) {
      jecs::cli::cmd_simulate(jecs::cli::resolve(o, kind));
    } else if (*sweep) {
      const auto ax = jecs::parse_axis(axis);
      if (ax == jecs::SweepAxis::Rho && !kind) kind = jecs::GeneratorKind::Split;
      auto rc = jecs::cli::resolve(o, kind);
      if (!rc.procedures_explicit) rc.procedures = {jecs::Procedure::JECS};
      jecs::cli::cmd_sweep(ax, values, rc);
    } else if (*check) {
      jecs::cli::cmd_check_assumptions(jecs::cli::resolve(o, kind), check_lambda);
    } else if (*curves) {
      jecs::require(curves_k >= 1, jecs::ErrorKind::Parameter, "K must be >= 1");
      jecs::cli::cmd_null_curves(curves_k, jecs::cli::resolve(o));
    }
  } catch (const jecs::Error& e) {
    std::cerr << "jecs: " << e.what() << "\n";
    return e.kind() == jecs::ErrorKind::Parameter ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "jecs: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
