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

// Monte Carlo evaluation: each repetition draws a fresh subsample of the
// calibration and test blocks of one fixed world, runs every procedure at
// every alpha and records the realized contamination proportion (GCP) and
// power. Repetitions use their own derived random streams and land in
// pre-assigned slots, so the thread count never changes the output.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "jecs/conformal.hpp"
#include "jecs/envelope.hpp"
#include "jecs/error.hpp"
#include "jecs/format.hpp"
#include "jecs/rng.hpp"
#include "jecs/selection.hpp"
#include "jecs/simgen.hpp"

namespace jecs {

inline void check_indices(std::span<const std::size_t> selected, const MembershipLabels& labels) {
  for (auto i : selected)
    require(i < labels.n_items(), ErrorKind::Alignment, "selected index " + std::to_string(i) + " out of range");
}

/// Fraction of selected items that are members of at least one model,
/// with denominator max(1, |S|).
inline double gcp(std::span<const std::size_t> selected, const MembershipLabels& labels) {
  check_indices(selected, labels);
  std::size_t bad = 0;
  for (auto i : selected) bad += labels.contaminated(i) ? 1 : 0;
  return static_cast<double>(bad) / static_cast<double>(std::max<std::size_t>(1, selected.size()));
}

/// Fraction of jointly pure items that were selected, with denominator
/// max(1, #pure).
inline double power(std::span<const std::size_t> selected, const MembershipLabels& labels) {
  check_indices(selected, labels);
  std::size_t hit = 0;
  for (auto i : selected) hit += labels.jointly_pure(i) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(std::max<std::size_t>(1, labels.count_pure()));
}

struct ProtocolConfig {
  std::size_t reps = 500;
  double subsample_fraction = 0.80;
  std::vector<double> alpha_grid{0.1, 0.2, 0.3, 0.4, 0.5};
  std::uint64_t seed = 1;
  std::size_t parallelism = 1;
  PerModelOptions per_model{PerModelPi0::Storey, 0.5};
  JecsOptions jecs;

  void validate() const {
    require(reps >= 1, ErrorKind::Parameter, "reps must be >= 1");
    require(subsample_fraction > 0.0 && subsample_fraction <= 1.0, ErrorKind::Parameter,
            "subsample_fraction must lie in (0,1]");
    require(!alpha_grid.empty(), ErrorKind::Parameter, "alpha grid is empty");
    for (double a : alpha_grid) check_alpha(a);
  }
};

struct TrialOutcome {
  std::size_t rep = 0;
  Procedure procedure = Procedure::JECS;
  double alpha = 0.0;
  double gcp = 0.0;
  double power = 0.0;
  std::size_t n_selected = 0;
  double lambda = kNaN;
  double pi0_hat = kNaN;
};

struct MetricSummary {
  Procedure procedure = Procedure::JECS;
  double alpha = 0.0;
  double gcr = 0.0;
  double gcp_std_err = 0.0;
  double mean_power = 0.0;
  double power_std_err = 0.0;
  std::size_t reps = 0;
};

struct ProtocolResult {
  std::vector<TrialOutcome> outcomes;  // rep-major, then procedure, then alpha
  std::vector<MetricSummary> summaries;  // procedure-major, then alpha

  const MetricSummary& summary(Procedure p, double alpha) const {
    for (const auto& s : summaries)
      if (s.procedure == p && s.alpha == alpha) return s;
    fail(ErrorKind::Parameter, std::string("no summary for ") + to_string(p) + " at alpha " + format_number(alpha));
  }
};

/// Mean and standard error (sample std / sqrt(n)); the error is 0 for n = 1.
inline std::pair<double, double> mean_and_se(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

inline std::vector<MetricSummary> summarize(std::span<const TrialOutcome> outcomes,
                                            std::span<const Procedure> procedures,
                                            std::span<const double> alphas) {
  std::vector<MetricSummary> out;
  for (auto p : procedures) {
    for (double a : alphas) {
      std::vector<double> g, w;
      for (const auto& o : outcomes)
        if (o.procedure == p && o.alpha == a) {
          g.push_back(o.gcp);
          w.push_back(o.power);
        }
      MetricSummary s;
      s.procedure = p;
      s.alpha = a;
      s.reps = g.size();
      if (!g.empty()) {
        std::tie(s.gcr, s.gcp_std_err) = mean_and_se(g);
        std::tie(s.mean_power, s.power_std_err) = mean_and_se(w);
      }
      out.push_back(s);
    }
  }
  return out;
}

namespace detail {

inline std::size_t subsample_size(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

/// One repetition; writes procedures.size() * alphas.size() outcomes.
inline void run_repetition(const World& world, std::span<const Procedure> procedures, const ProtocolConfig& cfg,
                           std::size_t rep, std::span<TrialOutcome> slots) {
  const std::size_t m = world.cal.size(), n = world.test.n_items();
  const std::size_t m_sub = subsample_size(m, cfg.subsample_fraction);
  const std::size_t n_sub = subsample_size(n, cfg.subsample_fraction);
  require(m_sub >= 1, ErrorKind::Protocol, "subsampled calibration set is empty");
  require(n_sub >= 1, ErrorKind::Protocol, "subsampled test set is empty");

  rng::Stream cal_rng(rng::derive(cfg.seed, rng::Tag::CalSubsample, rep));
  rng::Stream test_rng(rng::derive(cfg.seed, rng::Tag::TestSubsample, rep));
  const auto cal_idx = cal_rng.sample_without_replacement(m, m_sub);
  const auto test_idx = test_rng.sample_without_replacement(n, n_sub);

  const auto pvals = conformal_pvalues(world.test.values.select_rows(test_idx), world.cal.values.select_rows(cal_idx));
  const auto labels = world.labels.select_rows(test_idx);
  const auto maxp = max_p(pvals);

  const bool need_jecs = std::find(procedures.begin(), procedures.end(), Procedure::JECS) != procedures.end();
  std::optional<JecsCalibration> jecs_cal;
  if (need_jecs) jecs_cal = jecs_calibrate(maxp.values, cfg.jecs);

  std::size_t slot = 0;
  for (auto proc : procedures) {
    for (double alpha : cfg.alpha_grid) {
      SelectionResult r;
      switch (proc) {
        case Procedure::JMCS: r = jmcs_from_maxp(maxp.values, alpha); break;
        case Procedure::JECS: r = jecs_from_calibration(*jecs_cal, alpha); break;
        case Procedure::Union:
        case Procedure::Intersection: {
          const auto per_model = per_model_select(pvals, alpha, cfg.per_model);
          r = compose_naive(per_model, proc);
          break;
        }
        case Procedure::PerModelBH:
          fail(ErrorKind::Parameter, "per_model yields K selections; evaluate union or intersection instead");
      }
      TrialOutcome& o = slots[slot++];
      o.rep = rep;
      o.procedure = proc;
      o.alpha = alpha;
      o.gcp = gcp(r.selected, labels);
      o.power = power(r.selected, labels);
      o.n_selected = r.selected.size();
      if (proc == Procedure::JECS) {
        o.lambda = r.lambda;
        o.pi0_hat = r.pi0_hat;
      } else if (proc == Procedure::JMCS) {
        o.pi0_hat = 1.0;
      }
    }
  }
}

}  // namespace detail

inline ProtocolResult run_protocol(const World& world, std::span<const Procedure> procedures,
                                   const ProtocolConfig& cfg) {
  cfg.validate();
  require(!procedures.empty(), ErrorKind::Parameter, "no procedures to evaluate");
  world.test.validate();
  world.cal.validate();
  check_aligned(world.test, world.cal);
  require(world.labels.n_items() == world.test.n_items(), ErrorKind::Alignment, "labels do not match test rows");
  for (auto p : procedures)
    require(p != Procedure::PerModelBH, ErrorKind::Parameter,
            "per_model yields K selections; evaluate union or intersection instead");

  const std::size_t per_rep = procedures.size() * cfg.alpha_grid.size();
  ProtocolResult res;
  res.outcomes.resize(cfg.reps * per_rep);
  auto work = [&](std::size_t first, std::size_t stride, std::exception_ptr& err) {
    try {
      for (std::size_t rep = first; rep < cfg.reps; rep += stride)
        detail::run_repetition(world, procedures, cfg, rep,
                               std::span<TrialOutcome>(res.outcomes).subspan(rep * per_rep, per_rep));
    } catch (...) {
      err = std::current_exception();
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(cfg.parallelism, 1, cfg.reps);
  std::vector<std::exception_ptr> errors(threads);
  if (threads == 1) {
    work(0, 1, errors[0]);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads, std::ref(errors[t]));
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  res.summaries = summarize(res.outcomes, procedures, cfg.alpha_grid);
  return res;
}

// ---------------------------------------------------------------------------
// Worlds and sweeps.

enum class GeneratorKind { Synthetic, Split };

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::Synthetic;
  SyntheticConfig synthetic;
  SplitConfig split;
  double split_mu = 4.0;  // signal strength of the scores attached to split labels
};

inline World make_world(const GeneratorSpec& g) {
  if (g.kind == GeneratorKind::Synthetic) return gen_synthetic(g.synthetic);
  const auto draw = gen_split(g.split);
  return attach_scores(draw, g.split_mu, rng::derive(g.split.seed, rng::Tag::World));
}

enum class SweepAxis { Alpha, Lambda, K, Rho };

inline const char* to_string(SweepAxis a) noexcept {
  switch (a) {
    case SweepAxis::Alpha: return "alpha";
    case SweepAxis::Lambda: return "lambda";
    case SweepAxis::K: return "K";
    case SweepAxis::Rho: return "rho";
  }
  return "?";
}

inline SweepAxis parse_axis(const std::string& s) {
  if (s == "alpha") return SweepAxis::Alpha;
  if (s == "lambda") return SweepAxis::Lambda;
  if (s == "K" || s == "k") return SweepAxis::K;
  if (s == "rho") return SweepAxis::Rho;
  fail(ErrorKind::Parameter, "unknown sweep axis '" + s + "' (alpha|lambda|K|rho)");
}

struct SweepConfig {
  GeneratorSpec generator;
  ProtocolConfig protocol;
  std::vector<Procedure> procedures{Procedure::JECS};
};

/// A protocol run tagged with the sweep coordinate that produced it.
struct SweepCell {
  std::string axis = "none";
  std::string axis_value;
  ProtocolResult result;
};

inline std::vector<SweepCell> sweep(SweepAxis axis, std::span<const double> values, const SweepConfig& base) {
  require(!values.empty(), ErrorKind::Parameter, "sweep needs at least one value");
  std::vector<SweepCell> cells;
  const std::string axis_name = to_string(axis);
  auto run = [&](const SweepConfig& c, std::string value) {
    const auto world = make_world(c.generator);
    cells.push_back({axis_name, std::move(value), run_protocol(world, c.procedures, c.protocol)});
  };
  switch (axis) {
    case SweepAxis::Alpha: {
      for (double a : values) check_alpha(a);
      auto c = base;
      c.protocol.alpha_grid.assign(values.begin(), values.end());
      const auto world = make_world(c.generator);
      auto result = run_protocol(world, c.procedures, c.protocol);
      // One cell per alpha so the coordinate column is the alpha itself.
      for (double a : values) {
        SweepCell cell{axis_name, format_number(a), {}};
        for (const auto& o : result.outcomes)
          if (o.alpha == a) cell.result.outcomes.push_back(o);
        for (const auto& s : result.summaries)
          if (s.alpha == a) cell.result.summaries.push_back(s);
        cells.push_back(std::move(cell));
      }
      break;
    }
    case SweepAxis::Lambda: {
      for (double l : values) require(l > 0.0 && l < 1.0, ErrorKind::Parameter, "lambda values must lie in (0,1)");
      for (double l : values) {
        auto c = base;
        c.procedures = {Procedure::JECS};
        c.protocol.jecs.pinned_lambda = l;
        run(c, format_number(l));
      }
      // Data-driven lambda overlay row.
      auto c = base;
      c.protocol.jecs.pinned_lambda.reset();
      if (std::find(c.procedures.begin(), c.procedures.end(), Procedure::JECS) == c.procedures.end())
        c.procedures.push_back(Procedure::JECS);
      run(c, "adaptive");
      break;
    }
    case SweepAxis::K: {
      for (double k : values)
        require(k >= 1.0 && k == std::floor(k), ErrorKind::Parameter, "K values must be positive integers");
      for (double k : values) {
        auto c = base;
        c.generator.synthetic.K = static_cast<std::size_t>(k);
        c.generator.split.K = static_cast<std::size_t>(k);
        run(c, format_number(k));
      }
      break;
    }
    case SweepAxis::Rho: {
      require(base.generator.kind == GeneratorKind::Split, ErrorKind::Parameter,
              "the rho axis needs the split generator");
      for (double r : values) require(r >= 0.0 && r <= 1.0, ErrorKind::Parameter, "rho values must lie in [0,1]");
      for (double r : values) {
        auto c = base;
        c.generator.split.rho = r;
        run(c, format_number(r));
      }
      break;
    }
  }
  return cells;
}

// ---------------------------------------------------------------------------
// Assumption diagnostics.

struct AssumptionDiagnostics {
  double lambda = 0.5;
  std::size_t n_null = 0;
  std::size_t n_pure = 0;
  /// Largest midpoint-convexity violation F(x) - (F(x-h) + F(x+h)) / 2 of the
  /// empirical null CDF on an evenly spaced grid; unset if no null items.
  std::optional<double> convexity_violation;
  /// min over x in [lambda, 1] of G_pure(x) - G_null(x) (right-tail
  /// conditional CDFs); unset if either class has no tail items.
  std::optional<double> tail_dominance_margin;
};

namespace detail {

inline double ecdf(std::span<const double> sorted, double x) {
  if (sorted.empty()) return 0.0;
  return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin()) /
         static_cast<double>(sorted.size());
}

}  // namespace detail

inline double convexity_violation(std::vector<double> sample, std::size_t grid_steps = 20) {
  std::sort(sample.begin(), sample.end());
  double worst = 0.0;
  const double h = 1.0 / static_cast<double>(grid_steps);
  for (std::size_t j = 1; j < grid_steps; ++j) {
    const double x = static_cast<double>(j) * h;
    const double mid = detail::ecdf(sample, x);
    const double chord = 0.5 * (detail::ecdf(sample, x - h) + detail::ecdf(sample, x + h));
    worst = std::max(worst, mid - chord);
  }
  return worst;
}

inline std::optional<double> tail_dominance_margin(std::span<const double> null_maxp, std::span<const double> pure_maxp,
                                                   double lambda, std::size_t grid_points = 101) {
  auto tail_of = [&](std::span<const double> xs) {
    std::vector<double> t;
    for (double x : xs)
      if (x > lambda) t.push_back(x);
    std::sort(t.begin(), t.end());
    return t;
  };
  const auto t0 = tail_of(null_maxp), t1 = tail_of(pure_maxp);
  if (t0.empty() || t1.empty()) return std::nullopt;
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < grid_points; ++j) {
    const double x = lambda + (1.0 - lambda) * static_cast<double>(j) / static_cast<double>(grid_points - 1);
    margin = std::min(margin, detail::ecdf(t1, x) - detail::ecdf(t0, x));
  }
  return margin;
}

inline AssumptionDiagnostics check_assumptions(std::span<const double> null_maxp, std::span<const double> pure_maxp,
                                               double lambda) {
  require(lambda > 0.0 && lambda < 1.0, ErrorKind::Parameter, "lambda must lie in (0,1)");
  AssumptionDiagnostics d;
  d.lambda = lambda;
  d.n_null = null_maxp.size();
  d.n_pure = pure_maxp.size();
  if (!null_maxp.empty()) d.convexity_violation = convexity_violation({null_maxp.begin(), null_maxp.end()});
  d.tail_dominance_margin = tail_dominance_margin(null_maxp, pure_maxp, lambda);
  return d;
}

/// Splits the full-world maxima by ground truth and runs the diagnostics.
inline AssumptionDiagnostics check_assumptions(const World& w, double lambda) {
  const auto maxp = max_p(conformal_pvalues(w.test, w.cal));
  std::vector<double> null_p, pure_p;
  for (std::size_t i = 0; i < maxp.size(); ++i)
    (w.labels.contaminated(i) ? null_p : pure_p).push_back(maxp.values[i]);
  return check_assumptions(null_p, pure_p, lambda);
}

/// Rows (t, t^K, K t^(K-1)) on `points` evenly spaced t in [0, 1]: null CDF
/// and density of the max of K independent uniforms.
inline std::vector<std::array<double, 3>> null_reference_curves(std::size_t K, std::size_t points = 1000) {
  require(K >= 1, ErrorKind::Parameter, "K must be >= 1");
  require(points >= 2, ErrorKind::Parameter, "need at least two grid points");
  std::vector<std::array<double, 3>> rows;
  rows.reserve(points);
  const double kd = static_cast<double>(K);
  for (std::size_t i = 0; i < points; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(points - 1);
    rows.push_back({t, std::pow(t, kd), kd * std::pow(t, kd - 1.0)});
  }
  return rows;
}

}  // namespace jecs
