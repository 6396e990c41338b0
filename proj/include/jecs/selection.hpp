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

// Selection rules: BH / Storey-BH step-up, per-model conformal selection and
// its naive union/intersection composition, the max-p baseline (JMCS) and
// the envelope-rescaled Storey-BH procedure (JECS).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "jecs/conformal.hpp"
#include "jecs/envelope.hpp"
#include "jecs/error.hpp"
#include "jecs/score_matrix.hpp"

namespace jecs {

enum class Procedure { PerModelBH, JMCS, JECS, Union, Intersection };

inline const char* to_string(Procedure p) noexcept {
  switch (p) {
    case Procedure::PerModelBH: return "per_model";
    case Procedure::JMCS: return "jmcs";
    case Procedure::JECS: return "jecs";
    case Procedure::Union: return "union";
    case Procedure::Intersection: return "intersection";
  }
  return "?";
}

inline Procedure parse_procedure(const std::string& s) {
  if (s == "per_model" || s == "per-model") return Procedure::PerModelBH;
  if (s == "jmcs") return Procedure::JMCS;
  if (s == "jecs") return Procedure::JECS;
  if (s == "union") return Procedure::Union;
  if (s == "intersection") return Procedure::Intersection;
  fail(ErrorKind::Parameter, "unknown procedure '" + s + "' (per_model|jmcs|jecs|union|intersection)");
}

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kPi0Floor = 1e-6;

struct SelectionResult {
  Procedure procedure = Procedure::JMCS;
  std::vector<std::size_t> selected;  // ascending item indices
  std::size_t r_star = 0;
  double threshold = 0.0;  // effective cutoff on the (transformed) p scale
  double pi0_hat = 1.0;
  double alpha = 0.0;
  double lambda = kNaN;            // JECS only
  bool envelope_fallback = false;  // JECS degraded to JMCS
  std::optional<std::size_t> model;  // per-model results only
};

inline void check_alpha(double alpha) {
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::Parameter, "alpha must lie in (0,1)");
}

/// Step-up rule: r* = max{r : p_(r) <= alpha r / (pi0 n)}, selected =
/// {i : p_i <= alpha r* / (pi0 n)}. pi0 = 1 is plain BH.
inline SelectionResult bh_select(std::span<const double> p, double alpha, double pi0 = 1.0) {
  check_alpha(alpha);
  require(pi0 > 0.0 && std::isfinite(pi0), ErrorKind::Parameter, "pi0 must be positive and finite");
  require(!p.empty(), ErrorKind::Parameter, "no p-values to select from");
  for (double v : p) require(v >= 0.0 && v <= 1.0, ErrorKind::Domain, "p-value outside [0,1]");

  const std::size_t n = p.size();
  const double scale = pi0 * static_cast<double>(n);
  std::vector<double> sorted(p.begin(), p.end());
  std::sort(sorted.begin(), sorted.end());

  std::size_t r_star = 0;
  for (std::size_t r = n; r >= 1; --r) {
    if (sorted[r - 1] <= alpha * static_cast<double>(r) / scale) {
      r_star = r;
      break;
    }
  }
  SelectionResult res;
  res.alpha = alpha;
  res.pi0_hat = pi0;
  res.r_star = r_star;
  res.threshold = alpha * static_cast<double>(r_star) / scale;
  if (r_star > 0)
    for (std::size_t i = 0; i < n; ++i)
      if (p[i] <= res.threshold) res.selected.push_back(i);
  return res;
}

/// Storey's null-proportion estimate #{p > lambda} / (n (1 - lambda)),
/// floored at kPi0Floor.
inline double storey_pi0(std::span<const double> p, double lambda = 0.5) {
  require(lambda > 0.0 && lambda < 1.0, ErrorKind::Parameter, "Storey lambda must lie in (0,1)");
  require(!p.empty(), ErrorKind::Parameter, "no p-values");
  const auto above = std::count_if(p.begin(), p.end(), [&](double v) { return v > lambda; });
  return std::max(kPi0Floor, static_cast<double>(above) / (static_cast<double>(p.size()) * (1.0 - lambda)));
}

/// Null proportion on the envelope scale: the tail fraction divided by the
/// envelope mass above lambda, floored at kPi0Floor.
inline double envelope_pi0(double fraction_above, double anchor) {
  require(anchor < 1.0, ErrorKind::Domain, "envelope anchor must be < 1");
  return std::max(kPi0Floor, fraction_above / (1.0 - anchor));
}

enum class PerModelPi0 { One, Storey };

struct PerModelOptions {
  PerModelPi0 pi0 = PerModelPi0::One;
  double storey_lambda = 0.5;
};

inline std::vector<SelectionResult> per_model_select(const PValueMatrix& p, double alpha,
                                                     const PerModelOptions& opts = {}) {
  std::vector<SelectionResult> out;
  out.reserve(p.n_models());
  for (std::size_t k = 0; k < p.n_models(); ++k) {
    const auto col = p.values.column(k);
    const double pi0 = opts.pi0 == PerModelPi0::Storey ? storey_pi0(col, opts.storey_lambda) : 1.0;
    auto r = bh_select(col, alpha, pi0);
    r.procedure = Procedure::PerModelBH;
    r.model = k;
    out.push_back(std::move(r));
  }
  return out;
}

/// Union or intersection of per-model selections. Demonstrates why naive
/// composition does not control the global contamination rate.
inline SelectionResult compose_naive(std::span<const SelectionResult> per_model, Procedure mode) {
  require(!per_model.empty(), ErrorKind::Parameter, "nothing to compose");
  require(mode == Procedure::Union || mode == Procedure::Intersection, ErrorKind::Parameter,
          "composition mode must be union or intersection");
  std::vector<std::size_t> acc = per_model.front().selected;
  for (std::size_t k = 1; k < per_model.size(); ++k) {
    const auto& next = per_model[k].selected;
    std::vector<std::size_t> merged;
    if (mode == Procedure::Union)
      std::set_union(acc.begin(), acc.end(), next.begin(), next.end(), std::back_inserter(merged));
    else
      std::set_intersection(acc.begin(), acc.end(), next.begin(), next.end(), std::back_inserter(merged));
    acc = std::move(merged);
  }
  SelectionResult res;
  res.procedure = mode;
  res.alpha = per_model.front().alpha;
  res.selected = std::move(acc);
  res.r_star = res.selected.size();
  res.threshold = kNaN;
  res.pi0_hat = 1.0;
  return res;
}

inline SelectionResult jmcs_from_maxp(std::span<const double> maxp, double alpha) {
  auto r = bh_select(maxp, alpha, 1.0);
  r.procedure = Procedure::JMCS;
  return r;
}

inline SelectionResult jmcs_select(const ScoreMatrix& test, const CalibrationScores& cal, double alpha) {
  check_alpha(alpha);
  return jmcs_from_maxp(max_p(conformal_pvalues(test, cal)).values, alpha);
}

struct JecsOptions {
  std::vector<double> lambda_grid = default_lambda_grid();
  /// Bypasses the data-driven lambda rule when set.
  std::optional<double> pinned_lambda;
  TailOptions tail;
};

/// Everything JECS derives from the maxima before the alpha-dependent
/// step-up. lambda is chosen without reference to alpha, so one calibration
/// serves a whole alpha grid.
struct JecsCalibration {
  bool fallback = false;
  double lambda = kNaN;
  std::optional<EnvelopeFit> fit;
  std::vector<double> transformed;
  double pi0_hat = 1.0;
};

inline JecsCalibration jecs_calibrate(std::span<const double> maxp, const JecsOptions& opts = {}) {
  JecsCalibration cal;
  try {
    if (opts.pinned_lambda) {
      cal.fit.emplace(fit_envelope(maxp, *opts.pinned_lambda, opts.tail));
    } else {
      auto choice = select_lambda(maxp, opts.lambda_grid, opts.tail);
      cal.fit.emplace(std::move(choice.fit));
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::InsufficientTail) throw;
    // Degrade to the always-valid max-p baseline: identity envelope, pi0 = 1.
    cal.fallback = true;
    cal.transformed.assign(maxp.begin(), maxp.end());
    cal.pi0_hat = 1.0;
    return cal;
  }
  cal.lambda = cal.fit->lambda();
  cal.transformed.reserve(maxp.size());
  for (double p : maxp) cal.transformed.push_back(cal.fit->evaluate(p));
  const double above = static_cast<double>(cal.fit->tail().m_r) / static_cast<double>(maxp.size());
  cal.pi0_hat = envelope_pi0(above, cal.fit->anchor());
  return cal;
}

inline SelectionResult jecs_from_calibration(const JecsCalibration& cal, double alpha) {
  auto r = bh_select(cal.transformed, alpha, cal.pi0_hat);
  r.procedure = Procedure::JECS;
  r.lambda = cal.lambda;
  r.envelope_fallback = cal.fallback;
  return r;
}

inline SelectionResult jecs_select(const ScoreMatrix& test, const CalibrationScores& cal, double alpha,
                                   const JecsOptions& opts = {}) {
  check_alpha(alpha);
  const auto maxp = max_p(conformal_pvalues(test, cal));
  return jecs_from_calibration(jecs_calibrate(maxp.values, opts), alpha);
}

// JSON: {procedure, alpha, lambda, pi0_hat, r_star, threshold, selected:[item_id...]}
// NaN fields are emitted as null.

inline nlohmann::json to_json(const SelectionResult& r, std::span<const std::string> item_ids,
                              std::span<const std::string> model_ids = {}) {
  auto num = [](double v) -> nlohmann::json { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  nlohmann::json j;
  j["procedure"] = to_string(r.procedure);
  j["alpha"] = r.alpha;
  j["lambda"] = num(r.lambda);
  j["pi0_hat"] = num(r.pi0_hat);
  j["r_star"] = r.r_star;
  j["threshold"] = num(r.threshold);
  nlohmann::json sel = nlohmann::json::array();
  for (auto i : r.selected) sel.push_back(i < item_ids.size() ? item_ids[i] : std::to_string(i));
  j["selected"] = std::move(sel);
  if (r.procedure == Procedure::JECS) j["envelope_fallback"] = r.envelope_fallback;
  if (r.model) j["model"] = *r.model < model_ids.size() ? model_ids[*r.model] : std::to_string(*r.model);
  return j;
}

}  // namespace jecs
