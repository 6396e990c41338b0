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

// Conservative envelope of the null CDF of the max-p statistic, rebuilt from
// the right tail {p* > lambda}:
//
//   F_fit(x) = (anchor / lambda) * x                    for x <= lambda
//            = anchor + (1 - anchor) * G_n(x)            for x >  lambda
//   anchor   = lambda * g / (1 + lambda * g)
//
// where g is a kNN estimate of the right-boundary density of the tail and
// G_n is the empirical CDF of the tail sample.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "jecs/conformal.hpp"
#include "jecs/error.hpp"
#include "jecs/format.hpp"

namespace jecs {

struct TailOptions {
  /// k_n = max(1, ceil(m_R ^ knn_exponent)); must lie in (0, 1) so that
  /// k_n -> inf and k_n / m_R -> 0.
  double knn_exponent = 0.8;
  /// Minimum number of maxima strictly above lambda.
  std::size_t min_tail = 5;
  /// Overrides the k_n rule when set.
  std::optional<std::size_t> fixed_k;
};

inline std::vector<double> default_lambda_grid() { return {0.5, 0.6, 0.7, 0.8, 0.9}; }

struct TailEstimate {
  double lambda = 0.5;
  std::size_t m_r = 0;
  std::size_t k_n = 0;
  double g_hat = 0.0;
  std::vector<double> tail_sorted;  // ascending, all > lambda

  /// G_n(x) = #{tail <= x} / m_R; zero at and below lambda.
  double tail_cdf(double x) const {
    if (m_r == 0 || x <= lambda) return 0.0;
    const auto c = std::upper_bound(tail_sorted.begin(), tail_sorted.end(), x) - tail_sorted.begin();
    return static_cast<double>(c) / static_cast<double>(m_r);
  }
};

inline std::size_t knn_count(std::size_t m_r, const TailOptions& opts) {
  if (opts.fixed_k) return std::clamp<std::size_t>(*opts.fixed_k, 1, std::max<std::size_t>(m_r, 1));
  const double k = std::ceil(std::pow(static_cast<double>(m_r), opts.knn_exponent));
  return std::clamp<std::size_t>(static_cast<std::size_t>(k), 1, std::max<std::size_t>(m_r, 1));
}

inline TailEstimate estimate_tail(std::span<const double> maxp, double lambda, const TailOptions& opts = {}) {
  require(lambda > 0.0 && lambda < 1.0, ErrorKind::Parameter, "lambda must lie in (0,1)");
  require(opts.knn_exponent > 0.0 && opts.knn_exponent < 1.0, ErrorKind::Parameter,
          "knn_exponent must lie in (0,1)");
  TailEstimate t;
  t.lambda = lambda;
  for (double p : maxp)
    if (p > lambda) t.tail_sorted.push_back(p);
  std::sort(t.tail_sorted.begin(), t.tail_sorted.end());
  t.m_r = t.tail_sorted.size();
  require(t.m_r >= std::max<std::size_t>(opts.min_tail, 1), ErrorKind::InsufficientTail,
          std::to_string(t.m_r) + " maxima above lambda=" + format_number(lambda) + ", need " +
              std::to_string(opts.min_tail));
  std::size_t k = knn_count(t.m_r, opts);
  // On the discrete p-lattice the k-th neighbour can sit on lambda itself;
  // widen the neighbourhood until the gap is positive.
  while (k <= t.m_r && t.tail_sorted[k - 1] <= lambda + 1e-12) ++k;
  require(k <= t.m_r, ErrorKind::InsufficientTail, "no tail value separated from lambda");
  t.k_n = k;
  t.g_hat = static_cast<double>(k) / (static_cast<double>(t.m_r) * (t.tail_sorted[k - 1] - lambda));
  return t;
}

inline TailEstimate estimate_tail(const MaxPVector& maxp, double lambda, const TailOptions& opts = {}) {
  return estimate_tail(std::span<const double>(maxp.values), lambda, opts);
}

class EnvelopeFit {
 public:
  EnvelopeFit() = default;

  explicit EnvelopeFit(TailEstimate tail) : tail_(std::move(tail)) {
    require(tail_.g_hat >= 0.0 && std::isfinite(tail_.g_hat), ErrorKind::Domain, "g_hat must be finite and >= 0");
    const double lg = tail_.lambda * tail_.g_hat;
    anchor_ = lg / (1.0 + lg);
    left_slope_ = anchor_ / tail_.lambda;
  }

  double lambda() const noexcept { return tail_.lambda; }
  double anchor() const noexcept { return anchor_; }
  double left_slope() const noexcept { return left_slope_; }
  const TailEstimate& tail() const noexcept { return tail_; }

  /// F_fit(x) without the domain check, for hot loops over valid p-values.
  double evaluate(double x) const noexcept {
    const double v = x <= tail_.lambda ? left_slope_ * x : anchor_ + (1.0 - anchor_) * tail_.tail_cdf(x);
    return std::clamp(v, 0.0, 1.0);
  }

  double operator()(double x) const {
    require(x >= 0.0 && x <= 1.0, ErrorKind::Domain, "envelope argument " + format_number(x) + " outside [0,1]");
    return evaluate(x);
  }

 private:
  TailEstimate tail_;
  double anchor_ = 0.0;
  double left_slope_ = 0.0;
};

inline EnvelopeFit fit_envelope(std::span<const double> maxp, double lambda, const TailOptions& opts = {}) {
  return EnvelopeFit(estimate_tail(maxp, lambda, opts));
}

inline EnvelopeFit fit_envelope(const MaxPVector& maxp, double lambda, const TailOptions& opts = {}) {
  return fit_envelope(std::span<const double>(maxp.values), lambda, opts);
}

inline double envelope_eval(const EnvelopeFit& fit, double x) { return fit(x); }

/// Left-branch slope g / (1 + lambda g), the quantity minimized over the grid.
inline double left_branch_slope(double lambda, double g_hat) { return g_hat / (1.0 + lambda * g_hat); }

struct LambdaChoice {
  double lambda = std::numeric_limits<double>::quiet_NaN();
  EnvelopeFit fit;
};

/// Grid lambda with the smallest fitted left-branch slope. Grid points whose
/// tail is too thin are skipped; exact ties go to the larger lambda.
inline LambdaChoice select_lambda(std::span<const double> maxp, std::span<const double> grid,
                                  const TailOptions& opts = {}) {
  require(!grid.empty(), ErrorKind::Parameter, "lambda grid is empty");
  std::optional<LambdaChoice> best;
  double best_slope = std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    std::optional<EnvelopeFit> fit;
    try {
      fit.emplace(fit_envelope(maxp, lambda, opts));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::InsufficientTail) throw;
      continue;
    }
    const double slope = fit->left_slope();
    if (!best || slope < best_slope || (slope == best_slope && lambda > best->lambda)) {
      best_slope = slope;
      best = LambdaChoice{lambda, std::move(*fit)};
    }
  }
  require(best.has_value(), ErrorKind::InsufficientTail, "no grid lambda has enough tail observations");
  return std::move(*best);
}

inline LambdaChoice select_lambda(const MaxPVector& maxp, std::span<const double> grid, const TailOptions& opts = {}) {
  return select_lambda(std::span<const double>(maxp.values), grid, opts);
}

inline std::vector<double> transform_pvalues(const EnvelopeFit& fit, std::span<const double> maxp) {
  std::vector<double> out;
  out.reserve(maxp.size());
  for (double p : maxp) out.push_back(fit(p));
  return out;
}

inline std::vector<double> transform_pvalues(const EnvelopeFit& fit, const MaxPVector& maxp) {
  return transform_pvalues(fit, std::span<const double>(maxp.values));
}

/// `x,F_fit` on an evenly spaced grid over [0,1] (endpoints included).
inline void write_envelope_csv(std::ostream& os, const EnvelopeFit& fit, std::size_t points = 1000) {
  os << "x,F_fit\n";
  for (std::size_t i = 0; i < points; ++i) {
    const double x = points == 1 ? 1.0 : static_cast<double>(i) / static_cast<double>(points - 1);
    os << format_number(x) << ',' << format_number(fit.evaluate(x)) << '\n';
  }
}

}  // namespace jecs
