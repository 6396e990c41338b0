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

#include <cmath>
#include <sstream>

#include "test_util.hpp"

#include "jecs/envelope.hpp"
#include "jecs/rng.hpp"
#include "jecs/simgen.hpp"

using namespace jecs;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<double> uniforms(std::uint64_t seed, std::size_t n) {
  rng::Stream s(rng::derive(seed, rng::Tag::Sweep, 77));
  std::vector<double> out(n);
  for (auto& v : out) v = s.uniform();
  return out;
}

TailOptions fixed_k(std::size_t k) {
  TailOptions o;
  o.fixed_k = k;
  return o;
}

// Builds a tail of m_r values above 0.5 whose 10th smallest is 0.55.
std::vector<double> tail_with_tenth_at(double tenth, std::size_t m_r) {
  std::vector<double> v;
  for (std::size_t i = 0; i < 9; ++i) v.push_back(0.5 + (tenth - 0.5) * (i + 1) / 10.0);
  v.push_back(tenth);
  while (v.size() < m_r) v.push_back(0.9);
  for (int i = 0; i < 50; ++i) v.push_back(0.2);  // below lambda, ignored by the tail
  return v;
}

}  // namespace

TEST_CASE("kNN boundary density by substitution") {
  const auto data = tail_with_tenth_at(0.55, 100);
  const auto t = estimate_tail(data, 0.5, fixed_k(10));
  CHECK(t.m_r == 100);
  CHECK(t.k_n == 10);
  CHECK_THAT(t.g_hat, WithinAbs(2.0, 1e-9));
}

TEST_CASE("kNN density with a single gap") {
  std::vector<double> data(7, 1.0);
  const auto t = estimate_tail(data, 0.5, fixed_k(1));
  CHECK_THAT(t.g_hat, WithinAbs(1.0 / (7 * 0.5), 1e-12));
}

TEST_CASE("kNN density for uniform data approaches 1/(1-lambda)") {
  const auto data = uniforms(1, 100000);
  const auto t = estimate_tail(data, 0.5);
  CHECK(std::abs(t.g_hat - 2.0) / 2.0 <= 0.10);
}

TEST_CASE("k_n rule") {
  TailOptions o;
  CHECK(knn_count(1, o) == 1);
  CHECK(knn_count(100, o) == static_cast<std::size_t>(std::ceil(std::pow(100.0, 0.8))));
  o.knn_exponent = 0.5;
  CHECK(knn_count(100, o) == 10);
  CHECK(knn_count(101, o) == 11);
  CHECK(knn_count(5, fixed_k(9)) == 5);
}

TEST_CASE("tail errors") {
  std::vector<double> thin{0.1, 0.2, 0.6, 0.7};
  REQUIRE_ERROR_KIND(estimate_tail(thin, 0.5), ErrorKind::InsufficientTail);
  REQUIRE_ERROR_KIND(estimate_tail(thin, 1.0), ErrorKind::Parameter);
  TailOptions bad;
  bad.knn_exponent = 1.0;
  REQUIRE_ERROR_KIND(estimate_tail(uniforms(2, 100), 0.5, bad), ErrorKind::Parameter);
}

TEST_CASE("k-th neighbour sitting on lambda widens the neighbourhood") {
  // On the p-value lattice a value can equal lambda only from above when
  // the comparison is strict; feed values just above lambda instead.
  std::vector<double> data{0.5 + 1e-13, 0.5 + 1e-13, 0.6, 0.7, 0.8, 0.9};
  const auto t = estimate_tail(data, 0.5, fixed_k(1));
  CHECK(t.k_n == 3);
  CHECK_THAT(t.g_hat, WithinAbs(3.0 / (6 * 0.1), 1e-9));
}

TEST_CASE("anchor by substitution") {
  TailEstimate t;
  t.lambda = 0.5;
  t.g_hat = 2.0;
  CHECK_THAT(EnvelopeFit(t).anchor(), WithinAbs(0.5, 1e-15));
  t.lambda = 0.8;
  t.g_hat = 5.0;
  CHECK_THAT(EnvelopeFit(t).anchor(), WithinAbs(0.8, 1e-15));
  t.g_hat = 0.0;
  const EnvelopeFit zero(t);
  CHECK(zero.anchor() == 0.0);
  CHECK(zero(0.3) == 0.0);
  CHECK(zero(0.79) == 0.0);
}

TEST_CASE("envelope evaluation on both branches") {
  TailEstimate t;
  t.lambda = 0.5;
  t.g_hat = 2.0;
  t.tail_sorted = {0.6, 0.7, 0.8, 0.9};
  t.m_r = 4;
  const EnvelopeFit fit(t);
  CHECK_THAT(fit(0.25), WithinAbs(0.25, 1e-15));
  CHECK(fit(0.5) == fit.anchor());
  CHECK_THAT(fit(0.75), WithinAbs(0.75, 1e-15));  // G_n = 0.5
  CHECK(fit(1.0) == 1.0);
  CHECK(fit(0.0) == 0.0);
  REQUIRE_ERROR_KIND(fit(1.5), ErrorKind::Domain);
  REQUIRE_ERROR_KIND(fit(-0.1), ErrorKind::Domain);
  CHECK(envelope_eval(fit, 0.25) == fit(0.25));
}

TEST_CASE("left slope equals g/(1+lambda g)") {
  const auto data = uniforms(3, 5000);
  for (double lambda : default_lambda_grid()) {
    const auto fit = fit_envelope(data, lambda);
    CHECK_THAT(fit.left_slope(), WithinAbs(left_branch_slope(lambda, fit.tail().g_hat), 1e-12));
  }
}

TEST_CASE("envelope is a monotone CDF on [0,1]") {
  rng::Stream s(rng::derive(4, rng::Tag::Sweep));
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> data(500);
    const int K = 1 + static_cast<int>(s.below(6));
    for (auto& v : data) {
      double m = 0;
      for (int k = 0; k < K; ++k) m = std::max(m, s.uniform());
      v = m;
    }
    const auto fit = fit_envelope(data, 0.5 + 0.1 * static_cast<double>(s.below(5)));
    double prev = 0.0;
    for (int i = 0; i <= 1000; ++i) {
      const double v = fit(i / 1000.0);
      CHECK(v >= prev);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      prev = v;
    }
    CHECK(fit(1.0) == 1.0);
  }
}

TEST_CASE("lambda selection with constant density picks the largest lambda") {
  // Survival exp(-2x) has hazard 2 everywhere, so g_hat is about 2 at every
  // grid point and the slope 2/(1+2 lambda) falls with lambda.
  std::vector<double> data;
  const int n = 100000;
  for (int i = 0; i < n; ++i) data.push_back(std::min(1.0, -std::log(1.0 - (i + 0.5) / n) / 2.0));
  TailOptions o;
  o.knn_exponent = 0.5;
  const auto grid = default_lambda_grid();
  for (double lambda : grid) CHECK_THAT(estimate_tail(data, lambda, o).g_hat, WithinAbs(2.0, 0.05));
  CHECK(select_lambda(data, grid, o).lambda == 0.9);
}

TEST_CASE("single-point grid") {
  const std::vector<double> grid{0.5};
  CHECK(select_lambda(uniforms(5, 300), grid).lambda == 0.5);
}

TEST_CASE("lambda selection matches an exhaustive scan") {
  rng::Stream s(rng::derive(6, rng::Tag::Sweep));
  const auto grid = default_lambda_grid();
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<double> data(200 + s.below(800));
    const double eta = s.uniform();
    for (auto& v : data) v = s.bernoulli(eta) ? s.uniform() : std::max(s.uniform(), std::max(s.uniform(), s.uniform()));
    double best_lambda = -1, best_slope = 1e300;
    for (double lambda : grid) {
      const auto t = estimate_tail(data, lambda);
      const double slope = t.lambda * t.g_hat / (1 + t.lambda * t.g_hat) / t.lambda;
      if (slope <= best_slope) {
        best_slope = slope;
        best_lambda = lambda;
      }
    }
    const auto choice = select_lambda(data, grid);
    CHECK(choice.lambda == best_lambda);
    CHECK_THAT(choice.fit.left_slope(), WithinAbs(best_slope, 1e-12));
  }
}

TEST_CASE("lambda selection skips thin tails and fails when all are thin") {
  std::vector<double> data(100, 0.3);
  for (int i = 0; i < 6; ++i) data.push_back(0.65 + 0.01 * i);  // 6 above 0.5 and 0.6, none above 0.7
  const auto grid = default_lambda_grid();
  const auto c = select_lambda(data, grid);
  CHECK((c.lambda == 0.5 || c.lambda == 0.6));
  std::vector<double> none(100, 0.3);
  REQUIRE_ERROR_KIND(select_lambda(none, grid), ErrorKind::InsufficientTail);
  const std::vector<double> empty_grid;
  REQUIRE_ERROR_KIND(select_lambda(data, empty_grid), ErrorKind::Parameter);
}

TEST_CASE("transform matches element-wise evaluation and preserves order") {
  auto data = uniforms(7, 1000);
  const auto fit = fit_envelope(data, 0.7);
  const auto out = transform_pvalues(fit, data);
  for (std::size_t i = 0; i < data.size(); ++i) CHECK(out[i] == envelope_eval(fit, data[i]));
  std::vector<double> sorted = data;
  std::sort(sorted.begin(), sorted.end());
  const auto mono = transform_pvalues(fit, sorted);
  CHECK(std::is_sorted(mono.begin(), mono.end()));
}

TEST_CASE("near-identity envelope for uniform data") {
  const auto data = uniforms(8, 100000);
  const auto fit = fit_envelope(data, 0.5);
  for (double x : {0.1, 0.3, 0.6, 0.8, 0.95}) CHECK_THAT(fit(x), WithinAbs(x, 0.02));
}

TEST_CASE("envelope dominates the copula null") {
  for (double eta : {0.0, 0.5, 1.0})
    for (std::size_t c : {2u, 4u, 8u}) {
      CopulaNullConfig cfg;
      cfg.eta = eta;
      cfg.c = c;
      cfg.n = 10000;
      cfg.seed = 3;
      const auto null = gen_copula_null(cfg);
      const auto grid = default_lambda_grid();
      const auto fit = select_lambda(null, grid).fit;
      double worst = -1.0;
      for (int i = 0; i < 200; ++i) {
        const double x = (i + 0.5) / 200.0;
        worst = std::max(worst, copula_null_cdf(x, eta, c) - fit(x));
      }
      INFO("eta=" << eta << " c=" << c);
      CHECK(worst <= 0.03);
    }
}

TEST_CASE("envelope CSV has the requested resolution") {
  const auto fit = fit_envelope(uniforms(9, 500), 0.5);
  std::ostringstream os;
  write_envelope_csv(os, fit, 11);
  const auto text = os.str();
  CHECK(text.rfind("x,F_fit\n0,0\n0.1,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 12);
  CHECK(text.find("\n1,1\n") != std::string::npos);
}
