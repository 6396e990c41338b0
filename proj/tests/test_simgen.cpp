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

#include "jecs/simgen.hpp"

using namespace jecs;
using Catch::Matchers::WithinAbs;

TEST_CASE("synthetic defaults give 360 calibration and 840 test items") {
  const auto w = gen_synthetic(SyntheticConfig{});
  CHECK(w.cal.size() == 360);
  CHECK(w.test.n_items() == 840);
  CHECK(w.test.n_models() == 4);
  CHECK(w.labels.n_items() == 840);
  CHECK(w.test.models == default_model_ids(4));
  CHECK(w.cal.models == w.test.models);
}

TEST_CASE("synthetic world without members is entirely pure") {
  SyntheticConfig cfg;
  cfg.member_prob = 0.0;
  const auto w = gen_synthetic(cfg);
  CHECK(w.labels.count_pure() == w.labels.n_items());
}

TEST_CASE("synthetic joint purity is about 0.7^4 across seeds") {
  const double target = std::pow(0.7, 4);
  double total = 0, items = 0;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    SyntheticConfig cfg;
    cfg.seed = seed;
    const auto w = gen_synthetic(cfg);
    total += static_cast<double>(w.labels.count_pure());
    items += static_cast<double>(w.labels.n_items());
  }
  const double se = std::sqrt(target * (1 - target) / items);
  CHECK(std::abs(total / items - target) <= 3 * se);
}

TEST_CASE("synthetic scores follow the member shift") {
  SyntheticConfig cfg;
  cfg.n_pool = 20000;
  cfg.member_prob = 0.5;
  cfg.K = 1;
  const auto w = gen_synthetic(cfg);
  double sm = 0, sn = 0, nm = 0, nn = 0;
  for (std::size_t i = 0; i < w.test.n_items(); ++i) {
    if (w.labels.member(i, 0)) {
      sm += w.test.values(i, 0);
      ++nm;
    } else {
      sn += w.test.values(i, 0);
      ++nn;
    }
  }
  CHECK(std::abs((sm / nm - sn / nn) - cfg.mu) <= 3 * std::sqrt(1 / nm + 1 / nn));
  double sc = 0;
  for (double v : w.cal.values.data()) sc += v;
  CHECK(std::abs(sc / static_cast<double>(w.cal.size()) - cfg.mu) <= 3 / std::sqrt(double(w.cal.size())));
}

TEST_CASE("synthetic generation is a pure function of the seed") {
  SyntheticConfig cfg;
  const auto a = gen_synthetic(cfg), b = gen_synthetic(cfg);
  CHECK(a.test.values == b.test.values);
  CHECK(a.cal.values == b.cal.values);
  cfg.seed = 2;
  CHECK_FALSE(gen_synthetic(cfg).test.values == a.test.values);
}

TEST_CASE("synthetic parameter errors") {
  SyntheticConfig cfg;
  cfg.cal_fraction = 0.0;
  REQUIRE_ERROR_KIND(gen_synthetic(cfg), ErrorKind::Parameter);
  cfg = {};
  cfg.member_prob = 1.5;
  REQUIRE_ERROR_KIND(gen_synthetic(cfg), ErrorKind::Parameter);
  cfg = {};
  cfg.K = 0;
  REQUIRE_ERROR_KIND(gen_synthetic(cfg), ErrorKind::Parameter);
}

TEST_CASE("split block sizes for the 789-item pool") {
  const SplitConfig cfg;
  CHECK(cfg.n_clean() == 236);
  CHECK(cfg.n_cal() == 236);
  CHECK(cfg.n_remainder() == 317);
  CHECK(std::abs(static_cast<long>(cfg.members_per_model()) - 39) <= 1);
  const auto d = gen_split(cfg);
  CHECK(d.calibration.size() == 236);
  CHECK(d.test_indices().size() == 553);
  for (std::size_t k = 0; k < cfg.K; ++k) {
    std::size_t members = 0;
    for (auto i : d.test_indices()) members += d.labels.member(i, k);
    CHECK(members == cfg.members_per_model());
  }
}

TEST_CASE("split blocks partition the pool") {
  const auto d = gen_split(SplitConfig{});
  std::vector<int> seen(789, 0);
  for (auto i : d.clean) ++seen[i];
  for (auto i : d.calibration) ++seen[i];
  for (auto i : d.remainder) ++seen[i];
  for (int s : seen) CHECK(s == 1);
  for (auto i : d.clean) CHECK(d.labels.jointly_pure(i));
  for (auto i : d.calibration)
    for (std::size_t k = 0; k < 16; ++k) CHECK(d.labels.member(i, k));
}

TEST_CASE("split with rho=0 has no contamination in the test set") {
  SplitConfig cfg;
  cfg.rho = 0.0;
  const auto w = attach_scores(gen_split(cfg), 4.0, 1);
  CHECK(w.labels.count_pure() == w.labels.n_items());
}

TEST_CASE("split remainder purity is about (1-rho)^K") {
  const SplitConfig base;
  const double target = std::pow(1 - base.rho, 16);
  double pure = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    SplitConfig cfg;
    cfg.seed = seed;
    const auto d = gen_split(cfg);
    for (auto i : d.remainder) pure += d.labels.jointly_pure(i);
    total += static_cast<double>(d.remainder.size());
  }
  // Within-draw counts are negatively dependent (fixed member counts), so
  // the binomial s.e. is conservative.
  CHECK(std::abs(pure / total - target) <= 3 * std::sqrt(target * (1 - target) / total));
}

TEST_CASE("split parameter errors") {
  SplitConfig cfg;
  cfg.a = 0.6;
  cfg.b = 0.5;
  REQUIRE_ERROR_KIND(gen_split(cfg), ErrorKind::Parameter);
  cfg = {};
  cfg.n_pool = 3;
  REQUIRE_ERROR_KIND(gen_split(cfg), ErrorKind::Parameter);
  cfg = {};
  cfg.rho = 1.5;
  REQUIRE_ERROR_KIND(gen_split(cfg), ErrorKind::Parameter);
}

TEST_CASE("attached scores") {
  MembershipLabels none{Matrix<std::uint8_t>(5000, 2, 0)};
  const auto a = attach_scores(none, 0.0, 1);
  MembershipLabels all{Matrix<std::uint8_t>(5000, 2, 1)};
  const auto b = attach_scores(all, 0.0, 1);
  CHECK(a == b);  // mu = 0: labels do not matter
  const auto c = attach_scores(all, 4.0, 1);
  double s = 0, s2 = 0;
  for (double v : c.data()) {
    s += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(c.data().size());
  CHECK(std::abs(s / n - 4.0) <= 3 / std::sqrt(n));
  // E[X^2] = mu^2 + 1, Var[X^2] = 4 mu^2 + 2 for X ~ N(mu, 1).
  CHECK(std::abs(s2 / n - 17.0) <= 4 * std::sqrt(66.0 / n));
}

TEST_CASE("split world views") {
  const auto d = gen_split(SplitConfig{});
  const auto w = attach_scores(d, 4.0, 9);
  CHECK(w.test.n_items() == 553);
  CHECK(w.cal.size() == 236);
  CHECK(w.blocks.front() == "clean");
  CHECK(w.blocks.back() == "remainder");
  CHECK(w.test.items.front() == "item_" + std::to_string(d.clean.front()));
}

TEST_CASE("copula null special cases") {
  for (double x : {0.1, 0.5, 0.9}) {
    CHECK(copula_null_cdf(x, 1.0, 4) == x);
    CHECK(copula_null_cdf(x, 0.0, 1) == x);
  }
  CHECK_THAT(copula_null_cdf(0.5, 0.5, 4), WithinAbs(0.28125, 1e-15));
}

TEST_CASE("copula null empirical CDF") {
  CopulaNullConfig cfg;
  cfg.eta = 0.5;
  cfg.c = 4;
  cfg.n = 100000;
  const auto xs = gen_copula_null(cfg);
  for (double x : {0.2, 0.5, 0.8}) {
    double frac = 0;
    for (double v : xs) frac += v <= x;
    frac /= static_cast<double>(xs.size());
    const double F = copula_null_cdf(x, 0.5, 4);
    CHECK(std::abs(frac - F) <= 3 * std::sqrt(F * (1 - F) / static_cast<double>(xs.size())));
  }
  cfg.eta = 2.0;
  REQUIRE_ERROR_KIND(gen_copula_null(cfg), ErrorKind::Parameter);
}

TEST_CASE("labels CSV") {
  SyntheticConfig cfg;
  cfg.n_pool = 10;
  cfg.K = 2;
  const auto w = gen_synthetic(cfg);
  std::ostringstream os;
  write_labels_csv(os, w);
  const auto text = os.str();
  CHECK(text.rfind("item_id,block,M_1,M_2\ntest_0,test,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 7);
}
