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

// Ground-truth-labeled synthetic worlds:
//  - a Gaussian score model T = mu * M + N(0,1) with Bernoulli memberships,
//  - the clean / calibration / remainder three-block contamination split,
//  - the copula null family with max-p CDF eta x + (1 - eta) x^c.

#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "jecs/error.hpp"
#include "jecs/format.hpp"
#include "jecs/matrix.hpp"
#include "jecs/rng.hpp"
#include "jecs/score_matrix.hpp"

namespace jecs {

/// M_i^k: item i is in the training data of model k.
struct MembershipLabels {
  Matrix<std::uint8_t> values;

  std::size_t n_items() const noexcept { return values.rows(); }
  std::size_t n_models() const noexcept { return values.cols(); }

  bool member(std::size_t i, std::size_t k) const { return values(i, k) != 0; }

  bool contaminated(std::size_t i) const {
    for (auto v : values.row(i))
      if (v) return true;
    return false;
  }
  bool jointly_pure(std::size_t i) const { return !contaminated(i); }

  std::size_t count_pure() const {
    std::size_t c = 0;
    for (std::size_t i = 0; i < n_items(); ++i) c += jointly_pure(i) ? 1 : 0;
    return c;
  }

  MembershipLabels select_rows(std::span<const std::size_t> idx) const { return {values.select_rows(idx)}; }
};

inline std::vector<std::string> default_model_ids(std::size_t K) {
  std::vector<std::string> ids;
  for (std::size_t k = 0; k < K; ++k) ids.push_back("model_" + std::to_string(k + 1));
  return ids;
}

/// A labeled world: test scores, shared calibration scores and the test
/// items' membership labels (rows aligned with `test`).
struct World {
  ScoreMatrix test;
  CalibrationScores cal;
  MembershipLabels labels;
  std::vector<std::string> blocks;  // per test item: "clean", "remainder" or "test"
};

struct SyntheticConfig {
  std::size_t n_pool = 1200;
  double cal_fraction = 0.30;
  std::size_t K = 4;
  double member_prob = 0.30;
  double mu = 4.0;
  std::uint64_t seed = 1;

  std::size_t n_cal() const { return static_cast<std::size_t>(std::floor(cal_fraction * static_cast<double>(n_pool))); }

  void validate() const {
    require(cal_fraction > 0.0 && cal_fraction < 1.0, ErrorKind::Parameter, "cal_fraction must lie in (0,1)");
    require(member_prob >= 0.0 && member_prob <= 1.0, ErrorKind::Parameter, "member_prob must lie in [0,1]");
    require(K >= 1, ErrorKind::Parameter, "K must be >= 1");
    require(std::isfinite(mu), ErrorKind::Parameter, "mu must be finite");
    require(n_cal() >= 1 && n_cal() < n_pool, ErrorKind::Parameter,
            "cal_fraction * n_pool must leave non-empty calibration and test blocks");
  }
};

inline World gen_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  const std::size_t m = cfg.n_cal();
  const std::size_t n = cfg.n_pool - m;
  World w;
  w.test.models = default_model_ids(cfg.K);
  w.cal.models = w.test.models;
  w.cal.values = Matrix<double>(m, cfg.K);
  w.test.values = Matrix<double>(n, cfg.K);
  w.labels.values = Matrix<std::uint8_t>(n, cfg.K);
  for (std::size_t i = 0; i < n; ++i) w.test.items.push_back("test_" + std::to_string(i));
  w.blocks.assign(n, "test");
  for (std::size_t k = 0; k < cfg.K; ++k) {
    rng::Stream cal_rng(rng::derive(cfg.seed, rng::Tag::CalScores, k));
    for (std::size_t l = 0; l < m; ++l) w.cal.values(l, k) = cfg.mu + cal_rng.normal();
    rng::Stream label_rng(rng::derive(cfg.seed, rng::Tag::TestLabels, k));
    rng::Stream score_rng(rng::derive(cfg.seed, rng::Tag::TestScores, k));
    for (std::size_t i = 0; i < n; ++i) {
      const bool member = label_rng.bernoulli(cfg.member_prob);
      w.labels.values(i, k) = member ? 1 : 0;
      w.test.values(i, k) = (member ? cfg.mu : 0.0) + score_rng.normal();
    }
  }
  return w;
}

enum class Block : std::uint8_t { Clean, Calibration, Remainder };

inline const char* to_string(Block b) noexcept {
  switch (b) {
    case Block::Clean: return "clean";
    case Block::Calibration: return "calibration";
    case Block::Remainder: return "remainder";
  }
  return "?";
}

struct SplitConfig {
  std::size_t n_pool = 789;
  double a = 0.30;      // clean fraction
  double b = 0.30;      // calibration fraction
  double rho = 0.125;   // per-model training fraction within the remainder
  std::size_t K = 16;
  std::uint64_t seed = 1;

  std::size_t n_clean() const { return static_cast<std::size_t>(std::floor(a * static_cast<double>(n_pool))); }
  std::size_t n_cal() const { return static_cast<std::size_t>(std::floor(b * static_cast<double>(n_pool))); }
  std::size_t n_remainder() const { return n_pool - n_clean() - n_cal(); }
  std::size_t members_per_model() const {
    return static_cast<std::size_t>(std::llround(rho * static_cast<double>(n_remainder())));
  }

  void validate() const {
    require(a > 0.0 && b > 0.0 && a + b < 1.0, ErrorKind::Parameter, "need a, b > 0 and a + b < 1");
    require(rho >= 0.0 && rho <= 1.0, ErrorKind::Parameter, "rho must lie in [0,1]");
    require(K >= 1, ErrorKind::Parameter, "K must be >= 1");
    require(n_clean() >= 1 && n_cal() >= 1 && n_pool > n_clean() + n_cal(), ErrorKind::Parameter,
            "every block must hold at least one item");
  }
};

/// Three-block partition of the pool plus per-model memberships over the
/// whole pool. Calibration rows are all-true, clean rows all-false.
struct SplitDraw {
  std::vector<Block> block;          // per pool item
  std::vector<std::size_t> clean;    // pool indices, ascending
  std::vector<std::size_t> calibration;
  std::vector<std::size_t> remainder;
  MembershipLabels labels;           // pool x K

  /// Test set = clean followed by remainder.
  std::vector<std::size_t> test_indices() const {
    std::vector<std::size_t> t = clean;
    t.insert(t.end(), remainder.begin(), remainder.end());
    return t;
  }
};

inline SplitDraw gen_split(const SplitConfig& cfg) {
  cfg.validate();
  SplitDraw d;
  const std::size_t n = cfg.n_pool;
  rng::Stream perm_rng(rng::derive(cfg.seed, rng::Tag::SplitPermutation));
  const auto perm = perm_rng.permutation(n);
  d.block.assign(n, Block::Remainder);
  const std::size_t c0 = cfg.n_clean(), c1 = c0 + cfg.n_cal();
  for (std::size_t r = 0; r < n; ++r) d.block[perm[r]] = r < c0 ? Block::Clean : (r < c1 ? Block::Calibration : Block::Remainder);
  for (std::size_t i = 0; i < n; ++i) {
    switch (d.block[i]) {
      case Block::Clean: d.clean.push_back(i); break;
      case Block::Calibration: d.calibration.push_back(i); break;
      case Block::Remainder: d.remainder.push_back(i); break;
    }
  }
  d.labels.values = Matrix<std::uint8_t>(n, cfg.K, 0);
  for (auto i : d.calibration)
    for (std::size_t k = 0; k < cfg.K; ++k) d.labels.values(i, k) = 1;
  const std::size_t per_model = cfg.members_per_model();
  for (std::size_t k = 0; k < cfg.K; ++k) {
    rng::Stream member_rng(rng::derive(cfg.seed, rng::Tag::SplitMembers, k));
    for (auto r : member_rng.sample_without_replacement(d.remainder.size(), per_model))
      d.labels.values(d.remainder[r], k) = 1;
  }
  return d;
}

/// T_i^k = mu * M_i^k + N(0,1), independent across (i, k).
inline Matrix<double> attach_scores(const MembershipLabels& labels, double mu, std::uint64_t seed) {
  Matrix<double> t(labels.n_items(), labels.n_models());
  for (std::size_t k = 0; k < labels.n_models(); ++k) {
    rng::Stream s(rng::derive(seed, rng::Tag::AttachScores, k));
    for (std::size_t i = 0; i < labels.n_items(); ++i) t(i, k) = (labels.member(i, k) ? mu : 0.0) + s.normal();
  }
  return t;
}

/// Scores for a split draw, cut into the test (clean + remainder) and
/// calibration views.
inline World attach_scores(const SplitDraw& d, double mu, std::uint64_t seed) {
  const auto scores = attach_scores(d.labels, mu, seed);
  const auto test_idx = d.test_indices();
  World w;
  w.test.models = default_model_ids(d.labels.n_models());
  w.cal.models = w.test.models;
  for (auto i : test_idx) {
    w.test.items.push_back("item_" + std::to_string(i));
    w.blocks.push_back(to_string(d.block[i]));
  }
  w.test.values = scores.select_rows(test_idx);
  w.cal.values = scores.select_rows(d.calibration);
  w.labels = d.labels.select_rows(test_idx);
  return w;
}

struct CopulaNullConfig {
  std::size_t c = 2;
  double eta = 0.5;
  std::size_t n = 10000;
  std::uint64_t seed = 1;

  void validate() const {
    require(c >= 1, ErrorKind::Parameter, "c must be >= 1");
    require(eta >= 0.0 && eta <= 1.0, ErrorKind::Parameter, "eta must lie in [0,1]");
  }
};

/// Maxima whose CDF is eta x + (1 - eta) x^c: a comonotone draw with
/// probability eta, otherwise the max of c independent uniforms.
inline std::vector<double> gen_copula_null(const CopulaNullConfig& cfg) {
  cfg.validate();
  rng::Stream s(rng::derive(cfg.seed, rng::Tag::Copula, cfg.c));
  std::vector<double> out(cfg.n);
  for (auto& v : out) {
    if (s.bernoulli(cfg.eta)) {
      v = s.uniform();
    } else {
      double mx = 0.0;
      for (std::size_t j = 0; j < cfg.c; ++j) mx = std::max(mx, s.uniform());
      v = mx;
    }
  }
  return out;
}

inline double copula_null_cdf(double x, double eta, std::size_t c) {
  return eta * x + (1.0 - eta) * std::pow(x, static_cast<double>(c));
}

/// Labels CSV: `item_id,block,M_1,...,M_K`.
inline void write_labels_csv(std::ostream& os, const World& w) {
  os << "item_id,block";
  for (std::size_t k = 0; k < w.labels.n_models(); ++k) os << ",M_" << (k + 1);
  os << '\n';
  for (std::size_t i = 0; i < w.labels.n_items(); ++i) {
    os << w.test.items[i] << ',' << (i < w.blocks.size() ? w.blocks[i] : "test");
    for (std::size_t k = 0; k < w.labels.n_models(); ++k) os << ',' << static_cast<int>(w.labels.values(i, k));
    os << '\n';
  }
}

}  // namespace jecs
