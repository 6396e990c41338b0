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

// Membership-inference detection scores computed from per-token model
// outputs. Every score is oriented "larger = more member-like", so a small
// score is evidence of non-membership.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "jecs/error.hpp"
#include "jecs/score_matrix.hpp"

namespace jecs {

struct TokenRecord {
  std::string item_id;
  std::vector<double> token_logprobs;    // log p(t_l | t_<l), natural log
  std::vector<double> dist_mean;         // mu_l, may be empty
  std::vector<double> dist_std;          // sigma_l, may be empty
  std::vector<double> token_probs_true;  // p(t_l | t_<l), may be empty

  std::size_t length() const noexcept { return token_logprobs.size(); }

  void validate() const {
    const std::size_t L = token_logprobs.size();
    require(L >= 1, ErrorKind::EmptySequence, "record '" + item_id + "' has no tokens");
    auto same_len = [&](const std::vector<double>& v, const char* name) {
      require(v.empty() || v.size() == L, ErrorKind::MalformedRecord,
              "record '" + item_id + "': " + name + " length differs from token_logprobs");
    };
    same_len(dist_mean, "dist_mean");
    same_len(dist_std, "dist_std");
    same_len(token_probs_true, "token_probs_true");
    for (std::size_t l = 0; l < L; ++l) {
      require(std::isfinite(token_logprobs[l]) && token_logprobs[l] <= 0.0, ErrorKind::MalformedRecord,
              "record '" + item_id + "': token_logprobs must be finite and <= 0");
      if (!dist_std.empty())
        require(dist_std[l] >= 0.0, ErrorKind::MalformedRecord, "record '" + item_id + "': negative dist_std");
      if (!token_probs_true.empty()) {
        const double p = token_probs_true[l];
        require(p > 0.0 && p <= 1.0, ErrorKind::MalformedRecord,
                "record '" + item_id + "': token_probs_true outside (0,1]");
        require(std::abs(p - std::exp(token_logprobs[l])) <= 1e-9, ErrorKind::MalformedRecord,
                "record '" + item_id + "': token_probs_true disagrees with exp(token_logprobs)");
      }
    }
  }
};

enum class ScoreKind { Perplexity, MinK, MinKpp, MEntropy };

inline const char* to_string(ScoreKind k) noexcept {
  switch (k) {
    case ScoreKind::Perplexity: return "perplexity";
    case ScoreKind::MinK: return "mink";
    case ScoreKind::MinKpp: return "minkpp";
    case ScoreKind::MEntropy: return "mentropy";
  }
  return "?";
}

inline ScoreKind parse_score_kind(const std::string& s) {
  if (s == "perplexity" || s == "ppl") return ScoreKind::Perplexity;
  if (s == "mink") return ScoreKind::MinK;
  if (s == "minkpp") return ScoreKind::MinKpp;
  if (s == "mentropy") return ScoreKind::MEntropy;
  fail(ErrorKind::Parameter, "unknown detector '" + s + "' (perplexity|mink|minkpp|mentropy)");
}

struct ScoreConfig {
  ScoreKind score_kind = ScoreKind::MinKpp;
  double k_percent = 20.0;
  double sigma_floor = 1e-6;

  void validate() const {
    require(k_percent > 0.0 && k_percent <= 100.0, ErrorKind::Parameter, "k_percent must lie in (0,100]");
    require(sigma_floor > 0.0, ErrorKind::Parameter, "sigma_floor must be > 0");
  }
};

/// Size of the bottom-K% index set: ceil(L*k/100), clamped to [1, L].
inline std::size_t bottom_count(std::size_t L, double k_percent) {
  // The epsilon absorbs products such as 10*30/100 = 3.0000000000000004.
  const double raw = std::ceil(static_cast<double>(L) * k_percent / 100.0 - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)), 1, L);
}

/// Positions of the |I| lowest raw log-probabilities; ties keep token order.
inline std::vector<std::size_t> bottom_positions(std::span<const double> logprobs, double k_percent) {
  std::vector<std::size_t> idx(logprobs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return logprobs[a] < logprobs[b]; });
  idx.resize(bottom_count(logprobs.size(), k_percent));
  return idx;
}

inline double score_minkpp(const TokenRecord& rec, const ScoreConfig& cfg) {
  cfg.validate();
  require(rec.length() >= 1, ErrorKind::EmptySequence, "record '" + rec.item_id + "' has no tokens");
  require(rec.dist_mean.size() == rec.length() && rec.dist_std.size() == rec.length(), ErrorKind::MalformedRecord,
          "record '" + rec.item_id + "': Min-K%++ needs dist_mean and dist_std");
  double sum = 0.0;
  const auto idx = bottom_positions(rec.token_logprobs, cfg.k_percent);
  for (auto l : idx)
    sum += (rec.token_logprobs[l] - rec.dist_mean[l]) / std::max(rec.dist_std[l], cfg.sigma_floor);
  return sum / static_cast<double>(idx.size());
}

inline double score_mink(const TokenRecord& rec, const ScoreConfig& cfg) {
  cfg.validate();
  require(rec.length() >= 1, ErrorKind::EmptySequence, "record '" + rec.item_id + "' has no tokens");
  double sum = 0.0;
  const auto idx = bottom_positions(rec.token_logprobs, cfg.k_percent);
  for (auto l : idx) sum += rec.token_logprobs[l];
  return sum / static_cast<double>(idx.size());
}

/// Mean token log-likelihood, i.e. -log(perplexity).
inline double score_perplexity(const TokenRecord& rec) {
  require(rec.length() >= 1, ErrorKind::EmptySequence, "record '" + rec.item_id + "' has no tokens");
  double sum = 0.0;
  for (double lp : rec.token_logprobs) sum += lp;
  return sum / static_cast<double>(rec.length());
}

/// Negated mean of the single-token modified entropy -(1-p) log p.
/// Only the realized token's probability is available, so the cross-class
/// term of the classification form is dropped.
inline double score_mentropy(const TokenRecord& rec) {
  require(rec.length() >= 1, ErrorKind::EmptySequence, "record '" + rec.item_id + "' has no tokens");
  require(rec.token_probs_true.size() == rec.length(), ErrorKind::MalformedRecord,
          "record '" + rec.item_id + "': M-Entropy needs token_probs_true");
  constexpr double eps = 1e-12;
  double sum = 0.0;
  for (double p_raw : rec.token_probs_true) {
    const double p = std::clamp(p_raw, eps, 1.0 - eps);
    sum += -(1.0 - p) * std::log(p);
  }
  return -sum / static_cast<double>(rec.length());
}

inline double score(const TokenRecord& rec, const ScoreConfig& cfg) {
  switch (cfg.score_kind) {
    case ScoreKind::Perplexity: return score_perplexity(rec);
    case ScoreKind::MinK: return score_mink(rec, cfg);
    case ScoreKind::MinKpp: return score_minkpp(rec, cfg);
    case ScoreKind::MEntropy: return score_mentropy(rec);
  }
  fail(ErrorKind::Parameter, "unknown score kind");
}

/// One record set per model; all sets must list the same item ids in the
/// same order.
struct ModelRecords {
  std::string model_id;
  std::vector<TokenRecord> records;
};

inline ScoreMatrix score_matrix(std::span<const ModelRecords> per_model, const ScoreConfig& cfg) {
  require(!per_model.empty(), ErrorKind::Parameter, "no models supplied");
  const auto& first = per_model.front().records;
  require(!first.empty(), ErrorKind::Parameter, "no records supplied");
  ScoreMatrix m;
  for (const auto& r : first) m.items.push_back(r.item_id);
  m.values = Matrix<double>(first.size(), per_model.size());
  for (std::size_t k = 0; k < per_model.size(); ++k) {
    const auto& recs = per_model[k].records;
    m.models.push_back(per_model[k].model_id);
    require(recs.size() == first.size(), ErrorKind::Alignment,
            "model '" + per_model[k].model_id + "' has " + std::to_string(recs.size()) + " records, expected " +
                std::to_string(first.size()));
    for (std::size_t i = 0; i < recs.size(); ++i) {
      require(recs[i].item_id == m.items[i], ErrorKind::Alignment,
              "model '" + per_model[k].model_id + "' row " + std::to_string(i) + " is '" + recs[i].item_id +
                  "', expected '" + m.items[i] + "'");
      m.values(i, k) = score(recs[i], cfg);
    }
  }
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// JSONL ingestion. One object per (model, item):
//   {"item_id", "model_id", "token_logprobs", "dist_mean"?, "dist_std"?,
//    "token_probs_true"?, "split"?}
// "split" is "test" (default) or "cal".

struct TokenCorpus {
  std::vector<ModelRecords> test;
  std::vector<ModelRecords> cal;
};

inline TokenCorpus read_token_jsonl(std::istream& is) {
  TokenCorpus corpus;
  std::map<std::string, std::size_t> test_index, cal_index;
  std::string line;
  std::size_t lineno = 0;
  auto bucket = [](std::vector<ModelRecords>& sets, std::map<std::string, std::size_t>& index,
                   const std::string& model) -> std::vector<TokenRecord>& {
    auto [it, inserted] = index.try_emplace(model, sets.size());
    if (inserted) sets.push_back({model, {}});
    return sets[it->second].records;
  };
  while (std::getline(is, line)) {
    ++lineno;
    const auto where = "line " + std::to_string(lineno) + ": ";
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Parse, where + e.what());
    }
    try {
      require(j.is_object(), ErrorKind::Parse, where + "expected a JSON object");
      require(j.contains("item_id") && j.contains("model_id") && j.contains("token_logprobs"), ErrorKind::Parse,
              where + "item_id, model_id and token_logprobs are required");
      TokenRecord rec;
      rec.item_id = j.at("item_id").get<std::string>();
      rec.token_logprobs = j.at("token_logprobs").get<std::vector<double>>();
      if (j.contains("dist_mean")) rec.dist_mean = j.at("dist_mean").get<std::vector<double>>();
      if (j.contains("dist_std")) rec.dist_std = j.at("dist_std").get<std::vector<double>>();
      if (j.contains("token_probs_true")) rec.token_probs_true = j.at("token_probs_true").get<std::vector<double>>();
      rec.validate();
      const std::string split = j.value("split", std::string("test"));
      require(split == "test" || split == "cal", ErrorKind::Parse, where + "split must be 'test' or 'cal'");
      const auto model = j.at("model_id").get<std::string>();
      if (split == "cal")
        bucket(corpus.cal, cal_index, model).push_back(std::move(rec));
      else
        bucket(corpus.test, test_index, model).push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Parse, where + e.what());
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Parse) throw;
      fail(e.kind(), where + e.message());
    }
  }
  require(!corpus.test.empty(), ErrorKind::Parse, "no test records in input");
  return corpus;
}

}  // namespace jecs
