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

#include <cmath>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "jecs/error.hpp"
#include "jecs/format.hpp"
#include "jecs/matrix.hpp"

namespace jecs {

/// Detection scores T(x_i; theta_k): one row per candidate item, one column
/// per audited model. Larger scores are more member-like.
struct ScoreMatrix {
  std::vector<std::string> items;
  std::vector<std::string> models;
  Matrix<double> values;

  std::size_t n_items() const noexcept { return values.rows(); }
  std::size_t n_models() const noexcept { return values.cols(); }

  void validate() const {
    require(values.rows() >= 1 && values.cols() >= 1, ErrorKind::Parameter,
            "score matrix needs at least one item and one model");
    require(items.size() == values.rows(), ErrorKind::Alignment, "item ids do not match matrix rows");
    require(models.size() == values.cols(), ErrorKind::Alignment, "model ids do not match matrix columns");
    for (double v : values.data()) require(std::isfinite(v), ErrorKind::Domain, "non-finite score");
  }

  ScoreMatrix select_rows(std::span<const std::size_t> idx) const {
    ScoreMatrix out;
    out.models = models;
    out.items.reserve(idx.size());
    for (auto i : idx) out.items.push_back(items[i]);
    out.values = values.select_rows(idx);
    return out;
  }
};

/// Scores of the shared calibration set; every row is a member of every
/// audited model by contract.
struct CalibrationScores {
  std::vector<std::string> models;
  Matrix<double> values;

  std::size_t size() const noexcept { return values.rows(); }

  void validate() const {
    require(values.rows() >= 1, ErrorKind::Parameter, "calibration set is empty");
    require(models.size() == values.cols(), ErrorKind::Alignment, "model ids do not match calibration columns");
    for (double v : values.data()) require(std::isfinite(v), ErrorKind::Domain, "non-finite calibration score");
  }

  CalibrationScores select_rows(std::span<const std::size_t> idx) const {
    return {models, values.select_rows(idx)};
  }
};

inline void check_aligned(const ScoreMatrix& test, const CalibrationScores& cal) {
  require(test.models == cal.models, ErrorKind::Alignment,
          "test and calibration model columns differ");
}

// CSV: header `item_id,<model_1>,...,<model_K>`, one row per item.

inline void write_score_csv(std::ostream& os, const ScoreMatrix& m) {
  os << "item_id";
  for (const auto& id : m.models) os << ',' << id;
  os << '\n';
  for (std::size_t i = 0; i < m.n_items(); ++i) {
    os << m.items[i];
    for (std::size_t k = 0; k < m.n_models(); ++k) os << ',' << format_number(m.values(i, k));
    os << '\n';
  }
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::string chomp(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.pop_back();
  return s;
}

}  // namespace detail

inline ScoreMatrix read_score_csv(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), ErrorKind::Parse, "score CSV is empty");
  auto header = detail::split_csv_line(detail::chomp(line));
  require(header.size() >= 2 && header[0] == "item_id", ErrorKind::Parse,
          "score CSV header must be item_id,<model>...");
  ScoreMatrix m;
  m.models.assign(header.begin() + 1, header.end());
  std::vector<double> flat;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    line = detail::chomp(line);
    if (line.empty()) continue;
    auto cells = detail::split_csv_line(line);
    require(cells.size() == header.size(), ErrorKind::Parse,
            "line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) + " fields");
    m.items.push_back(cells[0]);
    for (std::size_t k = 1; k < cells.size(); ++k) {
      try {
        std::size_t used = 0;
        double v = std::stod(cells[k], &used);
        require(used == cells[k].size(), ErrorKind::Parse,
                "line " + std::to_string(lineno) + ": bad number '" + cells[k] + "'");
        flat.push_back(v);
      } catch (const std::logic_error&) {
        fail(ErrorKind::Parse, "line " + std::to_string(lineno) + ": bad number '" + cells[k] + "'");
      }
    }
  }
  m.values = Matrix<double>(m.items.size(), m.models.size());
  for (std::size_t i = 0; i < m.items.size(); ++i)
    for (std::size_t k = 0; k < m.models.size(); ++k) m.values(i, k) = flat[i * m.models.size() + k];
  m.validate();
  return m;
}

inline CalibrationScores as_calibration(const ScoreMatrix& m) { return {m.models, m.values}; }

inline ScoreMatrix as_score_matrix(const CalibrationScores& cal, const std::string& prefix = "cal_") {
  ScoreMatrix m;
  m.models = cal.models;
  m.values = cal.values;
  for (std::size_t i = 0; i < cal.size(); ++i) m.items.push_back(prefix + std::to_string(i));
  return m;
}

}  // namespace jecs
