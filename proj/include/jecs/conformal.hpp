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

#include <algorithm>
#include <vector>

#include "jecs/error.hpp"
#include "jecs/matrix.hpp"
#include "jecs/score_matrix.hpp"

namespace jecs {

/// Model-wise conformal p-values p_i^k. Every entry lies on the lattice
/// {1/(m+1), ..., 1} where m is the calibration size.
struct PValueMatrix {
  Matrix<double> values;
  std::size_t calibration_size = 0;

  std::size_t n_items() const noexcept { return values.rows(); }
  std::size_t n_models() const noexcept { return values.cols(); }
};

/// Per-item maxima p_i^* of the model-wise p-values.
struct MaxPVector {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
};

/// p_i^k = (1 + #{l : cal[l][k] <= test[i][k]}) / (m + 1), with the
/// non-strict comparison taken literally (ties count toward the p-value).
inline PValueMatrix conformal_pvalues(const Matrix<double>& test, const Matrix<double>& cal) {
  require(cal.rows() >= 1, ErrorKind::Parameter, "calibration set is empty");
  require(test.cols() == cal.cols(), ErrorKind::Alignment, "test and calibration have different model counts");
  const std::size_t m = cal.rows();
  const double denom = static_cast<double>(m + 1);
  PValueMatrix out{Matrix<double>(test.rows(), test.cols()), m};
  for (std::size_t k = 0; k < test.cols(); ++k) {
    auto column = cal.column(k);
    std::sort(column.begin(), column.end());
    for (std::size_t i = 0; i < test.rows(); ++i) {
      const auto at_or_below = std::upper_bound(column.begin(), column.end(), test(i, k)) - column.begin();
      out.values(i, k) = static_cast<double>(1 + at_or_below) / denom;
    }
  }
  return out;
}

inline PValueMatrix conformal_pvalues(const ScoreMatrix& test, const CalibrationScores& cal) {
  check_aligned(test, cal);
  cal.validate();
  return conformal_pvalues(test.values, cal.values);
}

inline MaxPVector max_p(const PValueMatrix& p) {
  MaxPVector out;
  out.values.resize(p.n_items());
  for (std::size_t i = 0; i < p.n_items(); ++i) {
    auto row = p.values.row(i);
    out.values[i] = row.empty() ? 0.0 : *std::max_element(row.begin(), row.end());
  }
  return out;
}

}  // namespace jecs
