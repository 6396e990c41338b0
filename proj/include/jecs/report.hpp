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

// Long-format results / summary CSVs and a small line+bar SVG chart.

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "jecs/format.hpp"
#include "jecs/harness.hpp"

namespace jecs {

inline void write_results_header(std::ostream& os) {
  os << "procedure,alpha,axis,axis_value,rep,gcp,power,n_selected,lambda,pi0_hat\n";
}

inline void write_results_rows(std::ostream& os, const SweepCell& cell) {
  for (const auto& o : cell.result.outcomes) {
    os << to_string(o.procedure) << ',' << format_number(o.alpha) << ',' << cell.axis << ',' << cell.axis_value
       << ',' << o.rep << ',' << format_number(o.gcp) << ',' << format_number(o.power) << ',' << o.n_selected << ','
       << format_number(o.lambda) << ',' << format_number(o.pi0_hat) << '\n';
  }
}

inline void write_summary_header(std::ostream& os) {
  os << "procedure,alpha,axis,axis_value,reps,gcr,gcp_std_err,mean_power,power_std_err\n";
}

inline void write_summary_rows(std::ostream& os, const SweepCell& cell) {
  for (const auto& s : cell.result.summaries) {
    os << to_string(s.procedure) << ',' << format_number(s.alpha) << ',' << cell.axis << ',' << cell.axis_value << ','
       << s.reps << ',' << format_number(s.gcr) << ',' << format_number(s.gcp_std_err) << ','
       << format_number(s.mean_power) << ',' << format_number(s.power_std_err) << '\n';
  }
}

inline void write_results_csv(std::ostream& os, std::span<const SweepCell> cells) {
  write_results_header(os);
  for (const auto& c : cells) write_results_rows(os, c);
}

inline void write_summary_csv(std::ostream& os, std::span<const SweepCell> cells) {
  write_summary_header(os);
  for (const auto& c : cells) write_summary_rows(os, c);
}

/// GCR lines (left axis) and power bars (right axis, same [0,1] scale) for
/// one series per procedure. The x positions are the sweep coordinates, or
/// alpha when the cells are not a sweep.
inline void write_svg_chart(std::ostream& os, std::span<const SweepCell> cells, const std::string& title) {
  struct Point {
    std::string label;
    double gcr, power;
  };
  std::vector<std::string> x_labels;
  std::map<std::string, std::vector<Point>> series;
  for (const auto& c : cells) {
    for (const auto& s : c.result.summaries) {
      const std::string x = c.axis == "none" || c.axis == "alpha" ? format_number(s.alpha)
                                                                   : c.axis_value + " @a=" + format_number(s.alpha);
      if (std::find(x_labels.begin(), x_labels.end(), x) == x_labels.end()) x_labels.push_back(x);
      series[to_string(s.procedure)].push_back({x, s.gcr, s.mean_power});
    }
  }
  const double W = 720, H = 420, L = 60, R = 60, T = 40, B = 70;
  const double pw = W - L - R, ph = H - T - B;
  const std::size_t nx = std::max<std::size_t>(x_labels.size(), 1);
  auto xpos = [&](const std::string& lab) {
    const auto it = std::find(x_labels.begin(), x_labels.end(), lab);
    return L + pw * (static_cast<double>(it - x_labels.begin()) + 0.5) / static_cast<double>(nx);
  };
  auto ypos = [&](double v) { return T + ph * (1.0 - std::clamp(v, 0.0, 1.0)); };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T + ph << "\" x2=\"" << L + pw << "\" y2=\"" << T + ph
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << T + ph << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L + pw << "\" y1=\"" << T << "\" x2=\"" << L + pw << "\" y2=\"" << T + ph
     << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = t / 4.0;
    os << "<text x=\"" << L - 6 << "\" y=\"" << ypos(v) + 4 << "\" text-anchor=\"end\" font-size=\"10\">"
       << format_number(v) << "</text>\n";
  }
  os << "<text x=\"14\" y=\"" << T + ph / 2 << "\" font-size=\"11\" transform=\"rotate(-90 14 " << T + ph / 2
     << ")\">GCR (lines)</text>\n";
  os << "<text x=\"" << W - 14 << "\" y=\"" << T + ph / 2 << "\" font-size=\"11\" transform=\"rotate(90 " << W - 14
     << ' ' << T + ph / 2 << ")\">Power (bars)</text>\n";
  for (const auto& lab : x_labels)
    os << "<text x=\"" << xpos(lab) << "\" y=\"" << T + ph + 16 << "\" text-anchor=\"middle\" font-size=\"10\">" << lab
       << "</text>\n";

  const double slot = pw / static_cast<double>(nx);
  const double bar_w = slot * 0.8 / static_cast<double>(std::max<std::size_t>(series.size(), 1));
  std::size_t si = 0;
  for (const auto& [name, pts] : series) {
    const char* color = palette[si % 5];
    for (const auto& p : pts) {
      const double x0 = xpos(p.label) - slot * 0.4 + bar_w * static_cast<double>(si);
      os << "<rect x=\"" << format_number(x0) << "\" y=\"" << format_number(ypos(p.power)) << "\" width=\""
         << format_number(bar_w) << "\" height=\"" << format_number(T + ph - ypos(p.power)) << "\" fill=\"" << color
         << "\" fill-opacity=\"0.25\"/>\n";
    }
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : pts) os << format_number(xpos(p.label)) << ',' << format_number(ypos(p.gcr)) << ' ';
    os << "\"/>\n";
    os << "<text x=\"" << L + 8 + 110 * static_cast<double>(si) << "\" y=\"" << H - 14 << "\" font-size=\"11\" fill=\""
       << color << "\">" << name << "</text>\n";
    ++si;
  }
  os << "</svg>\n";
}

}  // namespace jecs
