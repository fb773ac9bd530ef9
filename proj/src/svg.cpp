/*
 * Copyright 2026 The covxplain Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "covx/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace covx::svg {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// t in [-1, 1] -> diverging blue-white-red.
std::string diverging(double t) {
  t = std::clamp(t, -1.0, 1.0);
  int r = 255, g = 255, b = 255;
  if (t > 0) {
    g = b = static_cast<int>(std::lround(255.0 * (1.0 - t)));
  } else {
    r = g = static_cast<int>(std::lround(255.0 * (1.0 + t)));
  }
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string label_at(const std::vector<std::string>& labels, std::size_t i) {
  return i < labels.size() ? labels[i] : "x" + std::to_string(i);
}

}  // namespace

std::string matrix_heatmap(const Matrix& m, const std::vector<std::string>& labels,
                           const std::string& title) {
  const std::size_t d = m.rows();
  const double cell = d <= 20 ? 24.0 : std::max(4.0, 480.0 / static_cast<double>(d));
  const double margin = 90.0;
  const double size = margin + cell * static_cast<double>(d) + 20.0;
  const double scale = std::max(max_abs(m.values()), 1e-300);
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(size) << "\" height=\""
      << num(size) << "\">\n";
  out << "<text x=\"10\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << escape(title)
      << "</text>\n";
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j)
      out << "<rect x=\"" << num(margin + cell * j) << "\" y=\"" << num(margin + cell * i)
          << "\" width=\"" << num(cell) << "\" height=\"" << num(cell) << "\" fill=\""
          << diverging(m(i, j) / scale) << "\"/>\n";
    if (d <= 40) {
      out << "<text x=\"" << num(margin - 4) << "\" y=\"" << num(margin + cell * (i + 0.7))
          << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">"
          << escape(label_at(labels, i)) << "</text>\n";
      out << "<text x=\"" << num(margin + cell * (i + 0.5)) << "\" y=\"" << num(margin - 4)
          << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"start\" transform=\"rotate(-60 "
          << num(margin + cell * (i + 0.5)) << ' ' << num(margin - 4) << ")\">"
          << escape(label_at(labels, i)) << "</text>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

std::string bar_chart(const Vector& values, const std::vector<std::string>& labels,
                      const std::string& title) {
  const double bar = 22.0;
  const double width = 60.0 + bar * static_cast<double>(values.size()) + 20.0;
  const double height = 320.0;
  const double top = 40.0, plot = 200.0;
  const double scale = std::max(max_abs(values), 1e-300);
  const bool any_negative = std::ranges::any_of(values, [](double v) { return v < 0.0; });
  const double axis = any_negative ? top + plot / 2.0 : top + plot;
  const double span = any_negative ? plot / 2.0 : plot;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
      << num(height) << "\">\n";
  out << "<text x=\"10\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << escape(title)
      << "</text>\n";
  out << "<line x1=\"50\" y1=\"" << num(axis) << "\" x2=\"" << num(width - 10) << "\" y2=\""
      << num(axis) << "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double h = span * std::abs(values[i]) / scale;
    const double x = 60.0 + bar * static_cast<double>(i);
    const double y = values[i] >= 0.0 ? axis - h : axis;
    out << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(bar - 4)
        << "\" height=\"" << num(h) << "\" fill=\"" << (values[i] >= 0.0 ? "#d62728" : "#1f77b4")
        << "\"/>\n";
    out << "<text x=\"" << num(x + bar / 2) << "\" y=\"" << num(top + plot + 14)
        << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\" transform=\"rotate(-60 "
        << num(x + bar / 2) << ' ' << num(top + plot + 14) << ")\">" << escape(label_at(labels, i))
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string curves(const std::vector<std::pair<std::string, Vector>>& series, const std::string& title) {
  const double left = 50, top = 40, w = 400, h = 260;
  double ymax = 1.0;
  for (const auto& [name, v] : series)
    for (double y : v) ymax = std::max(ymax, y);
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(left + w + 160) << "\" height=\""
      << num(top + h + 40) << "\">\n";
  out << "<text x=\"10\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << escape(title)
      << "</text>\n";
  out << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(w) << "\" height=\""
      << num(h) << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<text x=\"" << num(left + w / 2) << "\" y=\"" << num(top + h + 30)
      << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">fraction of features flipped</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& [name, v] = series[s];
    const char* color = kPalette[s % std::size(kPalette)];
    std::ostringstream pts;
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double fx = v.size() > 1 ? static_cast<double>(k) / static_cast<double>(v.size() - 1) : 0.0;
      pts << (k ? " " : "") << num(left + fx * w) << ',' << num(top + h - h * v[k] / ymax);
    }
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\""
        << pts.str() << "\"/>\n";
    out << "<text x=\"" << num(left + w + 10) << "\" y=\"" << num(top + 14 + 16 * s)
        << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << color << "\">" << escape(name)
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace covx::svg
