#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace msm {

struct SvgSeries {
  std::string label;
  std::vector<double> values;
  std::string color = "#1f6feb";
};

/// Self-contained SVG line chart, no display dependency. Series share the
/// x axis (sample position) and a common y range.
inline void write_line_chart(const std::string& path, std::span<const SvgSeries> series,
                             const std::string& title = "") {
  if (series.empty()) throw std::invalid_argument("nothing to plot");
  const int width = 960, height = 480;
  const int ml = 60, mr = 20, mt = 30, mb = 30;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  std::size_t n = 0;
  for (const auto& s : series) {
    n = std::max(n, s.values.size());
    for (double v : s.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (n < 2) throw std::invalid_argument("plot needs at least two points");
  if (!(hi > lo)) {
    hi += 1.0;
    lo -= 1.0;
  }
  const double px = static_cast<double>(width - ml - mr);
  const double py = static_cast<double>(height - mt - mb);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open plot file: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty())
    out << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
  out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << px << "\" height=\"" << py
      << "\" fill=\"none\" stroke=\"#888\"/>\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", hi);
  out << "<text x=\"" << ml - 5 << "\" y=\"" << mt + 10
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << buf
      << "</text>\n";
  std::snprintf(buf, sizeof(buf), "%.6g", lo);
  out << "<text x=\"" << ml - 5 << "\" y=\"" << mt + py
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << buf
      << "</text>\n";
  int legend_y = mt + 14;
  for (const auto& s : series) {
    out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1\" points=\"";
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      const double x = ml + px * static_cast<double>(i) / static_cast<double>(n - 1);
      const double y = mt + py * (1.0 - (s.values[i] - lo) / (hi - lo));
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", x, y);
      out << buf;
    }
    out << "\"/>\n";
    if (!s.label.empty()) {
      out << "<text x=\"" << ml + 8 << "\" y=\"" << legend_y << "\" fill=\"" << s.color
          << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.label << "</text>\n";
      legend_y += 16;
    }
  }
  out << "</svg>\n";
  if (!out) throw std::runtime_error("failed writing plot: " + path);
}

}  // namespace msm
