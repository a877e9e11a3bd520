// plot.hpp
// Static SVG learning curves: the running fraction of each latent reward
// state against the step, one curve per state per metrics file.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "igllab/metrics.hpp"

namespace igllab {

struct Curve {
  std::string label;
  std::string color;
  std::vector<std::pair<double, double>> points;  // (step, fraction)
};

struct PlotData {
  std::vector<Curve> curves;
  double max_step = 1.0;
};

inline constexpr std::array<const char*, 3> kStateNames = {"r=-1", "r=0", "r=+1"};

/// Keeps at most `max_points` evenly spaced rows of each series (always
/// including the last one). Rows without ground truth contribute nothing.
inline PlotData build_plot_data(const std::vector<std::pair<std::string, MetricsSeries>>& inputs,
                                std::size_t max_points = 1000) {
  static const std::array<std::array<const char*, 3>, 4> palette = {{
      {"#d62728", "#7f7f7f", "#2ca02c"},
      {"#ff9896", "#c7c7c7", "#98df8a"},
      {"#8c564b", "#bcbd22", "#1f77b4"},
      {"#e377c2", "#17becf", "#9467bd"},
  }};
  PlotData data;
  for (std::size_t f = 0; f < inputs.size(); ++f) {
    const auto& [name, series] = inputs[f];
    const std::size_t stride = std::max<std::size_t>(1, series.size() / std::max<std::size_t>(1, max_points));
    for (int s = 0; s < 3; ++s) {
      Curve c;
      c.label = name + " " + kStateNames[s];
      c.color = palette[f % palette.size()][s];
      for (std::size_t i = 0; i < series.size(); ++i) {
        if (i % stride != 0 && i + 1 != series.size()) continue;
        const auto& row = series[i];
        const auto& v = s == 0 ? row.frac_neg : s == 1 ? row.frac_zero : row.frac_pos;
        if (!v) continue;
        c.points.emplace_back(static_cast<double>(row.step), *v);
        data.max_step = std::max(data.max_step, static_cast<double>(row.step));
      }
      data.curves.push_back(std::move(c));
    }
  }
  return data;
}

inline void write_svg(std::ostream& out, const PlotData& data) {
  const double width = 800, height = 480, left = 60, right = 200, top = 20, bottom = 50;
  const double pw = width - left - right, ph = height - top - bottom;
  auto x_of = [&](double step) { return left + pw * step / data.max_step; };
  auto y_of = [&](double frac) { return top + ph * (1.0 - frac); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<g stroke=\"#444\" fill=\"none\"><rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw
      << "\" height=\"" << ph << "\"/></g>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#222\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double f = i / 4.0;
    out << "<text x=\"" << left - 6 << "\" y=\"" << y_of(f) + 4 << "\" text-anchor=\"end\">" << f << "</text>\n";
    out << "<text x=\"" << x_of(f * data.max_step) << "\" y=\"" << top + ph + 16
        << "\" text-anchor=\"middle\">" << static_cast<long long>(std::llround(f * data.max_step)) << "</text>\n";
  }
  out << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">step</text>\n";
  out << "<text x=\"14\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 14 " << top + ph / 2
      << ")\" text-anchor=\"middle\">running fraction</text>\n";
  for (std::size_t i = 0; i < data.curves.size(); ++i) {
    const double y = top + 14.0 * static_cast<double>(i) + 8;
    out << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << y << "\" x2=\"" << left + pw + 30 << "\" y2=\"" << y
        << "\" stroke=\"" << data.curves[i].color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << left + pw + 34 << "\" y=\"" << y + 4 << "\">" << data.curves[i].label << "</text>\n";
  }
  out << "</g>\n";
  for (const auto& c : data.curves) {
    if (c.points.empty()) continue;
    out << "<polyline fill=\"none\" stroke=\"" << c.color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [s, f] : c.points) out << x_of(s) << ',' << y_of(f) << ' ';
    out << "\"/>\n";
  }
  out << "</svg>\n";
}

/// Reads the CSVs and writes the SVG. 0 on success, 1 when any input is
/// missing or does not carry the metrics schema, 2 when the image cannot be
/// written.
template <typename Log>
int cmd_plot(const std::vector<std::string>& csv_paths, const std::string& image_path, Log&& error) {
  if (csv_paths.empty()) {
    error("plot: no metrics files given");
    return 1;
  }
  std::vector<std::pair<std::string, MetricsSeries>> inputs;
  for (const auto& path : csv_paths) {
    std::ifstream in(path);
    if (!in) {
      error("plot: cannot open '" + path + "'");
      return 1;
    }
    try {
      inputs.emplace_back(path, read_metrics(in));
    } catch (const std::exception& e) {
      error("plot: '" + path + "': " + e.what());
      return 1;
    }
  }
  std::ofstream out(image_path);
  if (!out) {
    error("plot: cannot write '" + image_path + "'");
    return 2;
  }
  write_svg(out, build_plot_data(inputs));
  return out ? 0 : 2;
}

}  // namespace igllab
