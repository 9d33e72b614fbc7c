// svg.hpp - dependency-free SVG line plots for trajectory CSV columns.

#pragma once

#include <string>
#include <vector>

namespace orderlab {

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;  // NaN y values are skipped
};

struct PlotSpec {
  std::string title;
  std::string x_label = "step";
  std::string y_label;
  bool log_y = false;
  int width = 960;
  int height = 540;
};

/// Renders one polyline per series with axes and a legend. Pure function of
/// its inputs: identical inputs produce byte-identical SVG. Throws
/// EmptyPlotError when no finite points exist.
std::string render_svg(const std::vector<PlotSeries>& series,
                       const PlotSpec& spec);

}  // namespace orderlab
