#include "orderlab/svg.hpp"

#include "orderlab/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace orderlab {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
                          "#bcbd22", "#17becf"};

std::string fmt(double v, const char* spec = "%.2f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

std::string render_svg(const std::vector<PlotSeries>& series,
                       const PlotSpec& spec) {
  // Collect plottable points (finite, and positive when log scale).
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  bool any = false;
  for (const PlotSeries& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      double y = s.y[i];
      if (!std::isfinite(y)) continue;
      if (spec.log_y) {
        if (y <= 0.0) continue;
        y = std::log10(y);
      }
      if (!any) {
        xmin = xmax = s.x[i];
        ymin = ymax = y;
        any = true;
      } else {
        xmin = std::min(xmin, s.x[i]);
        xmax = std::max(xmax, s.x[i]);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    }
  }
  if (!any) throw EmptyPlotError("no plottable points");
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;

  const double left = 70, right = 170, top = 40, bottom = 50;
  const double pw = spec.width - left - right;
  const double ph = spec.height - top - bottom;
  auto px = [&](double x) {
    return left + pw * (x - xmin) / (xmax - xmin);
  };
  auto py = [&](double y) {
    if (spec.log_y) y = std::log10(y);
    return top + ph * (1.0 - (y - ymin) / (ymax - ymin));
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width
      << "\" height=\"" << spec.height << "\" viewBox=\"0 0 " << spec.width
      << ' ' << spec.height << "\">\n";
  out << "<rect width=\"" << spec.width << "\" height=\"" << spec.height
      << "\" fill=\"white\"/>\n";
  if (!spec.title.empty())
    out << "<text x=\"" << left << "\" y=\"24\" font-family=\"monospace\" "
           "font-size=\"16\">"
        << spec.title << "</text>\n";

  // Axes with 5 divisions.
  out << "<g stroke=\"#333\" stroke-width=\"1\">\n";
  out << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top + ph)
      << "\" x2=\"" << fmt(left + pw) << "\" y2=\"" << fmt(top + ph)
      << "\"/>\n";
  out << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top) << "\" x2=\""
      << fmt(left) << "\" y2=\"" << fmt(top + ph) << "\"/>\n";
  out << "</g>\n<g font-family=\"monospace\" font-size=\"11\" fill=\"#333\">\n";
  for (int t = 0; t <= 5; ++t) {
    const double fx = xmin + (xmax - xmin) * t / 5.0;
    const double gx = px(fx);
    out << "<line x1=\"" << fmt(gx) << "\" y1=\"" << fmt(top + ph)
        << "\" x2=\"" << fmt(gx) << "\" y2=\"" << fmt(top + ph + 4)
        << "\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << fmt(gx) << "\" y=\"" << fmt(top + ph + 16)
        << "\" text-anchor=\"middle\">" << fmt(fx, "%.4g") << "</text>\n";
    const double fy = ymin + (ymax - ymin) * t / 5.0;
    const double value = spec.log_y ? std::pow(10.0, fy) : fy;
    const double gy = top + ph * (1.0 - static_cast<double>(t) / 5.0);
    out << "<line x1=\"" << fmt(left - 4) << "\" y1=\"" << fmt(gy)
        << "\" x2=\"" << fmt(left) << "\" y2=\"" << fmt(gy)
        << "\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(gy + 4)
        << "\" text-anchor=\"end\">" << fmt(value, "%.3g") << "</text>\n";
  }
  out << "<text x=\"" << fmt(left + pw / 2) << "\" y=\""
      << fmt(top + ph + 34) << "\" text-anchor=\"middle\">" << spec.x_label
      << "</text>\n";
  if (!spec.y_label.empty())
    out << "<text x=\"16\" y=\"" << fmt(top + ph / 2)
        << "\" transform=\"rotate(-90 16 " << fmt(top + ph / 2) << ")\" "
           "text-anchor=\"middle\">"
        << spec.y_label << (spec.log_y ? " (log)" : "") << "</text>\n";
  out << "</g>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const PlotSeries& s = series[k];
    const char* color = kPalette[k % (sizeof(kPalette) / sizeof(*kPalette))];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.2\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      const double y = s.y[i];
      if (!std::isfinite(y) || (spec.log_y && y <= 0.0)) continue;
      if (!first) out << ' ';
      out << fmt(px(s.x[i])) << ',' << fmt(py(y));
      first = false;
    }
    out << "\"/>\n";
    const double ly = top + 16.0 * static_cast<double>(k);
    out << "<line x1=\"" << fmt(left + pw + 12) << "\" y1=\"" << fmt(ly)
        << "\" x2=\"" << fmt(left + pw + 36) << "\" y2=\"" << fmt(ly)
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << fmt(left + pw + 42) << "\" y=\"" << fmt(ly + 4)
        << "\" font-family=\"monospace\" font-size=\"11\">" << s.label
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace orderlab
