#pragma once

#include <string>
#include <utility>
#include <vector>

namespace banditlab {

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

// Self-contained SVG with axes, ticks, a legend, and one polyline per series.
// `step` draws each series as a right-continuous staircase (for CDFs).
std::string render_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                              const std::vector<PlotSeries>& series, bool step);

}  // namespace banditlab
