#pragma once

#include <string>
#include <vector>

namespace shadow {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct AxisRange {
  double x_min = 0.0;
  double x_max = 1.0;
  double y_min = 0.0;
  double y_max = 1.0;
};

/// Smallest ranges covering every finite point, widened when degenerate.
AxisRange data_range(const std::vector<Series>& series);

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  /// x positions drawn as red dots on the first series.
  std::vector<double> markers;
};

/// Self-contained SVG document. `range` receives the axis ranges used.
std::string render_svg(const LineChart& chart, AxisRange* range = nullptr);

}  // namespace shadow
