#pragma once

#include <string>
#include <vector>

namespace stimgen::svg {

struct Series {
  std::string label;
  std::vector<double> ys;
};

struct ChartSpec {
  std::string title;
  std::string x_label = "sample";
  std::string y_label = "value";
  double y_min = 0.0;
  double y_max = 1.0;
  std::size_t width = 720;
  std::size_t height = 360;
  std::vector<std::string> annotations;  // rendered under the title
};

// Self-contained SVG line chart: one polyline per series, axes with ticks,
// legend, optional annotation lines. Returns the document as a string.
std::string line_chart(const std::vector<Series>& series, const ChartSpec& spec);

}  // namespace stimgen::svg
