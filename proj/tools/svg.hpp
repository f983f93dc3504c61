#pragma once

#include <string>
#include <vector>

namespace vsensor::cli {

struct SeriesPlot {
  std::string title;
  std::vector<std::string> labels;  // x tick text per point (timestamps)
  std::vector<double> actual;       // NaN marks a gap
  std::vector<double> predicted;
};

// Standalone SVG with exactly two <path> elements (actual, predicted).
// Output depends only on the input values.
std::string render_series_svg(const SeriesPlot& plot);

}  // namespace vsensor::cli
