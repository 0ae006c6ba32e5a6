#pragma once

#include <string>
#include <vector>

namespace nestco::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  /// Scatter markers instead of a connected line.
  bool markers = false;
  bool dashed = false;
};

struct Panel {
  std::string title;
  std::vector<Series> series;
};

/// Renders panels side by side in one row. All panels share the data range
/// so curves are visually comparable.
std::string render_svg(const std::vector<Panel>& panels, double panel_width = 320,
                       double panel_height = 260);

}  // namespace nestco::plot
