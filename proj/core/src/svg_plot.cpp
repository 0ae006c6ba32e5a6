#include "nestco/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "nestco/error.hpp"

namespace nestco::plot {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!(lo <= hi)) lo = 0, hi = 1;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
};

}  // namespace

std::string render_svg(const std::vector<Panel>& panels, double panel_width,
                       double panel_height) {
  if (panels.empty()) throw ValidationError("plot: no panels");
  Range xr, yr;
  for (const auto& p : panels) {
    for (const auto& s : p.series) {
      if (s.x.size() != s.y.size()) {
        throw DimensionError("plot: series '" + s.label + "' has mismatched x and y");
      }
      for (double v : s.x) xr.add(v);
      for (double v : s.y) yr.add(v);
    }
  }
  xr.finish();
  yr.finish();

  const double margin = 40;
  const double plot_w = panel_width - 2 * margin;
  const double plot_h = panel_height - 2 * margin;
  const double total_w = panel_width * static_cast<double>(panels.size());

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(total_w) << "\" height=\""
     << num(panel_height) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < panels.size(); ++i) {
    const auto& panel = panels[i];
    const double ox = panel_width * static_cast<double>(i) + margin;
    const double oy = margin;
    auto px = [&](double x) { return ox + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
    auto py = [&](double y) { return oy + plot_h - (y - yr.lo) / (yr.hi - yr.lo) * plot_h; };

    os << "<g>\n";
    os << "<text x=\"" << num(ox + plot_w / 2) << "\" y=\"" << num(oy - 12)
       << "\" text-anchor=\"middle\" font-size=\"13\">" << escape(panel.title) << "</text>\n";
    os << "<rect x=\"" << num(ox) << "\" y=\"" << num(oy) << "\" width=\"" << num(plot_w)
       << "\" height=\"" << num(plot_h) << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double xv = xr.lo + (xr.hi - xr.lo) * t / 4.0;
      const double yv = yr.lo + (yr.hi - yr.lo) * t / 4.0;
      os << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(oy + plot_h + 14)
         << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
      os << "<text x=\"" << num(ox - 4) << "\" y=\"" << num(py(yv) + 4)
         << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
    }
    double legend_y = oy + 12;
    for (const auto& s : panel.series) {
      if (s.markers) {
        for (std::size_t j = 0; j < s.x.size(); ++j) {
          os << "<circle cx=\"" << num(px(s.x[j])) << "\" cy=\"" << num(py(s.y[j]))
             << "\" r=\"2.2\" fill=\"" << s.color << "\"/>\n";
        }
      } else if (!s.x.empty()) {
        os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.6\"";
        if (s.dashed) os << " stroke-dasharray=\"5,3\"";
        os << " points=\"";
        for (std::size_t j = 0; j < s.x.size(); ++j) {
          os << (j ? " " : "") << num(px(s.x[j])) << "," << num(py(s.y[j]));
        }
        os << "\"/>\n";
      }
      os << "<text x=\"" << num(ox + 6) << "\" y=\"" << num(legend_y) << "\" fill=\"" << s.color
         << "\">" << escape(s.label) << "</text>\n";
      legend_y += 13;
    }
    os << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace nestco::plot
