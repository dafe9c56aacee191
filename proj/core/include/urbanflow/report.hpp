#pragma once

#include <string>
#include <vector>

namespace urbanflow::report {

/// Deterministic static-SVG plots for the pipeline's report stage.

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  int width = 640;
  int height = 480;
};

/// Scatter plot; one circle per point, one color per series, with a y=x
/// guide line when `diagonal` is set.
std::string scatter_svg(const std::vector<Series>& series, const PlotOptions& opts,
                        bool diagonal = false);

/// Line plot (used for KDE overlays).
std::string lines_svg(const std::vector<Series>& series, const PlotOptions& opts);

/// Grouped bar chart: one group per `group_labels` entry, one bar per
/// `bar_labels` entry, values in row-major groups x bars order. A
/// horizontal guide is drawn at `guide` when it is finite.
std::string grouped_bars_svg(const std::vector<std::string>& group_labels,
                             const std::vector<std::string>& bar_labels,
                             const std::vector<std::vector<double>>& values,
                             const PlotOptions& opts, double guide);

/// Heatmap of a matrix with row/column labels; values mapped over a
/// blue-to-red ramp between the matrix min and max.
std::string heatmap_svg(const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels,
                        const std::vector<std::vector<double>>& values,
                        const PlotOptions& opts);

}  // namespace urbanflow::report
