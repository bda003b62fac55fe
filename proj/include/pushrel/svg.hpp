#pragma once

#include <string>
#include <vector>

#include "pushrel/scene.hpp"

namespace pushrel {

// Minimal line-plot writer; one polyline per named series.
struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
  bool dashed = false;
};

void write_line_plot_svg(const std::string& path, const std::string& title,
                         const std::string& x_label, const std::string& y_label,
                         const std::vector<PlotSeries>& series);

// Renders real trajectories as solid trails and predicted ones as dashed
// trails, with discs at the final states and the pusher path in black.
void write_trajectory_svg(const std::string& path, const Trajectory& real,
                          const Trajectory& predicted);

}  // namespace pushrel
