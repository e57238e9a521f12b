#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace lagns {

struct PlotSeries {
    std::vector<double> x, y;
};

/// Minimal line plot (RGB PNG, uncompressed deflate stream).  Axes are the
/// data bounding box with a small margin; series colors cycle.
void write_line_plot_png(const std::filesystem::path& path, const std::vector<PlotSeries>& series,
                         int width = 640, int height = 400, bool log_y = false);

/// Closed marker polygons over the periodic box [0,L)^2, one color per frame.
void write_polygon_frames_png(const std::filesystem::path& path,
                              const std::vector<std::vector<std::array<double, 2>>>& frames,
                              double L, int size = 480);

} // namespace lagns
