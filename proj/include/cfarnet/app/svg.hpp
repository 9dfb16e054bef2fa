#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cfarnet::app {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

struct AxesMeta {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  /// Points at or below this value are clamped on log axes.
  double log_floor = 1e-4;
};

/// Standalone SVG line plot. Output bytes depend only on the inputs.
std::string render_svg_plot(std::span<const Series> series, const AxesMeta& axes);
void emit_svg_plot(std::span<const Series> series, const AxesMeta& axes,
                   const std::filesystem::path& path);

}  // namespace cfarnet::app
