#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "crowdsac/harness/metrics.hpp"

namespace crowdsac::harness {

/// Minimal SVG builder over a data-space viewport (y grows upward).
class SvgCanvas {
 public:
  SvgCanvas(double width, double height, double x_min, double x_max, double y_min, double y_max);

  void axes(const std::string& x_label, const std::string& y_label);
  void polyline(std::span<const double> xs, std::span<const double> ys, const std::string& color,
                double stroke_width = 1.5);
  void circle(double x, double y, double radius_px, const std::string& fill, const std::string& stroke = "none");
  void square(double x, double y, double half_px, const std::string& fill);
  void cross(double x, double y, double half_px, const std::string& color);
  void text(double x, double y, const std::string& body, double size_px = 9.0,
            const std::string& color = "#333", const std::string& css_class = "label");
  void title(const std::string& body);

  std::string str() const;

 private:
  double px(double x) const;
  double py(double y) const;

  double width_, height_, x_min_, x_max_, y_min_, y_max_;
  static constexpr double kMargin = 50.0;
  std::vector<std::string> items_;
};

std::string escape_xml(const std::string& text);

// Raw reward per episode plus its moving average.
std::string reward_curve_svg(std::span<const double> rewards, std::size_t window);

struct RenderOptions {
  double agent_radius = 0.3;
  // Label every k-th step (1 labels every step).
  int label_every = 1;
  // Optional per-step annotations keyed by (agent_id, step).
  std::map<std::pair<int, int>, std::string> annotations;
};

// Paths with step labels, start squares, end circles and collision crosses.
std::string trajectory_svg(std::span<const TrajectoryRow> rows, const RenderOptions& options = {});

}  // namespace crowdsac::harness
