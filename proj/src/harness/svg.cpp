#include "crowdsac/harness/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace crowdsac::harness {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

const char* const kPalette[] = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"};

std::string agent_color(int id) { return kPalette[static_cast<std::size_t>(id) % std::size(kPalette)]; }

}  // namespace

std::string escape_xml(const std::string& text) {
  std::string out;
  for (char c : text) {
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

SvgCanvas::SvgCanvas(double width, double height, double x_min, double x_max, double y_min, double y_max)
    : width_(width), height_(height), x_min_(x_min), x_max_(x_max), y_min_(y_min), y_max_(y_max) {
  if (!(x_max_ > x_min_)) x_max_ = x_min_ + 1.0;
  if (!(y_max_ > y_min_)) y_max_ = y_min_ + 1.0;
}

double SvgCanvas::px(double x) const {
  return kMargin + (x - x_min_) / (x_max_ - x_min_) * (width_ - 2 * kMargin);
}

double SvgCanvas::py(double y) const {
  return height_ - kMargin - (y - y_min_) / (y_max_ - y_min_) * (height_ - 2 * kMargin);
}

void SvgCanvas::axes(const std::string& x_label, const std::string& y_label) {
  const double x0 = kMargin, x1 = width_ - kMargin, y0 = height_ - kMargin, y1 = kMargin;
  items_.push_back("<g class=\"axes\" stroke=\"#000\" stroke-width=\"1\">"
                   "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x1) + "\" y2=\"" +
                   num(y0) + "\"/><line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x0) +
                   "\" y2=\"" + num(y1) + "\"/></g>");
  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double xv = x_min_ + (x_max_ - x_min_) * i / kTicks;
    const double yv = y_min_ + (y_max_ - y_min_) * i / kTicks;
    char xl[32], yl[32];
    std::snprintf(xl, sizeof xl, "%.3g", xv);
    std::snprintf(yl, sizeof yl, "%.3g", yv);
    items_.push_back("<text class=\"tick\" x=\"" + num(px(xv)) + "\" y=\"" + num(y0 + 14) +
                     "\" font-size=\"9\" text-anchor=\"middle\">" + xl + "</text>");
    items_.push_back("<text class=\"tick\" x=\"" + num(x0 - 4) + "\" y=\"" + num(py(yv) + 3) +
                     "\" font-size=\"9\" text-anchor=\"end\">" + yl + "</text>");
  }
  items_.push_back("<text class=\"axis-label\" x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(height_ - 12) +
                   "\" font-size=\"11\" text-anchor=\"middle\">" + escape_xml(x_label) + "</text>");
  items_.push_back("<text class=\"axis-label\" x=\"14\" y=\"" + num((y0 + y1) / 2) +
                   "\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
                   num((y0 + y1) / 2) + ")\">" + escape_xml(y_label) + "</text>");
}

void SvgCanvas::polyline(std::span<const double> xs, std::span<const double> ys, const std::string& color,
                         double stroke_width) {
  if (xs.empty()) return;
  std::string pts;
  for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i) {
    if (i) pts += " ";
    pts += num(px(xs[i])) + "," + num(py(ys[i]));
  }
  items_.push_back("<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" + num(stroke_width) +
                   "\" points=\"" + pts + "\"/>");
}

void SvgCanvas::circle(double x, double y, double radius_px, const std::string& fill, const std::string& stroke) {
  items_.push_back("<circle cx=\"" + num(px(x)) + "\" cy=\"" + num(py(y)) + "\" r=\"" + num(radius_px) +
                   "\" fill=\"" + fill + "\" stroke=\"" + stroke + "\"/>");
}

void SvgCanvas::square(double x, double y, double half_px, const std::string& fill) {
  items_.push_back("<rect class=\"start\" x=\"" + num(px(x) - half_px) + "\" y=\"" + num(py(y) - half_px) +
                   "\" width=\"" + num(2 * half_px) + "\" height=\"" + num(2 * half_px) + "\" fill=\"" + fill +
                   "\"/>");
}

void SvgCanvas::cross(double x, double y, double half_px, const std::string& color) {
  const double cx = px(x), cy = py(y);
  items_.push_back("<g class=\"collision\" stroke=\"" + color + "\" stroke-width=\"2\"><line x1=\"" +
                   num(cx - half_px) + "\" y1=\"" + num(cy - half_px) + "\" x2=\"" + num(cx + half_px) +
                   "\" y2=\"" + num(cy + half_px) + "\"/><line x1=\"" + num(cx - half_px) + "\" y1=\"" +
                   num(cy + half_px) + "\" x2=\"" + num(cx + half_px) + "\" y2=\"" + num(cy - half_px) +
                   "\"/></g>");
}

void SvgCanvas::text(double x, double y, const std::string& body, double size_px, const std::string& color,
                     const std::string& css_class) {
  items_.push_back("<text class=\"" + css_class + "\" x=\"" + num(px(x) + 3) + "\" y=\"" + num(py(y) - 3) +
                   "\" font-size=\"" + num(size_px) + "\" fill=\"" + color + "\">" + escape_xml(body) +
                   "</text>");
}

void SvgCanvas::title(const std::string& body) {
  items_.push_back("<text class=\"title\" x=\"" + num(width_ / 2) +
                   "\" y=\"20\" font-size=\"13\" text-anchor=\"middle\">" + escape_xml(body) + "</text>");
}

std::string SvgCanvas::str() const {
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    num(width_) + "\" height=\"" + num(height_) + "\" viewBox=\"0 0 " + num(width_) + " " +
                    num(height_) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
  for (const auto& item : items_) out += item + "\n";
  return out + "</svg>\n";
}

std::string reward_curve_svg(std::span<const double> rewards, std::size_t window) {
  const auto avg = moving_average(rewards, window);
  double lo = 0.0, hi = 1.0;
  if (!rewards.empty()) {
    lo = *std::min_element(rewards.begin(), rewards.end());
    hi = *std::max_element(rewards.begin(), rewards.end());
  }
  const double span_x = std::max<double>(1.0, static_cast<double>(rewards.size()) - 1.0);
  SvgCanvas canvas(720, 420, 0.0, span_x, lo, hi);
  canvas.title("cumulative reward per episode (" + std::to_string(window) + "-episode moving average)");
  canvas.axes("episode", "reward");
  std::vector<double> xs(rewards.size());
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = static_cast<double>(i);
  canvas.polyline(xs, rewards, "#9ecae1", 0.8);
  canvas.polyline(xs, avg, "#08519c", 2.0);
  return canvas.str();
}

std::string trajectory_svg(std::span<const TrajectoryRow> rows, const RenderOptions& options) {
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  std::map<std::pair<int, int>, std::vector<const TrajectoryRow*>> paths;  // (episode, agent)
  for (const auto& r : rows) {
    x_lo = std::min(x_lo, r.x);
    x_hi = std::max(x_hi, r.x);
    y_lo = std::min(y_lo, r.y);
    y_hi = std::max(y_hi, r.y);
    paths[{r.episode, r.agent_id}].push_back(&r);
  }
  if (rows.empty()) {
    x_lo = y_lo = -5.0;
    x_hi = y_hi = 5.0;
  }
  // Equal aspect: pad the narrower range.
  const double pad = 0.5;
  const double half = std::max(x_hi - x_lo, y_hi - y_lo) / 2.0 + pad;
  const double cx = (x_lo + x_hi) / 2.0, cy = (y_lo + y_hi) / 2.0;
  SvgCanvas canvas(640, 640, cx - half, cx + half, cy - half, cy + half);
  canvas.axes("x (m)", "y (m)");

  for (auto& [key, path] : paths) {
    std::sort(path.begin(), path.end(), [](auto* a, auto* b) { return a->step < b->step; });
    const auto color = agent_color(key.second);
    std::vector<double> xs, ys;
    for (const auto* r : path) {
      xs.push_back(r->x);
      ys.push_back(r->y);
    }
    canvas.polyline(xs, ys, color);
    canvas.square(xs.front(), ys.front(), 4.0, color);
    canvas.circle(xs.back(), ys.back(), 4.0, "none", color);
    for (const auto* r : path) {
      if (options.label_every > 0 && r->step % options.label_every == 0) {
        canvas.text(r->x, r->y, std::to_string(r->step), 8.0, color);
      }
      const auto note = options.annotations.find({r->agent_id, r->step});
      if (note != options.annotations.end()) canvas.text(r->x, r->y - 0.25, note->second, 8.0, "#000", "note");
    }
  }

  // Collision markers where two agents of one episode overlap at a step.
  std::map<std::pair<int, int>, std::vector<const TrajectoryRow*>> by_step;
  for (const auto& r : rows) by_step[{r.episode, r.step}].push_back(&r);
  for (const auto& [key, agents] : by_step) {
    for (std::size_t i = 0; i < agents.size(); ++i) {
      for (std::size_t j = i + 1; j < agents.size(); ++j) {
        const double d = std::hypot(agents[i]->x - agents[j]->x, agents[i]->y - agents[j]->y);
        if (d < 2.0 * options.agent_radius) {
          canvas.cross((agents[i]->x + agents[j]->x) / 2, (agents[i]->y + agents[j]->y) / 2, 6.0, "#000");
        }
      }
    }
  }
  return canvas.str();
}

}  // namespace crowdsac::harness
