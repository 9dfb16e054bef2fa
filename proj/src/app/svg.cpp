#include "cfarnet/app/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace cfarnet::app {

namespace {

constexpr double kWidth = 520, kHeight = 380;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 55;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string fmt(double v, const char* spec = "%.2f") {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Axis {
  bool log = false;
  double floor = 1e-4;
  double lo = 0.0, hi = 1.0;  // in transformed units

  double transform(double v) const { return log ? std::log10(std::max(v, floor)) : v; }

  void fit(const std::vector<double>& values) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (double v : values) {
      if (!std::isfinite(v)) continue;
      const double t = transform(v);
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (log) {
      lo = std::floor(lo);
      hi = std::ceil(hi);
    }
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
  }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      for (double d = lo; d <= hi + 1e-9; d += 1.0) out.push_back(d);
      return out;
    }
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
      if (m * mag >= raw) {
        step = m * mag;
        break;
      }
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) out.push_back(t);
    return out;
  }

  std::string label(double t) const {
    if (log) return "1e" + fmt(t, "%.0f");
    return fmt(std::abs(t) < 1e-12 ? 0.0 : t, "%g");
  }
};

}  // namespace

std::string render_svg_plot(std::span<const Series> series, const AxesMeta& axes) {
  if (series.empty()) throw std::invalid_argument("emit_svg_plot: no series to plot");
  Axis ax{axes.log_x, axes.log_floor}, ay{axes.log_y, axes.log_floor};
  std::vector<double> xs, ys;
  for (const Series& s : series)
    for (const auto& [x, y] : s.points) {
      xs.push_back(x);
      ys.push_back(y);
    }
  ax.fit(xs);
  ay.fit(ys);

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const auto px = [&](double x) { return kLeft + (ax.transform(x) - ax.lo) / (ax.hi - ax.lo) * pw; };
  const auto py = [&](double y) { return kTop + ph - (ay.transform(y) - ay.lo) / (ay.hi - ay.lo) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"13\">"
     << escape(axes.title) << "</text>\n";
  os << "<rect x=\"" << fmt(kLeft) << "\" y=\"" << fmt(kTop) << "\" width=\"" << fmt(pw)
     << "\" height=\"" << fmt(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (double t : ax.ticks()) {
    const double x = kLeft + (t - ax.lo) / (ax.hi - ax.lo) * pw;
    os << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(kTop + ph) << "\" x2=\"" << fmt(x) << "\" y2=\""
       << fmt(kTop + ph + 5) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(kTop + ph + 18) << "\" text-anchor=\"middle\">"
       << ax.label(t) << "</text>\n";
  }
  for (double t : ay.ticks()) {
    const double y = kTop + ph - (t - ay.lo) / (ay.hi - ay.lo) * ph;
    os << "<line x1=\"" << fmt(kLeft - 5) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(kLeft) << "\" y2=\""
       << fmt(y) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << fmt(kLeft - 8) << "\" y=\"" << fmt(y + 4) << "\" text-anchor=\"end\">"
       << ay.label(t) << "</text>\n";
  }
  os << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"" << fmt(kHeight - 12)
     << "\" text-anchor=\"middle\">" << escape(axes.x_label) << "</text>\n";
  os << "<text x=\"16\" y=\"" << fmt(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << fmt(kTop + ph / 2) << ")\">" << escape(axes.y_label) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kPalette[k % std::size(kPalette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (const auto& [x, y] : series[k].points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      os << (first ? "" : " ") << fmt(px(x)) << ',' << fmt(py(y));
      first = false;
    }
    os << "\"/>\n";
  }

  os << "<g class=\"legend\">\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double y = kTop + 12 + 18 * static_cast<double>(k);
    const double x = kLeft + pw + 12;
    os << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(x + 22) << "\" y2=\""
       << fmt(y) << "\" stroke=\"" << kPalette[k % std::size(kPalette)] << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << fmt(x + 28) << "\" y=\"" << fmt(y + 4) << "\">" << escape(series[k].label)
       << "</text>\n";
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

void emit_svg_plot(std::span<const Series> series, const AxesMeta& axes,
                   const std::filesystem::path& path) {
  const std::string svg = render_svg_plot(series, axes);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << svg;
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace cfarnet::app
