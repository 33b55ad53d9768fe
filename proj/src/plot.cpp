#include "shadow/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace shadow {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 160.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

AxisRange data_range(const std::vector<Series>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!(x0 <= x1)) return {};
  if (x0 == x1) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  if (y0 == y1) {
    const double pad = y0 == 0.0 ? 0.5 : 0.05 * std::abs(y0);
    y0 -= pad;
    y1 += pad;
  }
  return {x0, x1, y0, y1};
}

std::string render_svg(const LineChart& chart, AxisRange* range_out) {
  const AxisRange r = data_range(chart.series);
  if (range_out) *range_out = r;
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - r.x_min) / (r.x_max - r.x_min) * pw; };
  auto sy = [&](double y) { return kTop + ph - (y - r.y_min) / (r.y_max - r.y_min) * ph; };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(chart.title)
     << "</text>\n";

  // axes, ticks and grid
  os << "<g stroke=\"#444\" fill=\"none\"><rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw
     << "\" height=\"" << ph << "\"/></g>\n";
  for (int i = 0; i <= 5; ++i) {
    const double fx = r.x_min + (r.x_max - r.x_min) * i / 5.0;
    const double fy = r.y_min + (r.y_max - r.y_min) * i / 5.0;
    os << "<line x1=\"" << num(sx(fx)) << "\" y1=\"" << kTop << "\" x2=\"" << num(sx(fx)) << "\" y2=\"" << kTop + ph
       << "\" stroke=\"#ddd\"/>\n"
       << "<text x=\"" << num(sx(fx)) << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">" << num(fx)
       << "</text>\n"
       << "<line x1=\"" << kLeft << "\" y1=\"" << num(sy(fy)) << "\" x2=\"" << kLeft + pw << "\" y2=\"" << num(sy(fy))
       << "\" stroke=\"#ddd\"/>\n"
       << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(sy(fy) + 4) << "\" text-anchor=\"end\">" << num(fy)
       << "</text>\n";
  }
  os << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
     << escape(chart.x_label) << "</text>\n"
     << "<text transform=\"translate(16 " << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(chart.y_label) << "</text>\n";

  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const Series& s = chart.series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      os << num(sx(s.x[i])) << ',' << num(sy(s.y[i])) << ' ';
    }
    os << "\"/>\n";
    const double ly = kTop + 14 + 18.0 * static_cast<double>(k);
    os << "<line x1=\"" << kLeft + pw + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << kLeft + pw + 32 << "\" y2=\""
       << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << kLeft + pw + 38 << "\" y=\"" << ly << "\">" << escape(s.name) << "</text>\n";
  }

  if (!chart.series.empty() && !chart.markers.empty()) {
    const Series& s = chart.series.front();
    for (double m : chart.markers) {
      auto it = std::find(s.x.begin(), s.x.end(), m);
      if (it == s.x.end()) continue;
      const double y = s.y[static_cast<std::size_t>(it - s.x.begin())];
      os << "<circle cx=\"" << num(sx(m)) << "\" cy=\"" << num(sy(y)) << "\" r=\"3\" fill=\"red\"/>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace shadow
