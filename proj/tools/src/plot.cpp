#include "plot.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <sstream>

#include "snapdm/error.hpp"
#include "text_io.hpp"

namespace snapdm::cli {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 620.0;
constexpr double kTop = 30.0;
constexpr double kBottom = 350.0;
constexpr int kCurveSamples = 200;

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
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

struct Range {
  double lo;
  double hi;

  void widen_if_flat() {
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(lo))) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
  double map(double v, double a, double b) const { return a + (v - lo) / (hi - lo) * (b - a); }
};

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string render_svg(const PlotSeries& series, const PlotOptions& options) {
  if (series.x.empty()) throw Error(ErrorKind::EmptySeries, "nothing to plot in '" + series.title + "'");
  if (series.x.size() != series.y.size())
    throw Error(ErrorKind::DimensionMismatch, "plot series has unequal x and y lengths");

  const auto& report = options.report;
  const bool curve = report && report->method == DetectionMethod::TanhFit;

  auto [xmin, xmax] = std::minmax_element(series.x.begin(), series.x.end());
  auto [ymin, ymax] = std::minmax_element(series.y.begin(), series.y.end());
  Range xr{*xmin, *xmax};
  Range yr{*ymin, *ymax};
  if (report) {
    xr.lo = std::min(xr.lo, report->p_c);
    xr.hi = std::max(xr.hi, report->p_c);
  }
  xr.widen_if_flat();

  std::vector<std::pair<double, double>> fitted;
  if (curve) {
    for (int i = 0; i < kCurveSamples; ++i) {
      const double x = xr.lo + (xr.hi - xr.lo) * i / (kCurveSamples - 1);
      const double y = tanh_model(x, report->amplitude, report->p_c, report->width, report->offset);
      fitted.emplace_back(x, y);
      yr.lo = std::min(yr.lo, y);
      yr.hi = std::max(yr.hi, y);
    }
  }
  yr.widen_if_flat();
  const double pad = 0.05 * (yr.hi - yr.lo);
  yr.lo -= pad;
  yr.hi += pad;

  auto sx = [&](double x) { return xr.map(x, kLeft, kRight); };
  auto sy = [&](double y) { return yr.map(y, kBottom, kTop); };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  if (options.timestamp) svg << "<!-- generated " << utc_now() << " -->\n";
  svg << "<title>" << escape(series.title) << "</title>\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<path class=\"axes\" d=\"M" << px(kLeft) << ',' << px(kTop) << " V" << px(kBottom) << " H"
      << px(kRight) << "\" fill=\"none\" stroke=\"black\"/>\n";

  svg << "<text x=\"" << px(kLeft) << "\" y=\"" << px(kBottom + 16) << "\" text-anchor=\"middle\">"
      << format_number(xr.lo) << "</text>\n";
  svg << "<text x=\"" << px(kRight) << "\" y=\"" << px(kBottom + 16) << "\" text-anchor=\"middle\">"
      << format_number(xr.hi) << "</text>\n";
  svg << "<text x=\"" << px(kLeft - 6) << "\" y=\"" << px(kBottom) << "\" text-anchor=\"end\">"
      << px(yr.lo) << "</text>\n";
  svg << "<text x=\"" << px(kLeft - 6) << "\" y=\"" << px(kTop + 4) << "\" text-anchor=\"end\">"
      << px(yr.hi) << "</text>\n";
  svg << "<text x=\"" << px(0.5 * (kLeft + kRight)) << "\" y=\"" << px(kHeight - 12)
      << "\" text-anchor=\"middle\">" << escape(series.x_label) << "</text>\n";
  svg << "<text x=\"16\" y=\"" << px(0.5 * (kTop + kBottom)) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << px(0.5 * (kTop + kBottom)) << ")\">" << escape(series.y_label) << "</text>\n";

  for (std::size_t i = 0; i < series.x.size(); ++i)
    svg << "<circle cx=\"" << px(sx(series.x[i])) << "\" cy=\"" << px(sy(series.y[i]))
        << "\" r=\"3.5\" fill=\"#c0392b\"/>\n";

  if (curve) {
    svg << "<path class=\"fit\" d=\"";
    for (std::size_t i = 0; i < fitted.size(); ++i)
      svg << (i == 0 ? "M" : " L") << px(sx(fitted[i].first)) << ',' << px(sy(fitted[i].second));
    svg << "\" fill=\"none\" stroke=\"#2c3e50\" stroke-width=\"1.5\"/>\n";
  }
  if (report) {
    const double x = sx(report->p_c);
    svg << "<line class=\"pc\" x1=\"" << px(x) << "\" y1=\"" << px(kTop) << "\" x2=\"" << px(x) << "\" y2=\""
        << px(kBottom) << "\" stroke=\"#2980b9\" stroke-dasharray=\"6 4\"/>\n";
    svg << "<text x=\"" << px(x + 4) << "\" y=\"" << px(kTop + 12) << "\">p_c = " << format_number(report->p_c)
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_plot(const PlotSeries& series, const std::filesystem::path& svg_path, const PlotOptions& options) {
  const std::string svg = render_svg(series, options);
  std::string csv = series.x_label + "," + series.y_label + "\n";
  for (std::size_t i = 0; i < series.x.size(); ++i)
    csv += format_number(series.x[i]) + "," + format_number(series.y[i]) + "\n";
  write_text_file(svg_path, svg);
  auto csv_path = svg_path;
  csv_path.replace_extension(".csv");
  write_text_file(csv_path, csv);
}

}  // namespace snapdm::cli
