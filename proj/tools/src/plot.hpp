#pragma once

// Self-contained SVG scatter plots with an optional transition overlay.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "snapdm/transition.hpp"

namespace snapdm::cli {

struct PlotSeries {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotOptions {
  // Adds a generation-time comment; off for byte-reproducible output.
  bool timestamp = true;
  // Draws the fitted tanh curve (tanh-fit only) and a vertical p_c marker.
  std::optional<TransitionReport> report;
};

// Renders `series` as SVG text: one <circle> per point, one axes <path>,
// a second <path> for a fitted tanh curve and a <line class="pc"> marker.
std::string render_svg(const PlotSeries& series, const PlotOptions& options = {});

// Writes the SVG to `svg_path` and the points as CSV next to it (same stem,
// .csv extension). Throws EmptySeries for a series without points.
void emit_plot(const PlotSeries& series, const std::filesystem::path& svg_path,
               const PlotOptions& options = {});

}  // namespace snapdm::cli
