#ifndef NETLATTICE_PLOT_HPP
#define NETLATTICE_PLOT_HPP

#include <span>
#include <string>
#include <vector>

namespace netlattice {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f77b4";
    bool dashed = false;
    bool markers = false;  ///< circles at each point in addition to the line
    std::vector<double> yerr;  ///< optional symmetric error bars
};

struct AxesSpec {
    std::string title;
    std::string xlabel;
    std::string ylabel;
    bool log_x = false;
    bool log_y = false;
    int width = 640;
    int height = 420;
};

/// Self-contained SVG. Points that are non-finite, or non-positive on a log
/// axis, are skipped. Output depends only on the inputs.
/// EmptySeries if there are no series or a series has no points.
std::string render_svg(std::span<const PlotSeries> series, const AxesSpec& axes);

/// render_svg written to `path`; IoFailure if the file cannot be written.
void emit_plot(std::span<const PlotSeries> series, const AxesSpec& axes, const std::string& path);

}  // namespace netlattice

#endif
