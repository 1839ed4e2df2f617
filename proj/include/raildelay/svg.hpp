#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace raildelay::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f6fb4";
    bool step = false;   // step-after rendering for survival curves
    bool dashed = false;
};

// A single x/y panel with axes, ticks, a legend, and optional vertical
// marker lines. Output is plain standalone SVG with fixed-precision
// coordinates, so a given plot is byte-stable.
struct Plot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    std::vector<double> vlines;
    double width = 640.0;
    double height = 420.0;
    bool y_from_zero = false;
};

void write_plot(std::ostream& out, const Plot& plot);

// Panels laid out in a grid (used for the per-fold comparison figure).
void write_panel_grid(std::ostream& out, const std::vector<Plot>& panels, int columns);

} // namespace raildelay::svg
