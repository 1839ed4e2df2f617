#include "raildelay/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "raildelay/jsonio.hpp"

namespace raildelay::svg {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

struct Range {
    double lo = 0.0, hi = 1.0;
};

Range data_range(const Plot& plot, bool x_axis) {
    Range r;
    bool first = true;
    for (const auto& s : plot.series) {
        const auto& vals = x_axis ? s.x : s.y;
        for (double v : vals) {
            if (first) {
                r.lo = r.hi = v;
                first = false;
            } else {
                r.lo = std::min(r.lo, v);
                r.hi = std::max(r.hi, v);
            }
        }
    }
    if (!x_axis && plot.y_from_zero) r.lo = std::min(r.lo, 0.0);
    if (first) r = {0.0, 1.0};
    if (r.hi - r.lo < 1e-12) {
        r.lo -= 0.5;
        r.hi += 0.5;
    }
    return r;
}

double nice_step(double span) {
    const double raw = span / 6.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (raw <= m * mag) return m * mag;
    return 10.0 * mag;
}

void render_panel(std::ostream& out, const Plot& plot, double x0, double y0) {
    const double ml = 58, mr = 16, mt = 34, mb = 44;
    const double pw = plot.width - ml - mr;
    const double ph = plot.height - mt - mb;
    const Range xr = data_range(plot, true);
    const Range yr = data_range(plot, false);
    auto px = [&](double x) { return x0 + ml + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto py = [&](double y) { return y0 + mt + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

    out << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
    out << "<rect x=\"" << fmt(x0 + ml) << "\" y=\"" << fmt(y0 + mt) << "\" width=\""
        << fmt(pw) << "\" height=\"" << fmt(ph)
        << "\" fill=\"white\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
    if (!plot.title.empty())
        out << "<text x=\"" << fmt(x0 + ml + pw / 2) << "\" y=\"" << fmt(y0 + 18)
            << "\" text-anchor=\"middle\" font-size=\"13\">" << json_escape(plot.title)
            << "</text>\n";

    // Ticks and grid.
    const double xs = nice_step(xr.hi - xr.lo);
    for (double t = std::ceil(xr.lo / xs) * xs; t <= xr.hi + 1e-9; t += xs) {
        out << "<line x1=\"" << fmt(px(t)) << "\" y1=\"" << fmt(y0 + mt) << "\" x2=\""
            << fmt(px(t)) << "\" y2=\"" << fmt(y0 + mt + ph)
            << "\" stroke=\"#dddddd\" stroke-width=\"0.6\"/>\n";
        out << "<text x=\"" << fmt(px(t)) << "\" y=\"" << fmt(y0 + mt + ph + 14)
            << "\" text-anchor=\"middle\">" << fmt_tick(t) << "</text>\n";
    }
    const double ys = nice_step(yr.hi - yr.lo);
    for (double t = std::ceil(yr.lo / ys) * ys; t <= yr.hi + 1e-9; t += ys) {
        out << "<line x1=\"" << fmt(x0 + ml) << "\" y1=\"" << fmt(py(t)) << "\" x2=\""
            << fmt(x0 + ml + pw) << "\" y2=\"" << fmt(py(t))
            << "\" stroke=\"#dddddd\" stroke-width=\"0.6\"/>\n";
        out << "<text x=\"" << fmt(x0 + ml - 6) << "\" y=\"" << fmt(py(t) + 3.5)
            << "\" text-anchor=\"end\">" << fmt_tick(t) << "</text>\n";
    }
    if (!plot.x_label.empty())
        out << "<text x=\"" << fmt(x0 + ml + pw / 2) << "\" y=\""
            << fmt(y0 + plot.height - 10) << "\" text-anchor=\"middle\">"
            << json_escape(plot.x_label) << "</text>\n";
    if (!plot.y_label.empty())
        out << "<text x=\"" << fmt(x0 + 14) << "\" y=\"" << fmt(y0 + mt + ph / 2)
            << "\" text-anchor=\"middle\" transform=\"rotate(-90 " << fmt(x0 + 14) << ' '
            << fmt(y0 + mt + ph / 2) << ")\">" << json_escape(plot.y_label) << "</text>\n";

    for (double v : plot.vlines)
        out << "<line x1=\"" << fmt(px(v)) << "\" y1=\"" << fmt(y0 + mt) << "\" x2=\""
            << fmt(px(v)) << "\" y2=\"" << fmt(y0 + mt + ph)
            << "\" stroke=\"#b44d4d\" stroke-width=\"1\" stroke-dasharray=\"5,3\"/>\n";

    for (const auto& s : plot.series) {
        if (s.x.empty()) continue;
        out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.6\"";
        if (s.dashed) out << " stroke-dasharray=\"6,3\"";
        out << " points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (i) {
                out << ' ';
                if (s.step) out << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i - 1])) << ' ';
            }
            out << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i]));
        }
        out << "\"/>\n";
    }

    // Legend, top-right inside the panel.
    double ly = y0 + mt + 14;
    for (const auto& s : plot.series) {
        if (s.label.empty()) continue;
        const double lx = x0 + ml + pw - 150;
        out << "<line x1=\"" << fmt(lx) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\""
            << fmt(lx + 22) << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << s.color
            << "\" stroke-width=\"1.6\"" << (s.dashed ? " stroke-dasharray=\"6,3\"" : "")
            << "/>\n";
        out << "<text x=\"" << fmt(lx + 28) << "\" y=\"" << fmt(ly) << "\">"
            << json_escape(s.label) << "</text>\n";
        ly += 15;
    }
    out << "</g>\n";
}

} // namespace

void write_plot(std::ostream& out, const Plot& plot) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(plot.width)
        << "\" height=\"" << fmt(plot.height) << "\" viewBox=\"0 0 " << fmt(plot.width) << ' '
        << fmt(plot.height) << "\">\n";
    render_panel(out, plot, 0.0, 0.0);
    out << "</svg>\n";
}

void write_panel_grid(std::ostream& out, const std::vector<Plot>& panels, int columns) {
    if (panels.empty()) return;
    const int cols = std::max(1, columns);
    const int rows = (static_cast<int>(panels.size()) + cols - 1) / cols;
    const double pw = panels.front().width;
    const double phh = panels.front().height;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(pw * cols)
        << "\" height=\"" << fmt(phh * rows) << "\" viewBox=\"0 0 " << fmt(pw * cols) << ' '
        << fmt(phh * rows) << "\">\n";
    for (std::size_t i = 0; i < panels.size(); ++i) {
        const int r = static_cast<int>(i) / cols;
        const int c = static_cast<int>(i) % cols;
        render_panel(out, panels[i], c * pw, r * phh);
    }
    out << "</svg>\n";
}

} // namespace raildelay::svg
