#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "nmmb/errors.hpp"

namespace nmmb {

struct PlotSeries {
    std::string name;
    std::vector<double> x, y;
};

namespace detail {

inline std::string fmt_tick(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

inline const char* plot_color(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    return colors[i % 8];
}

} // namespace detail

/// Render a polyline chart as a standalone SVG document. With log_y the
/// ordinate is log10, clamped below at 1e-16.
inline std::string render_svg(const std::string& title, const std::string& x_label,
                              const std::string& y_label, const std::vector<PlotSeries>& series,
                              bool log_y) {
    if (series.empty()) throw domain_error("render_svg: nothing selected to plot");
    for (const auto& s : series)
        if (s.x.size() != s.y.size() || s.x.empty())
            throw domain_error("render_svg: malformed series " + s.name);

    const double width = 860, height = 520;
    const double ml = 80, mr = 160, mt = 42, mb = 56;
    const double pw = width - ml - mr, ph = height - mt - mb;

    auto ty = [&](double y) { return log_y ? std::log10(std::max(y, 1e-16)) : y; };

    double xmin = series[0].x.front(), xmax = xmin, ymin = ty(series[0].y.front()), ymax = ymin;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, ty(s.y[i]));
            ymax = std::max(ymax, ty(s.y[i]));
        }
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) {
        ymax += 0.5;
        ymin -= 0.5;
    }
    const double ypad = 0.04 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + ph - (ty(y) - ymin) / (ymax - ymin) * ph; };

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"860\" height=\"520\" "
           "viewBox=\"0 0 860 520\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"860\" height=\"520\" fill=\"white\"/>\n";
    svg += "<text x=\"" + detail::fmt_tick(ml) + "\" y=\"24\" font-family=\"sans-serif\" "
           "font-size=\"16\">" + title + "</text>\n";

    // frame
    svg += "<rect x=\"" + detail::fmt_tick(ml) + "\" y=\"" + detail::fmt_tick(mt) + "\" width=\"" +
           detail::fmt_tick(pw) + "\" height=\"" + detail::fmt_tick(ph) +
           "\" fill=\"none\" stroke=\"black\"/>\n";

    // ticks
    const int nticks = 5;
    for (int i = 0; i <= nticks; ++i) {
        const double fx = xmin + (xmax - xmin) * i / nticks;
        const double gx = px(fx);
        svg += "<line x1=\"" + detail::fmt_tick(gx) + "\" y1=\"" + detail::fmt_tick(mt + ph) +
               "\" x2=\"" + detail::fmt_tick(gx) + "\" y2=\"" + detail::fmt_tick(mt + ph + 5) +
               "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + detail::fmt_tick(gx) + "\" y=\"" + detail::fmt_tick(mt + ph + 20) +
               "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" +
               detail::fmt_tick(fx) + "</text>\n";

        const double fy = ymin + (ymax - ymin) * i / nticks;
        const double gy = mt + ph - (fy - ymin) / (ymax - ymin) * ph;
        svg += "<line x1=\"" + detail::fmt_tick(ml - 5) + "\" y1=\"" + detail::fmt_tick(gy) +
               "\" x2=\"" + detail::fmt_tick(ml) + "\" y2=\"" + detail::fmt_tick(gy) +
               "\" stroke=\"black\"/>\n";
        const std::string lab = log_y ? ("1e" + detail::fmt_tick(fy)) : detail::fmt_tick(fy);
        svg += "<text x=\"" + detail::fmt_tick(ml - 8) + "\" y=\"" + detail::fmt_tick(gy + 4) +
               "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" + lab +
               "</text>\n";
    }

    svg += "<text x=\"" + detail::fmt_tick(ml + pw / 2) + "\" y=\"" + detail::fmt_tick(height - 12) +
           "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">" + x_label +
           "</text>\n";
    svg += "<text x=\"18\" y=\"" + detail::fmt_tick(mt + ph / 2) +
           "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" "
           "transform=\"rotate(-90 18 " +
           detail::fmt_tick(mt + ph / 2) + ")\">" + y_label + "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        std::string pts;
        for (std::size_t i = 0; i < series[s].x.size(); ++i) {
            pts += detail::fmt_tick(px(series[s].x[i]));
            pts += ",";
            pts += detail::fmt_tick(py(series[s].y[i]));
            pts += " ";
        }
        svg += "<polyline fill=\"none\" stroke=\"";
        svg += detail::plot_color(s);
        svg += "\" stroke-width=\"1.3\" points=\"" + pts + "\"/>\n";
        const double ly = mt + 16 + 18 * static_cast<double>(s);
        svg += "<line x1=\"" + detail::fmt_tick(ml + pw + 10) + "\" y1=\"" + detail::fmt_tick(ly - 4) +
               "\" x2=\"" + detail::fmt_tick(ml + pw + 34) + "\" y2=\"" + detail::fmt_tick(ly - 4) +
               "\" stroke=\"" + detail::plot_color(s) + "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + detail::fmt_tick(ml + pw + 40) + "\" y=\"" + detail::fmt_tick(ly) +
               "\" font-family=\"sans-serif\" font-size=\"12\">" + series[s].name + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

inline void write_svg(const std::filesystem::path& path, const std::string& svg) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("write_svg: cannot open " + path.string());
    out.write(svg.data(), static_cast<std::streamsize>(svg.size()));
    if (!out) throw io_error("write_svg: short write to " + path.string());
}

} // namespace nmmb
