#pragma once

// Minimal SVG line plots and heatmaps.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "rtpref/core.hpp"

namespace rtpref::svg {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

namespace detail {

inline constexpr double kWidth = 640.0;
inline constexpr double kHeight = 420.0;
inline constexpr double kLeft = 70.0;
inline constexpr double kRight = 160.0;
inline constexpr double kTop = 40.0;
inline constexpr double kBottom = 50.0;

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                   "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    return colors[i % 8];
}

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (const char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

inline void header(std::ostream& out, const std::string& title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
        << escape(title) << "</text>\n";
}

inline void axis_labels(std::ostream& out, const std::string& xlabel, const std::string& ylabel) {
    const double cx = kLeft + (kWidth - kLeft - kRight) / 2;
    const double cy = kTop + (kHeight - kTop - kBottom) / 2;
    out << "<text x=\"" << cx << "\" y=\"" << kHeight - 10
        << "\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n"
        << "<text x=\"16\" y=\"" << cy << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << cy << ")\">" << escape(ylabel) << "</text>\n";
}

}  // namespace detail

/// Polyline per series with point markers and a legend on the right.
inline void line_plot(std::ostream& out, const std::string& title, const std::string& xlabel,
                      const std::string& ylabel, const std::vector<Series>& series) {
    using namespace detail;
    double x0 = kInf, x1 = -kInf, y0 = 0.0, y1 = -kInf;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    }
    if (!(x1 > x0)) {
        x0 = std::isfinite(x0) ? x0 - 1.0 : 0.0;
        x1 = x0 + 2.0;
    }
    if (!(y1 > y0)) y1 = y0 + 1.0;
    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return kTop + ph - (y - y0) / (y1 - y0) * ph; };

    header(out, title);
    out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\""
        << ph << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double xv = x0 + (x1 - x0) * t / 4.0;
        const double yv = y0 + (y1 - y0) * t / 4.0;
        out << "<text x=\"" << px(xv) << "\" y=\"" << kTop + ph + 16
            << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n"
            << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(yv) + 4
            << "\" text-anchor=\"end\">" << num(yv) << "</text>\n"
            << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + pw << "\" y1=\"" << py(yv)
            << "\" y2=\"" << py(yv) << "\" stroke=\"#ddd\"/>\n";
    }
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        out << "<polyline fill=\"none\" stroke=\"" << palette(k) << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) {
                out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
            }
        }
        out << "\"/>\n";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) {
                out << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i])
                    << "\" r=\"3\" fill=\"" << palette(k) << "\"/>\n";
            }
        }
        const double ly = kTop + 14 + 18.0 * static_cast<double>(k);
        out << "<line x1=\"" << kWidth - kRight + 10 << "\" x2=\"" << kWidth - kRight + 30
            << "\" y1=\"" << ly << "\" y2=\"" << ly << "\" stroke=\"" << palette(k)
            << "\" stroke-width=\"2\"/>\n"
            << "<text x=\"" << kWidth - kRight + 34 << "\" y=\"" << ly + 4 << "\">"
            << escape(s.name) << "</text>\n";
    }
    axis_labels(out, xlabel, ylabel);
    out << "</svg>\n";
}

/// Cells coloured white (0) to dark red (max); NaN cells are grey.
/// values(row, col) pairs with (ys[row], xs[col]).
inline void heatmap(std::ostream& out, const std::string& title, const std::string& xlabel,
                    const std::string& ylabel, const std::vector<double>& xs,
                    const std::vector<double>& ys, const Matrix& values) {
    using namespace detail;
    double vmax = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (std::isfinite(values.data()[i])) vmax = std::max(vmax, values.data()[i]);
    }
    if (!(vmax > 0.0)) vmax = 1.0;
    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    const double cw = pw / std::max<double>(1.0, static_cast<double>(xs.size()));
    const double ch = ph / std::max<double>(1.0, static_cast<double>(ys.size()));
    header(out, title);
    for (std::size_t r = 0; r < ys.size(); ++r) {
        for (std::size_t c = 0; c < xs.size(); ++c) {
            const double v = values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
            const double x = kLeft + cw * static_cast<double>(c);
            const double y = kTop + ph - ch * static_cast<double>(r + 1);
            std::string fill = "#bbbbbb";
            if (std::isfinite(v)) {
                const double t = std::clamp(v / vmax, 0.0, 1.0);
                char buf[16];
                std::snprintf(buf, sizeof buf, "#%02x%02x%02x", 255 - static_cast<int>(75 * t),
                              static_cast<int>(255 * (1 - t)), static_cast<int>(255 * (1 - t)));
                fill = buf;
            }
            out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cw << "\" height=\""
                << ch << "\" fill=\"" << fill << "\" stroke=\"white\"/>\n"
                << "<text x=\"" << x + cw / 2 << "\" y=\"" << y + ch / 2 + 4
                << "\" text-anchor=\"middle\">" << (std::isfinite(v) ? num(v) : "n/a")
                << "</text>\n";
        }
    }
    for (std::size_t c = 0; c < xs.size(); ++c) {
        out << "<text x=\"" << kLeft + cw * (static_cast<double>(c) + 0.5) << "\" y=\""
            << kTop + ph + 16 << "\" text-anchor=\"middle\">" << num(xs[c]) << "</text>\n";
    }
    for (std::size_t r = 0; r < ys.size(); ++r) {
        out << "<text x=\"" << kLeft - 6 << "\" y=\""
            << kTop + ph - ch * (static_cast<double>(r) + 0.5) + 4
            << "\" text-anchor=\"end\">" << num(ys[r]) << "</text>\n";
    }
    out << "<text x=\"" << kWidth - kRight + 10 << "\" y=\"" << kTop + 14
        << "\">max " << num(vmax) << "</text>\n";
    axis_labels(out, xlabel, ylabel);
    out << "</svg>\n";
}

}  // namespace rtpref::svg
