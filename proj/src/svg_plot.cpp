#include "selrec/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

#include "selrec/errors.hpp"

namespace selrec {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 64.0;
constexpr double kRight = 700.0;
constexpr double kTop = 48.0;
constexpr double kBottom = 432.0;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                    "#9467bd", "#ff7f0e", "#8c564b"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

// Tick labels carry more digits than pixel coordinates but stay fixed-format.
std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

std::string escape(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

void write_line_plot(std::ostream& out, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     std::span<const PlotSeries> series,
                     std::optional<std::pair<double, double>> y_range) {
    double x_min = std::numeric_limits<double>::infinity();
    double x_max = -x_min;
    double y_min = x_min;
    double y_max = -x_min;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) {
            throw InvalidValue("plot series '" + s.label + "' has mismatched x/y lengths");
        }
        for (double v : s.x) {
            x_min = std::min(x_min, v);
            x_max = std::max(x_max, v);
        }
        for (double v : s.y) {
            y_min = std::min(y_min, v);
            y_max = std::max(y_max, v);
        }
    }
    if (!(x_min <= x_max)) {
        x_min = 0.0;
        x_max = 1.0;
    }
    if (y_range) {
        y_min = y_range->first;
        y_max = y_range->second;
    }
    if (!(y_min < y_max)) {
        y_min -= 0.5;
        y_max += 0.5;
    }
    if (!(x_min < x_max)) {
        x_min -= 0.5;
        x_max += 0.5;
    }

    const auto px = [&](double v) {
        return kLeft + (v - x_min) / (x_max - x_min) * (kRight - kLeft);
    };
    const auto py = [&](double v) {
        return kBottom - (v - y_min) / (y_max - y_min) * (kBottom - kTop);
    };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << coord(kWidth)
        << "\" height=\"" << coord(kHeight) << "\" viewBox=\"0 0 " << coord(kWidth) << ' '
        << coord(kHeight) << "\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << coord(kWidth) << "\" height=\""
        << coord(kHeight) << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << coord((kLeft + kRight) / 2.0)
        << "\" y=\"24.00\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"16\">"
        << escape(title) << "</text>\n";

    for (int t = 0; t <= 4; ++t) {
        const double fx = x_min + (x_max - x_min) * t / 4.0;
        const double fy = y_min + (y_max - y_min) * t / 4.0;
        const double gx = px(fx);
        const double gy = py(fy);
        out << "<line x1=\"" << coord(gx) << "\" y1=\"" << coord(kTop) << "\" x2=\""
            << coord(gx) << "\" y2=\"" << coord(kBottom)
            << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        out << "<line x1=\"" << coord(kLeft) << "\" y1=\"" << coord(gy) << "\" x2=\""
            << coord(kRight) << "\" y2=\"" << coord(gy)
            << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        out << "<text x=\"" << coord(gx) << "\" y=\"" << coord(kBottom + 18.0)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << tick_label(fx) << "</text>\n";
        out << "<text x=\"" << coord(kLeft - 8.0) << "\" y=\"" << coord(gy + 4.0)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << tick_label(fy) << "</text>\n";
    }

    out << "<rect x=\"" << coord(kLeft) << "\" y=\"" << coord(kTop) << "\" width=\""
        << coord(kRight - kLeft) << "\" height=\"" << coord(kBottom - kTop)
        << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << coord((kLeft + kRight) / 2.0) << "\" y=\""
        << coord(kHeight - 10.0)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << escape(x_label) << "</text>\n";
    out << "<text x=\"18.00\" y=\"" << coord((kTop + kBottom) / 2.0)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
           "transform=\"rotate(-90 18.00 "
        << coord((kTop + kBottom) / 2.0) << ")\">" << escape(y_label) << "</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        const char* color = kPalette[i % kPaletteSize];
        if (!s.x.empty()) {
            out << "<polyline fill=\"none\" stroke=\"" << color
                << "\" stroke-width=\"2\" points=\"";
            for (std::size_t k = 0; k < s.x.size(); ++k) {
                if (k) out << ' ';
                out << coord(px(s.x[k])) << ',' << coord(py(s.y[k]));
            }
            out << "\"/>\n";
            for (std::size_t k = 0; k < s.x.size(); ++k) {
                out << "<circle cx=\"" << coord(px(s.x[k])) << "\" cy=\""
                    << coord(py(s.y[k])) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
            }
        }
        const double ly = kTop + 16.0 + 18.0 * static_cast<double>(i);
        out << "<line x1=\"" << coord(kRight - 150.0) << "\" y1=\"" << coord(ly - 4.0)
            << "\" x2=\"" << coord(kRight - 126.0) << "\" y2=\"" << coord(ly - 4.0)
            << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << coord(kRight - 120.0) << "\" y=\"" << coord(ly)
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(s.label)
            << "</text>\n";
    }
    out << "</svg>\n";
}

void write_line_plot(const std::filesystem::path& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     std::span<const PlotSeries> series,
                     std::optional<std::pair<double, double>> y_range) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_line_plot(out, title, x_label, y_label, series, y_range);
}

}  // namespace selrec
