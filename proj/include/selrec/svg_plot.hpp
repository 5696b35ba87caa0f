#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace selrec {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

// Minimal deterministic line plot: fixed canvas, fixed palette, coordinates
// rounded to two decimals, no timestamps or generator comments, so repeated
// runs produce byte-identical files.
void write_line_plot(std::ostream& out, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     std::span<const PlotSeries> series,
                     std::optional<std::pair<double, double>> y_range = std::nullopt);

void write_line_plot(const std::filesystem::path& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     std::span<const PlotSeries> series,
                     std::optional<std::pair<double, double>> y_range = std::nullopt);

}  // namespace selrec
