#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "selrec/errors.hpp"

namespace selrec {

struct Bandwidth {
    enum class Rule { Silverman, Fixed };
    Rule rule = Rule::Silverman;
    double value = 0.0;

    static Bandwidth silverman() { return {}; }
    static Bandwidth fixed(double h);
};

// Gaussian kernel density estimate over a one-dimensional sample.
// pdf() evaluates the full kernel sum (no truncation, no caching); it is the
// slow exact reference. Batch evaluation is available serially and with
// OpenMP. For hot loops build a DensityTable instead.
class DensityEstimate {
public:
    // Density values are floored at this constant so downstream ratios
    // (selection weights are proportional to 1/pdf) stay finite.
    static constexpr double kFloor = 1e-12;

    DensityEstimate(std::span<const double> sample, Bandwidth bw = Bandwidth::silverman());

    double bandwidth() const { return h_; }
    std::size_t sample_size() const { return sorted_.size(); }
    double sample_min() const { return sorted_.front(); }
    double sample_max() const { return sorted_.back(); }
    std::span<const double> sorted_sample() const { return sorted_; }

    double pdf(double x) const;
    void pdf_many(std::span<const double> xs, std::span<double> out, int threads = 0) const;
    void pdf_many_serial(std::span<const double> xs, std::span<double> out) const;

private:
    std::vector<double> sorted_;
    double h_ = 0.0;
};

DensityEstimate kde_fit(std::span<const double> sample, Bandwidth bw = Bandwidth::silverman());

// Piecewise-linear tabulation of a DensityEstimate on a uniform grid
// spanning the sample range plus eight bandwidths on each side. Built with
// linear binning followed by a truncated kernel convolution, so construction
// costs O(n + grid * taps) instead of O(n * grid). Queries interpolate
// linearly and return the same 1e-12 floor outside the grid.
class DensityTable {
public:
    explicit DensityTable(const DensityEstimate& kde, std::size_t grid_points = 4096);

    double pdf(double x) const {
        if (x <= lo_ || x >= hi_) return DensityEstimate::kFloor;
        const double pos = (x - lo_) / step_;
        const std::size_t i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        return values_[i] + frac * (values_[i + 1] - values_[i]);
    }

    double grid_lo() const { return lo_; }
    double grid_hi() const { return hi_; }
    double step() const { return step_; }
    std::span<const double> grid_values() const { return values_; }

private:
    double lo_ = 0.0;
    double hi_ = 0.0;
    double step_ = 0.0;
    std::vector<double> values_;
};

// Central band of a continuous covariate: [5th percentile, 95th percentile]
// of the sample, the uniform target height q = 1/(upper - lower), and the
// normalizing ratio c' = max over the band of q / pdf.
struct TruncationBand {
    double lower = 0.0;
    double upper = 0.0;
    double q = 0.0;
    double c_prime = 0.0;
};

// Works with any evaluator exposing pdf(double): the exact DensityEstimate
// or a DensityTable. The maximum is searched on a uniform grid over the band.
template <class Density>
TruncationBand truncation_band(std::span<const double> sample, const Density& density,
                               std::size_t grid_points = 1024) {
    if (sample.size() < 2) throw DegenerateSample("band needs at least two points");
    if (grid_points < 2) throw InvalidValue("band grid needs at least two points");
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());

    // R type-7 quantiles at 0.05 and 0.95, inlined to keep this header free
    // of the stats translation unit.
    auto type7 = [&](double p) {
        const double h = p * static_cast<double>(sorted.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(h);
        if (lo >= sorted.size() - 1) return sorted.back();
        const double frac = h - static_cast<double>(lo);
        return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
    };

    TruncationBand band;
    band.lower = type7(0.05);
    band.upper = type7(0.95);
    if (!(band.upper > band.lower)) {
        throw DegenerateSample("5th and 95th percentiles coincide");
    }
    band.q = 1.0 / (band.upper - band.lower);

    const double step = (band.upper - band.lower) / static_cast<double>(grid_points - 1);
    double best = 0.0;
    for (std::size_t i = 0; i < grid_points; ++i) {
        const double x = band.lower + step * static_cast<double>(i);
        best = std::max(best, band.q / density.pdf(x));
    }
    band.c_prime = best;
    return band;
}

}  // namespace selrec
