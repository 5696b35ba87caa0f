#include "selrec/density.hpp"

#include <cmath>

#include "selrec/parallel.hpp"
#include "selrec/stats.hpp"

namespace selrec {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
// Kernel support used by the tabulated evaluator; a Gaussian kernel at eight
// bandwidths contributes less than the 1e-12 density floor.
constexpr double kKernelReach = 8.0;
}  // namespace

Bandwidth Bandwidth::fixed(double h) {
    if (!(h > 0.0)) throw InvalidValue("fixed bandwidth must be positive");
    return {Rule::Fixed, h};
}

DensityEstimate::DensityEstimate(std::span<const double> sample, Bandwidth bw)
    : sorted_(sample.begin(), sample.end()) {
    if (sorted_.empty()) throw DegenerateSample("density fit needs a nonempty sample");
    std::sort(sorted_.begin(), sorted_.end());
    if (bw.rule == Bandwidth::Rule::Fixed) {
        h_ = bw.value;
        return;
    }
    if (sorted_.size() < 20) {
        throw DegenerateSample("bandwidth estimation needs at least 20 points");
    }
    const double sd = sample_sd(sorted_);
    const double iqr = quantile_sorted(sorted_, 0.75) - quantile_sorted(sorted_, 0.25);
    double spread = std::min(sd, iqr / 1.34);
    if (spread <= 0.0) spread = sd;  // heavily tied sample: fall back to sd
    if (spread <= 0.0) throw DegenerateSample("sample is constant");
    h_ = 0.9 * spread * std::pow(static_cast<double>(sorted_.size()), -0.2);
}

double DensityEstimate::pdf(double x) const {
    const double n = static_cast<double>(sorted_.size());
    double acc = 0.0;
    for (double xi : sorted_) {
        const double z = (x - xi) / h_;
        acc += std::exp(-0.5 * z * z);
    }
    const double val = acc * kInvSqrt2Pi / (n * h_);
    return val < kFloor ? kFloor : val;
}

void DensityEstimate::pdf_many_serial(std::span<const double> xs, std::span<double> out) const {
    if (xs.size() != out.size()) throw LengthMismatch("pdf_many: output size mismatch");
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = pdf(xs[i]);
}

void DensityEstimate::pdf_many(std::span<const double> xs, std::span<double> out,
                               int threads) const {
    if (xs.size() != out.size()) throw LengthMismatch("pdf_many: output size mismatch");
    const int nt = resolve_threads(threads);
    const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(xs.size());
#pragma omp parallel for schedule(static) num_threads(nt)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        out[static_cast<std::size_t>(i)] = pdf(xs[static_cast<std::size_t>(i)]);
    }
}

DensityTable::DensityTable(const DensityEstimate& kde, std::size_t grid_points) {
    if (grid_points < 16) throw InvalidValue("density table needs at least 16 grid points");
    const double h = kde.bandwidth();
    lo_ = kde.sample_min() - kKernelReach * h;
    hi_ = kde.sample_max() + kKernelReach * h;
    step_ = (hi_ - lo_) / static_cast<double>(grid_points - 1);

    // Linear binning: each observation splits its unit mass between the two
    // neighbouring grid nodes in proportion to proximity.
    std::vector<double> bins(grid_points, 0.0);
    for (double x : kde.sorted_sample()) {
        const double pos = (x - lo_) / step_;
        std::size_t i = static_cast<std::size_t>(pos);
        if (i >= grid_points - 1) i = grid_points - 2;
        const double frac = pos - static_cast<double>(i);
        bins[i] += 1.0 - frac;
        bins[i + 1] += frac;
    }

    std::size_t taps = static_cast<std::size_t>(std::ceil(kKernelReach * h / step_));
    taps = std::min(taps, grid_points - 1);
    std::vector<double> kernel(taps + 1);
    const double norm = kInvSqrt2Pi / (static_cast<double>(kde.sample_size()) * h);
    for (std::size_t k = 0; k <= taps; ++k) {
        const double z = static_cast<double>(k) * step_ / h;
        kernel[k] = norm * std::exp(-0.5 * z * z);
    }

    values_.assign(grid_points, 0.0);
    for (std::size_t i = 0; i < grid_points; ++i) {
        const std::size_t jlo = i > taps ? i - taps : 0;
        const std::size_t jhi = std::min(i + taps, grid_points - 1);
        double acc = 0.0;
        for (std::size_t j = jlo; j <= jhi; ++j) {
            const std::size_t k = i > j ? i - j : j - i;
            acc += bins[j] * kernel[k];
        }
        values_[i] = acc < DensityEstimate::kFloor ? DensityEstimate::kFloor : acc;
    }
}

DensityEstimate kde_fit(std::span<const double> sample, Bandwidth bw) {
    return DensityEstimate(sample, bw);
}

}  // namespace selrec
