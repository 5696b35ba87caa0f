#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace selrec {

double mean(std::span<const double> xs);

// Unbiased sample variance (n-1 denominator); requires at least two values.
double sample_variance(std::span<const double> xs);
double sample_sd(std::span<const double> xs);

// Linear-interpolation quantile (R type 7) on an already sorted sample.
double quantile_sorted(std::span<const double> sorted, double p);

// Convenience overload that copies and sorts.
double quantile(std::span<const double> xs, double p);

// Standard normal distribution.
double normal_pdf(double x);
double normal_cdf(double x);

// Inverse standard normal cdf (Wichura's AS 241, double precision).
double normal_quantile(double p);

// Two-sided p-value for a z statistic: 2 * (1 - Phi(|z|)).
// Values below 1e-300 are reported as zero.
double two_sided_p(double z);

// Kolmogorov-Smirnov sup distance between the empirical cdf of `xs` and the
// uniform distribution on [lo, hi].
double ks_uniform(std::span<const double> xs, double lo, double hi);

}  // namespace selrec
