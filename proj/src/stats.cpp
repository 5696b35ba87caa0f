#include "selrec/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "selrec/errors.hpp"

namespace selrec {

double mean(std::span<const double> xs) {
    if (xs.empty()) throw InvalidValue("mean of empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
    if (xs.size() < 2) throw InvalidValue("variance needs at least two values");
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

double sample_sd(std::span<const double> xs) {
    return std::sqrt(sample_variance(xs));
}

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw InvalidValue("quantile of empty sample");
    if (p < 0.0 || p > 1.0) throw InvalidValue("quantile level outside [0, 1]");
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double h = p * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    if (lo >= n - 1) return sorted[n - 1];
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double quantile(std::span<const double> xs, double p) {
    std::vector<double> copy(xs.begin(), xs.end());
    std::sort(copy.begin(), copy.end());
    return quantile_sorted(copy, p);
}

double normal_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014326779;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * M_SQRT1_2);
}

// AS 241 algorithm PPND16: relative error below 1e-15 over (0, 1).
double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw InvalidValue("normal_quantile: p must lie strictly inside (0, 1)");
    }
    const double q = p - 0.5;
    double r;
    if (std::fabs(q) <= 0.425) {
        r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                   1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                 1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                   5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r + 1.0);
    }
    r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double value;
    if (r <= 5.0) {
        r -= 1.6;
        value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                      2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                    3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                  4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
                (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                      1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                    6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                  2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                      1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                    2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                  5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
                (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                      1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                    1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                  5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0.0 ? -value : value;
}

double two_sided_p(double z) {
    const double p = std::erfc(std::fabs(z) * M_SQRT1_2);
    return p < 1e-300 ? 0.0 : p;
}

double ks_uniform(std::span<const double> xs, double lo, double hi) {
    if (xs.empty()) throw InvalidValue("ks_uniform: empty sample");
    if (!(hi > lo)) throw InvalidValue("ks_uniform: need hi > lo");
    std::vector<double> sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        double f = (sorted[i] - lo) / (hi - lo);
        f = std::clamp(f, 0.0, 1.0);
        const double below = f - static_cast<double>(i) / n;
        const double above = static_cast<double>(i + 1) / n - f;
        d = std::max({d, below, above});
    }
    return d;
}

}  // namespace selrec
