#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selrec/density.hpp"
#include "selrec/errors.hpp"
#include "selrec/pool.hpp"

namespace selrec {

// Per-candidate recruitment weights. `unnormalized` holds the raw formula
// values, `normalizer` their sum, and `normalized` the probability vector
// used for sampling.
struct RecruitmentWeights {
    std::vector<double> unnormalized;
    std::vector<double> normalized;
    double normalizer = 0.0;

    static RecruitmentWeights from_unnormalized(std::vector<double> w);
};

enum class Protocol { Random, MarginalBalanced, JointBalanced, ContinuousBalanced };

std::string_view protocol_name(Protocol p);
Protocol parse_protocol(std::string_view name);

struct Cohort {
    std::vector<std::size_t> indices;  // ascending pool row ids
    Protocol protocol = Protocol::Random;
    std::uint64_t seed = 0;
    // Set when stratum targets could not be met exactly (some cell smaller
    // than its quota) and the shortfall was redistributed.
    bool imperfect = false;
};

// Weights that equalize a +/-1 covariate: a candidate with x = +1 gets
// weight proportional to 1 - p and one with x = -1 gets p, where p is the
// pool fraction with x = +1.
RecruitmentWeights binary_weights(std::span<const double> column);

// Weights that flatten a continuous covariate inside its central band:
// proportional to q / (c' * pdf(x)) within [band.lower, band.upper] and to 1
// outside, so no candidate is up-weighted relative to the tails.
template <class Density>
RecruitmentWeights continuous_weights(std::span<const double> column,
                                      const TruncationBand& band, const Density& density) {
    if (!(band.q > 0.0) || !(band.c_prime > 0.0)) {
        throw InvalidValue("continuous_weights: band is not initialized");
    }
    std::vector<double> w(column.size());
    for (std::size_t i = 0; i < column.size(); ++i) {
        const double x = column[i];
        if (x < band.lower || x > band.upper) {
            w[i] = 1.0;
        } else {
            w[i] = band.q / (band.c_prime * density.pdf(x));
        }
    }
    return RecruitmentWeights::from_unnormalized(std::move(w));
}

// Product across per-covariate factors, renormalized.
RecruitmentWeights marginal_product_weights(std::span<const RecruitmentWeights> factors);

// Simple random sample of n rows out of pool_size, without replacement.
Cohort random_select(std::size_t pool_size, std::size_t n, std::uint64_t seed);

// Successive sampling: n sequential draws without replacement, each draw
// proportional to the remaining candidates' weights.
Cohort sample_cohort(const RecruitmentWeights& weights, std::size_t n, std::uint64_t seed,
                     Protocol protocol = Protocol::MarginalBalanced);

// Stratified selection on the joint levels of the named +/-1 covariates:
// 2^d cells with equal quotas, remainder (and any shortfall from undersized
// cells) going to the cells with the largest remaining capacity.
Cohort joint_balance_select(const Pool& pool, std::span<const std::string> binary_covariates,
                            std::size_t n, std::uint64_t seed);

struct SelectionOptions {
    std::size_t kde_grid = 4096;    // density table resolution
    std::size_t band_grid = 1024;   // grid for the band maximum search
    bool exact_density = false;     // evaluate the kernel sum directly
};

// Recruitment weights for the weight-based protocols (marginal product over
// all covariates, or over the continuous covariates only).
RecruitmentWeights protocol_weights(const Pool& pool, Protocol protocol,
                                    const SelectionOptions& options = {});

// Dispatch: build whatever the protocol needs and draw the cohort.
Cohort select_cohort(const Pool& pool, Protocol protocol, std::size_t n, std::uint64_t seed,
                     const SelectionOptions& options = {});

}  // namespace selrec
