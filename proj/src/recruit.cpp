#include "selrec/recruit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "selrec/rng.hpp"

namespace selrec {

RecruitmentWeights RecruitmentWeights::from_unnormalized(std::vector<double> w) {
    if (w.empty()) throw InvalidValue("weight vector is empty");
    double total = 0.0;
    for (double v : w) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw InvalidValue("recruitment weights must be finite and non-negative");
        }
        total += v;
    }
    if (!(total > 0.0)) throw InvalidValue("recruitment weights sum to zero");
    RecruitmentWeights out;
    out.normalized.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) out.normalized[i] = w[i] / total;
    out.unnormalized = std::move(w);
    out.normalizer = total;
    return out;
}

std::string_view protocol_name(Protocol p) {
    switch (p) {
        case Protocol::Random: return "random";
        case Protocol::MarginalBalanced: return "marginal";
        case Protocol::JointBalanced: return "joint";
        case Protocol::ContinuousBalanced: return "continuous";
    }
    throw InvalidValue("unknown protocol");
}

Protocol parse_protocol(std::string_view name) {
    if (name == "random") return Protocol::Random;
    if (name == "marginal") return Protocol::MarginalBalanced;
    // "mixed" is the historical name for the product-of-marginals weights.
    if (name == "mixed") return Protocol::MarginalBalanced;
    if (name == "joint") return Protocol::JointBalanced;
    if (name == "continuous") return Protocol::ContinuousBalanced;
    throw InvalidValue("unknown protocol: " + std::string(name));
}

RecruitmentWeights binary_weights(std::span<const double> column) {
    if (column.empty()) throw InvalidValue("binary_weights: empty column");
    std::size_t plus = 0;
    for (double v : column) {
        if (v != 1.0 && v != -1.0) {
            throw InvalidValue("binary_weights: column values must be +1 or -1");
        }
        if (v == 1.0) ++plus;
    }
    const double p = static_cast<double>(plus) / static_cast<double>(column.size());
    std::vector<double> w(column.size());
    for (std::size_t i = 0; i < column.size(); ++i) {
        w[i] = column[i] == 1.0 ? 1.0 - p : p;
    }
    if (plus == 0 || plus == column.size()) {
        // Single-level column: every present value gets weight zero. The
        // weights stay representable; any attempt to actually sample from
        // them reports InfeasibleCohort.
        RecruitmentWeights out;
        out.normalized.assign(column.size(), 0.0);
        out.unnormalized = std::move(w);
        out.normalizer = 0.0;
        return out;
    }
    return RecruitmentWeights::from_unnormalized(std::move(w));
}

RecruitmentWeights marginal_product_weights(std::span<const RecruitmentWeights> factors) {
    if (factors.empty()) throw InvalidValue("marginal product needs at least one factor");
    const std::size_t n = factors.front().normalized.size();
    for (const auto& f : factors) {
        if (f.normalized.size() != n) {
            throw LengthMismatch("marginal product factors differ in length");
        }
    }
    std::vector<double> w(n, 1.0);
    for (const auto& f : factors) {
        for (std::size_t i = 0; i < n; ++i) w[i] *= f.normalized[i];
    }
    return RecruitmentWeights::from_unnormalized(std::move(w));
}

namespace {

// Fenwick (binary indexed) tree over the weight vector; draws cost O(log N)
// and removal is an O(log N) point update.
class FenwickSampler {
public:
    explicit FenwickSampler(const std::vector<double>& weights)
        : n_(weights.size()), tree_(weights.size() + 1, 0.0), weight_(weights) {
        for (std::size_t i = 1; i <= n_; ++i) {
            tree_[i] += weight_[i - 1];
            const std::size_t parent = i + (i & (~i + 1));
            if (parent <= n_) tree_[parent] += tree_[i];
        }
        remaining_ = 0.0;
        for (double w : weights) remaining_ += w;
        top_ = 1;
        while (top_ * 2 <= n_) top_ *= 2;
    }

    double remaining() const { return remaining_; }

    std::size_t draw(Rng& rng) {
        const double target = rng.uniform() * remaining_;
        std::size_t pos = 0;
        double rem = target;
        for (std::size_t k = top_; k >= 1; k /= 2) {
            const std::size_t next = pos + k;
            if (next <= n_ && tree_[next] <= rem) {
                pos = next;
                rem -= tree_[next];
            }
        }
        // pos is the count of leading indices whose cumulative weight is at
        // most the target, i.e. the 0-based pick. Guard against the
        // floating-point edge where the target overshoots the tree total.
        if (pos >= n_) pos = n_ - 1;
        if (weight_[pos] <= 0.0) {
            std::size_t alt = pos;
            while (alt > 0 && weight_[alt] <= 0.0) --alt;
            if (weight_[alt] <= 0.0) {
                alt = pos;
                while (alt + 1 < n_ && weight_[alt] <= 0.0) ++alt;
            }
            pos = alt;
        }
        remove(pos);
        return pos;
    }

private:
    void remove(std::size_t idx) {
        const double w = weight_[idx];
        weight_[idx] = 0.0;
        remaining_ -= w;
        for (std::size_t i = idx + 1; i <= n_; i += i & (~i + 1)) tree_[i] -= w;
    }

    std::size_t n_;
    std::vector<double> tree_;
    std::vector<double> weight_;
    double remaining_ = 0.0;
    std::size_t top_ = 1;
};

}  // namespace

Cohort random_select(std::size_t pool_size, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw InvalidValue("cohort size must be positive");
    if (n > pool_size) {
        throw InfeasibleCohort("cohort size " + std::to_string(n) + " exceeds pool size " +
                               std::to_string(pool_size));
    }
    Rng rng(seed);
    std::vector<std::size_t> ids(pool_size);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + rng.uniform_below(pool_size - i);
        std::swap(ids[i], ids[j]);
    }
    Cohort cohort;
    cohort.indices.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n));
    std::sort(cohort.indices.begin(), cohort.indices.end());
    cohort.protocol = Protocol::Random;
    cohort.seed = seed;
    return cohort;
}

Cohort sample_cohort(const RecruitmentWeights& weights, std::size_t n, std::uint64_t seed,
                     Protocol protocol) {
    if (n == 0) throw InvalidValue("cohort size must be positive");
    std::size_t positive = 0;
    for (double w : weights.unnormalized) {
        if (w > 0.0) ++positive;
    }
    if (n > positive) {
        throw InfeasibleCohort("cohort size " + std::to_string(n) + " exceeds the " +
                               std::to_string(positive) + " candidates with positive weight");
    }
    Rng rng(seed);
    FenwickSampler sampler(weights.normalized);
    Cohort cohort;
    cohort.indices.reserve(n);
    for (std::size_t k = 0; k < n; ++k) cohort.indices.push_back(sampler.draw(rng));
    std::sort(cohort.indices.begin(), cohort.indices.end());
    cohort.protocol = protocol;
    cohort.seed = seed;
    return cohort;
}

Cohort joint_balance_select(const Pool& pool, std::span<const std::string> binary_covariates,
                            std::size_t n, std::uint64_t seed) {
    if (n == 0) throw InvalidValue("cohort size must be positive");
    if (binary_covariates.empty()) {
        throw InvalidValue("joint balance needs at least one binary covariate");
    }
    if (n > pool.size()) {
        throw InfeasibleCohort("cohort size " + std::to_string(n) + " exceeds pool size " +
                               std::to_string(pool.size()));
    }
    std::vector<std::size_t> cols;
    cols.reserve(binary_covariates.size());
    for (const auto& name : binary_covariates) {
        auto idx = pool.column_index(name);
        if (!idx) throw MissingColumn(name);
        if (pool.spec(*idx).kind != CovariateKind::Binary) {
            throw SpecMismatch("covariate " + name + " is not binary");
        }
        cols.push_back(*idx);
    }
    const std::size_t d = cols.size();
    if (d >= 63 || (std::size_t{1} << d) > pool.size()) {
        throw TooManyStrata(std::to_string(d) +
                            " covariates give more strata than pool members");
    }
    const std::size_t cells = std::size_t{1} << d;

    std::vector<std::vector<std::size_t>> members(cells);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        std::size_t cell = 0;
        for (std::size_t j = 0; j < d; ++j) {
            if (pool.value(i, cols[j]) > 0.0) cell |= std::size_t{1} << j;
        }
        members[cell].push_back(i);
    }

    // Equal quotas; cells too small to fill theirs are capped and the
    // shortfall (plus the division remainder) goes one seat at a time to the
    // cell with the most unused capacity, lowest cell index on ties.
    const std::size_t base = n / cells;
    std::vector<std::size_t> target(cells);
    std::size_t assigned = 0;
    bool imperfect = false;
    for (std::size_t c = 0; c < cells; ++c) {
        target[c] = std::min(base, members[c].size());
        if (target[c] < base) imperfect = true;
        assigned += target[c];
    }
    std::size_t remaining = n - assigned;
    while (remaining > 0) {
        std::size_t best = cells;
        std::size_t best_spare = 0;
        for (std::size_t c = 0; c < cells; ++c) {
            const std::size_t spare = members[c].size() - target[c];
            if (spare > best_spare) {
                best_spare = spare;
                best = c;
            }
        }
        if (best == cells) {
            throw InfeasibleCohort("stratum capacities cannot absorb the cohort");
        }
        ++target[best];
        --remaining;
    }

    Rng rng(seed);
    Cohort cohort;
    cohort.indices.reserve(n);
    for (std::size_t c = 0; c < cells; ++c) {
        auto& list = members[c];
        const std::size_t t = target[c];
        for (std::size_t i = 0; i < t; ++i) {
            const std::size_t j = i + rng.uniform_below(list.size() - i);
            std::swap(list[i], list[j]);
            cohort.indices.push_back(list[i]);
        }
    }
    std::sort(cohort.indices.begin(), cohort.indices.end());
    cohort.protocol = Protocol::JointBalanced;
    cohort.seed = seed;
    cohort.imperfect = imperfect;
    return cohort;
}

namespace {

RecruitmentWeights factor_weights_for_column(const Pool& pool, std::size_t j,
                                             const SelectionOptions& options) {
    const auto col = pool.column(j);
    if (pool.spec(j).kind == CovariateKind::Binary) {
        return binary_weights(col);
    }
    const DensityEstimate kde = kde_fit(col);
    if (options.exact_density) {
        const TruncationBand band = truncation_band(col, kde, options.band_grid);
        return continuous_weights(col, band, kde);
    }
    const DensityTable table(kde, options.kde_grid);
    const TruncationBand band = truncation_band(col, table, options.band_grid);
    return continuous_weights(col, band, table);
}

}  // namespace

RecruitmentWeights protocol_weights(const Pool& pool, Protocol protocol,
                                    const SelectionOptions& options) {
    std::vector<RecruitmentWeights> factors;
    for (std::size_t j = 0; j < pool.dim(); ++j) {
        if (protocol == Protocol::ContinuousBalanced &&
            pool.spec(j).kind != CovariateKind::Continuous) {
            continue;
        }
        factors.push_back(factor_weights_for_column(pool, j, options));
    }
    if (factors.empty()) {
        throw SpecMismatch("pool has no covariate eligible for this protocol");
    }
    if (protocol == Protocol::MarginalBalanced || protocol == Protocol::ContinuousBalanced) {
        if (factors.size() == 1) return std::move(factors.front());
        return marginal_product_weights(factors);
    }
    throw InvalidValue("protocol has no per-row recruitment weights");
}

Cohort select_cohort(const Pool& pool, Protocol protocol, std::size_t n, std::uint64_t seed,
                     const SelectionOptions& options) {
    switch (protocol) {
        case Protocol::Random:
            return random_select(pool.size(), n, seed);
        case Protocol::JointBalanced: {
            std::vector<std::string> names;
            for (const auto& s : pool.specs()) {
                if (s.kind == CovariateKind::Binary) names.push_back(s.name);
            }
            if (names.empty()) throw SpecMismatch("pool has no binary covariate");
            return joint_balance_select(pool, names, n, seed);
        }
        case Protocol::MarginalBalanced:
        case Protocol::ContinuousBalanced: {
            const RecruitmentWeights w = protocol_weights(pool, protocol, options);
            return sample_cohort(w, n, seed, protocol);
        }
    }
    throw InvalidValue("unknown protocol");
}

}  // namespace selrec
