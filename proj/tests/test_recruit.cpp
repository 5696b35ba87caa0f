#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "selrec/density.hpp"
#include "selrec/errors.hpp"
#include "selrec/pool.hpp"
#include "selrec/recruit.hpp"
#include "selrec/rng.hpp"

using namespace selrec;

namespace {

// Plain O(N)-per-draw successive sampler mirroring the production tree
// sampler draw by draw: same uniform stream, same boundary convention, same
// zero-weight guard. On dyadic weights all partial sums are exact, so the
// two must agree bit for bit.
class NaiveSampler {
public:
    explicit NaiveSampler(std::vector<double> weights) : weight_(std::move(weights)) {
        for (double w : weight_) remaining_ += w;
    }

    std::size_t draw(Rng& rng) {
        const double target = rng.uniform() * remaining_;
        double cum = 0.0;
        std::size_t pos = 0;
        while (pos < weight_.size() && cum + weight_[pos] <= target) {
            cum += weight_[pos];
            ++pos;
        }
        if (pos >= weight_.size()) pos = weight_.size() - 1;
        if (weight_[pos] <= 0.0) {
            std::size_t alt = pos;
            while (alt > 0 && weight_[alt] <= 0.0) --alt;
            if (weight_[alt] <= 0.0) {
                alt = pos;
                while (alt + 1 < weight_.size() && weight_[alt] <= 0.0) ++alt;
            }
            pos = alt;
        }
        remaining_ -= weight_[pos];
        weight_[pos] = 0.0;
        return pos;
    }

private:
    std::vector<double> weight_;
    double remaining_ = 0.0;
};

// Exact inclusion probabilities of successive sampling by enumerating every
// ordered draw sequence. Exponential in n, fine for tiny pools.
void enumerate_inclusion(const std::vector<double>& weights, std::size_t k,
                         std::vector<double>& inclusion, std::vector<bool>& taken,
                         double prob, double remaining, std::size_t depth) {
    if (depth == k) {
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (taken[i]) inclusion[i] += prob;
        }
        return;
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (taken[i] || weights[i] <= 0.0) continue;
        taken[i] = true;
        enumerate_inclusion(weights, k, inclusion, taken,
                            prob * weights[i] / remaining, remaining - weights[i],
                            depth + 1);
        taken[i] = false;
    }
}

std::vector<double> exact_inclusion(const std::vector<double>& weights, std::size_t k) {
    std::vector<double> inclusion(weights.size(), 0.0);
    std::vector<bool> taken(weights.size(), false);
    double total = 0.0;
    for (double w : weights) total += w;
    enumerate_inclusion(weights, k, inclusion, taken, 1.0, total, 0);
    return inclusion;
}

Pool binary_pool(const std::vector<double>& x1) {
    return Pool({{"x1", CovariateKind::Binary}}, {x1});
}

}  // namespace

TEST_CASE("binary weights reproduce the hand-computed four-row example") {
    // p = 3/4: each +1 row gets 1-p = 1/4, the -1 row gets p = 3/4.
    const std::vector<double> col{1.0, 1.0, 1.0, -1.0};
    const RecruitmentWeights w = binary_weights(col);
    REQUIRE(w.unnormalized.size() == 4);
    CHECK(std::fabs(w.unnormalized[0] - 0.25) < 1e-12);
    CHECK(std::fabs(w.unnormalized[3] - 0.75) < 1e-12);
    CHECK(std::fabs(w.normalizer - 1.5) < 1e-12);
    CHECK(std::fabs(w.normalized[0] - 1.0 / 6.0) < 1e-12);
    CHECK(std::fabs(w.normalized[1] - 1.0 / 6.0) < 1e-12);
    CHECK(std::fabs(w.normalized[2] - 1.0 / 6.0) < 1e-12);
    CHECK(std::fabs(w.normalized[3] - 0.5) < 1e-12);
}

TEST_CASE("balanced binary pools give constant weights") {
    const std::vector<double> col{1.0, -1.0, 1.0, -1.0};
    const RecruitmentWeights w = binary_weights(col);
    for (double v : w.normalized) CHECK(std::fabs(v - 0.25) < 1e-15);
}

TEST_CASE("single-level binary columns yield zero weights without throwing") {
    const std::vector<double> col{1.0, 1.0, 1.0};
    const RecruitmentWeights w = binary_weights(col);
    CHECK(w.normalizer == 0.0);
    for (double v : w.unnormalized) CHECK(v == 0.0);
    // The error surfaces where it matters: at sampling time.
    CHECK_THROWS_AS(sample_cohort(w, 2, 1), InfeasibleCohort);

    CHECK_THROWS_AS(binary_weights(std::vector<double>{}), InvalidValue);
    CHECK_THROWS_AS(binary_weights(std::vector<double>{0.5}), InvalidValue);
}

TEST_CASE("continuous weights flatten the band and leave the tails at 1") {
    Rng rng(3);
    std::vector<double> xs(20000);
    for (double& x : xs) x = rng.normal(0.0, 0.608);
    const DensityEstimate kde(xs);
    const TruncationBand band = truncation_band(xs, kde);
    const RecruitmentWeights w = continuous_weights(xs, band, kde);

    double max_inside = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i] < band.lower || xs[i] > band.upper) {
            CHECK(w.unnormalized[i] == 1.0);
        } else {
            max_inside = std::max(max_inside, w.unnormalized[i]);
            // q / (c' p(x)) <= 1 by construction of c'.
            CHECK(w.unnormalized[i] <= 1.0 + 1e-9);
        }
    }
    // The maximum inside the band touches 1 (at the density minimum).
    CHECK(max_inside > 0.999);

    // Weight is U-shaped in the covariate: smaller at the mode than near the
    // band edges.
    const auto weight_at = [&](double x) {
        return x < band.lower || x > band.upper ? 1.0
                                                : band.q / (band.c_prime * kde.pdf(x));
    };
    CHECK(weight_at(0.0) < weight_at(band.lower + 0.05));
    CHECK(weight_at(0.0) < weight_at(band.upper - 0.05));

    TruncationBand empty;
    CHECK_THROWS_AS(continuous_weights(xs, empty, kde), InvalidValue);
}

TEST_CASE("marginal product multiplies normalized factors") {
    const RecruitmentWeights a = binary_weights(std::vector<double>{1.0, 1.0, -1.0, -1.0});
    const RecruitmentWeights b = binary_weights(std::vector<double>{1.0, -1.0, 1.0, -1.0});
    const std::vector<RecruitmentWeights> factors{a, b};
    const RecruitmentWeights prod = marginal_product_weights(factors);
    // Both factors are uniform (p = 1/2), so the product is uniform too.
    for (double v : prod.normalized) CHECK(std::fabs(v - 0.25) < 1e-12);

    // d = 1: the product reduces to the single factor.
    const std::vector<RecruitmentWeights> one{binary_weights(std::vector<double>{1.0, 1.0, 1.0, -1.0})};
    const RecruitmentWeights same = marginal_product_weights(one);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(std::fabs(same.normalized[i] - one[0].normalized[i]) < 1e-12);
    }

    const std::vector<RecruitmentWeights> ragged{a, binary_weights(std::vector<double>{1.0, -1.0})};
    CHECK_THROWS_AS(marginal_product_weights(ragged), LengthMismatch);
}

TEST_CASE("random selection is a uniform without-replacement sample") {
    const Cohort all = random_select(10, 10, 5);
    REQUIRE(all.indices.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) CHECK(all.indices[i] == i);

    const Cohort c1 = random_select(100, 10, 7);
    const Cohort c2 = random_select(100, 10, 7);
    CHECK(c1.indices == c2.indices);
    CHECK(std::is_sorted(c1.indices.begin(), c1.indices.end()));
    CHECK(std::set<std::size_t>(c1.indices.begin(), c1.indices.end()).size() == 10);
    CHECK(random_select(100, 10, 8).indices != c1.indices);

    CHECK_THROWS_AS(random_select(5, 6, 1), InfeasibleCohort);
    CHECK_THROWS_AS(random_select(5, 0, 1), InvalidValue);

    // Inclusion frequency is flat across the pool.
    std::vector<int> counts(20, 0);
    for (std::uint64_t s = 0; s < 4000; ++s) {
        for (std::size_t i : random_select(20, 5, 1000 + s).indices) ++counts[i];
    }
    for (int c : counts) CHECK(std::fabs(c - 1000.0) < 150.0);  // ~5.5 sigma
}

TEST_CASE("tree sampler agrees with the naive reference bit for bit") {
    // Dyadic weights make every partial sum exact in binary floating point.
    std::vector<double> weights;
    Rng wrng(17);
    for (int i = 0; i < 257; ++i) {
        weights.push_back(static_cast<double>(1 + (wrng.next_u64() % 16)) / 32.0);
    }
    for (std::uint64_t seed : {1ULL, 2ULL, 99ULL, 123456789ULL}) {
        const Cohort cohort = sample_cohort(RecruitmentWeights::from_unnormalized(weights),
                                            200, seed);
        // Replay with the naive sampler on the same normalized weights.
        double total = 0.0;
        for (double w : weights) total += w;
        std::vector<double> norm(weights.size());
        for (std::size_t i = 0; i < weights.size(); ++i) norm[i] = weights[i] / total;
        NaiveSampler naive(norm);
        Rng rng(seed);
        std::vector<std::size_t> picks;
        for (int k = 0; k < 200; ++k) picks.push_back(naive.draw(rng));
        std::sort(picks.begin(), picks.end());
        CHECK(picks == cohort.indices);
    }
}

TEST_CASE("successive sampling matches exhaustively enumerated inclusion probabilities") {
    const std::vector<double> weights{0.5, 0.125, 0.125, 0.125, 0.125};
    const std::vector<double> expect = exact_inclusion(weights, 2);

    std::vector<double> freq(weights.size(), 0.0);
    const std::size_t reps = 40000;
    const RecruitmentWeights w = RecruitmentWeights::from_unnormalized(weights);
    for (std::uint64_t s = 0; s < reps; ++s) {
        for (std::size_t i : sample_cohort(w, 2, 777000 + s).indices) freq[i] += 1.0;
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double p = expect[i];
        const double se = std::sqrt(p * (1.0 - p) / reps);
        CHECK(std::fabs(freq[i] / reps - p) < 5.0 * se);
    }
}

TEST_CASE("sampling edge cases") {
    const RecruitmentWeights w =
        RecruitmentWeights::from_unnormalized({0.25, 0.0, 0.5, 0.25});
    // Only three candidates carry positive weight.
    CHECK_THROWS_AS(sample_cohort(w, 4, 1), InfeasibleCohort);
    const Cohort c = sample_cohort(w, 3, 1);
    CHECK(c.indices == std::vector<std::size_t>{0, 2, 3});
    CHECK_THROWS_AS(sample_cohort(w, 0, 1), InvalidValue);

    CHECK_THROWS_AS(RecruitmentWeights::from_unnormalized({1.0, -0.5}), InvalidValue);
    CHECK_THROWS_AS(RecruitmentWeights::from_unnormalized({0.0, 0.0}), InvalidValue);
    CHECK_THROWS_AS(RecruitmentWeights::from_unnormalized({}), InvalidValue);
}

TEST_CASE("joint balance splits quotas and redistributes shortfall") {
    // Cell sizes (--, -+, +-, ++) = (1, 5, 6, 7); n = 8 forces targets
    // (1, 2, 2, 3): cell 0 is capped at 1, the spare seat goes to cell 3.
    std::vector<double> x1, x2;
    const std::size_t cell_sizes[4] = {1, 5, 6, 7};
    for (std::size_t c = 0; c < 4; ++c) {
        for (std::size_t k = 0; k < cell_sizes[c]; ++k) {
            x1.push_back(c >= 2 ? 1.0 : -1.0);
            x2.push_back((c & 1) ? 1.0 : -1.0);
        }
    }
    Pool pool({{"x1", CovariateKind::Binary}, {"x2", CovariateKind::Binary}}, {x1, x2});
    const std::vector<std::string> names{"x1", "x2"};
    const Cohort cohort = joint_balance_select(pool, names, 8, 3);
    CHECK(cohort.imperfect);
    REQUIRE(cohort.indices.size() == 8);

    std::map<std::pair<int, int>, int> counts;
    for (std::size_t i : cohort.indices) {
        ++counts[{pool.value(i, 0) > 0 ? 1 : -1, pool.value(i, 1) > 0 ? 1 : -1}];
    }
    CHECK(counts[{-1, -1}] == 1);
    CHECK(counts[{-1, 1}] == 2);
    CHECK(counts[{1, -1}] == 2);
    CHECK(counts[{1, 1}] == 3);
}

TEST_CASE("joint balance with ample cells is exactly uniform") {
    std::vector<double> x1, x2;
    for (int c = 0; c < 4; ++c) {
        for (int k = 0; k < 50; ++k) {
            x1.push_back(c >= 2 ? 1.0 : -1.0);
            x2.push_back((c & 1) ? 1.0 : -1.0);
        }
    }
    Pool pool({{"x1", CovariateKind::Binary}, {"x2", CovariateKind::Binary}}, {x1, x2});
    const std::vector<std::string> names{"x1", "x2"};
    const Cohort cohort = joint_balance_select(pool, names, 40, 11);
    CHECK(!cohort.imperfect);
    std::map<std::pair<int, int>, int> counts;
    for (std::size_t i : cohort.indices) {
        ++counts[{pool.value(i, 0) > 0 ? 1 : -1, pool.value(i, 1) > 0 ? 1 : -1}];
    }
    for (const auto& [cell, count] : counts) CHECK(count == 10);

    // Determinism and error paths.
    CHECK(joint_balance_select(pool, names, 40, 11).indices == cohort.indices);
    CHECK_THROWS_AS(joint_balance_select(pool, std::vector<std::string>{"nope"}, 10, 1),
                    MissingColumn);
    CHECK_THROWS_AS(joint_balance_select(pool, std::vector<std::string>{}, 10, 1),
                    InvalidValue);
    CHECK_THROWS_AS(joint_balance_select(pool, names, 300, 1), InfeasibleCohort);

    Pool three({{"a", CovariateKind::Binary}, {"b", CovariateKind::Binary},
                {"c", CovariateKind::Binary}},
               {{1.0, -1.0, 1.0}, {1.0, 1.0, -1.0}, {-1.0, 1.0, 1.0}});
    const std::vector<std::string> abc{"a", "b", "c"};
    CHECK_THROWS_AS(joint_balance_select(three, abc, 2, 1), TooManyStrata);
}

TEST_CASE("protocol weights dispatch per covariate kind") {
    // Duplicate every z across both levels of b: rows 2k and 2k+1 share z.
    Rng rng(9);
    std::vector<double> z(5000), b(5000);
    for (std::size_t i = 0; i < z.size(); i += 2) {
        const double v = rng.normal(0.0, 1.0);
        z[i] = v;
        z[i + 1] = v;
        b[i] = 1.0;
        b[i + 1] = -1.0;
    }
    Pool pool({{"b", CovariateKind::Binary}, {"z", CovariateKind::Continuous}}, {b, z});

    const RecruitmentWeights marginal = protocol_weights(pool, Protocol::MarginalBalanced);
    const RecruitmentWeights continuous = protocol_weights(pool, Protocol::ContinuousBalanced);
    REQUIRE(marginal.normalized.size() == pool.size());
    REQUIRE(continuous.normalized.size() == pool.size());

    for (std::size_t i = 0; i < pool.size(); i += 2) {
        // Continuous-only weights ignore b entirely: identical z, identical
        // weight. The marginal product folds in the (here uniform) binary
        // factor, so the pairs still agree.
        CHECK(continuous.normalized[i] == continuous.normalized[i + 1]);
        CHECK(marginal.normalized[i] ==
              doctest::Approx(marginal.normalized[i + 1]).epsilon(1e-12));
    }

    CHECK_THROWS_AS(protocol_weights(pool, Protocol::Random), InvalidValue);
    Pool binary_only = binary_pool({1.0, -1.0, 1.0, -1.0});
    CHECK_THROWS_AS(protocol_weights(binary_only, Protocol::ContinuousBalanced),
                    SpecMismatch);
}

TEST_CASE("select_cohort balances a lopsided binary pool") {
    Rng rng(31);
    std::vector<double> col(4000);
    for (double& v : col) v = rng.uniform() < 0.8 ? 1.0 : -1.0;
    Pool pool = binary_pool(col);

    const Cohort cohort = select_cohort(pool, Protocol::MarginalBalanced, 500, 77);
    double plus = 0.0;
    for (std::size_t i : cohort.indices) plus += pool.value(i, 0) > 0 ? 1.0 : 0.0;
    const double frac = plus / 500.0;
    // 0.5 +/- 3 sqrt(0.25/n)
    CHECK(std::fabs(frac - 0.5) < 3.0 * std::sqrt(0.25 / 500.0));

    // Random selection instead tracks the pool imbalance.
    const Cohort rand_cohort = select_cohort(pool, Protocol::Random, 500, 77);
    double rplus = 0.0;
    for (std::size_t i : rand_cohort.indices) rplus += pool.value(i, 0) > 0 ? 1.0 : 0.0;
    CHECK(rplus / 500.0 > 0.7);
}

TEST_CASE("cohorts repeat exactly for a fixed seed across protocols") {
    Rng rng(41);
    std::vector<double> b(2000), z(2000);
    for (std::size_t i = 0; i < b.size(); ++i) {
        b[i] = rng.uniform() < 0.4 ? 1.0 : -1.0;
        z[i] = rng.normal(0.0, 0.608);
    }
    Pool pool({{"b", CovariateKind::Binary}, {"z", CovariateKind::Continuous}}, {b, z});
    for (Protocol p : {Protocol::Random, Protocol::MarginalBalanced, Protocol::JointBalanced,
                       Protocol::ContinuousBalanced}) {
        const Cohort c1 = select_cohort(pool, p, 100, 9001);
        const Cohort c2 = select_cohort(pool, p, 100, 9001);
        CHECK(c1.indices == c2.indices);
        CHECK(c1.indices.size() == 100);
        CHECK(std::is_sorted(c1.indices.begin(), c1.indices.end()));
    }
}

TEST_CASE("protocol names round-trip and accept the mixed alias") {
    CHECK(parse_protocol("random") == Protocol::Random);
    CHECK(parse_protocol("marginal") == Protocol::MarginalBalanced);
    CHECK(parse_protocol("mixed") == Protocol::MarginalBalanced);
    CHECK(parse_protocol("joint") == Protocol::JointBalanced);
    CHECK(parse_protocol("continuous") == Protocol::ContinuousBalanced);
    CHECK_THROWS_AS(parse_protocol("bogus"), InvalidValue);
    for (Protocol p : {Protocol::Random, Protocol::MarginalBalanced, Protocol::JointBalanced,
                       Protocol::ContinuousBalanced}) {
        CHECK(parse_protocol(protocol_name(p)) == p);
    }
}
