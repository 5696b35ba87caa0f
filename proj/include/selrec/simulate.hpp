#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "selrec/models.hpp"
#include "selrec/pool.hpp"
#include "selrec/recruit.hpp"

namespace selrec {

// --- data generators -------------------------------------------------------

struct TwoBinaryScheme {
    // Joint probabilities of (x1, x2) in cell order (--, -+, +-, ++).
    std::array<double, 4> cells{0.15, 0.60, 0.15, 0.10};
};

struct OneBinaryScheme {
    double p_plus = 0.75;  // P(x = +1)
};

struct OneContinuousScheme {
    double mean = 0.0;
    double sd = 0.608;
};

// Mixed covariates tied together by one latent factor: each column loads on
// a shared standard normal, binary columns are thresholded at their target
// prevalence. Loadings are drawn once from correlation_seed so the
// dependence structure is a property of the config, not of the draw seed.
struct SyntheticEhrScheme {
    std::size_t n_binary = 15;
    std::size_t n_continuous = 8;
    std::vector<double> prevalence;  // per binary covariate, P(x = +1)
    std::uint64_t correlation_seed = 2026;
};

using CovariateScheme =
    std::variant<TwoBinaryScheme, OneBinaryScheme, OneContinuousScheme, SyntheticEhrScheme>;

struct LogisticOutcome {
    double w0 = 0.0;
    std::vector<double> w;
};

struct CoxExponentialOutcome {
    std::vector<double> beta;
    double baseline_rate = 0.1;
    double censor_rate = 0.0;  // zero disables censoring
};

using OutcomeScheme = std::variant<LogisticOutcome, CoxExponentialOutcome>;

struct GeneratorConfig {
    std::size_t pool_size = 10000;
    CovariateScheme covariates = TwoBinaryScheme{};
    OutcomeScheme outcome = LogisticOutcome{};
};

Pool gen_pool(const GeneratorConfig& config, std::uint64_t seed);

Pool gen_logistic_outcomes(const Pool& pool, double w0, std::span<const double> w,
                           std::uint64_t seed);

Pool gen_survival_outcomes(const Pool& pool, std::span<const double> beta,
                           double baseline_rate, double censor_rate, std::uint64_t seed);

// Covariates plus the configured outcome, with sub-seeds derived from seed.
Pool gen_pool_with_outcomes(const GeneratorConfig& config, std::uint64_t seed);

// --- Monte-Carlo experiment harness ----------------------------------------

struct ExperimentOptions {
    int threads = 0;                      // 0 = all available
    bool fresh_pool = true;               // regenerate the pool every replication
    double max_nonconverged_rate = 0.05;  // per-cell loud-failure threshold
    std::size_t kde_grid = 4096;
    std::size_t band_grid = 1024;
    CoxTies ties = CoxTies::Efron;
};

// Aggregates for one (protocol, cohort size) cell of the experiment grid.
// "Slopes" are the non-intercept coefficients; metrics average over the
// replications whose fit converged.
struct CellSummary {
    std::size_t attempted = 0;
    std::size_t converged = 0;
    double nonconverged_rate = 0.0;

    double power_all = 0.0;  // every truly-nonzero slope significant
    double power_all_se = 0.0;
    std::vector<double> reject_rate;  // per slope
    std::vector<double> reject_rate_se;
    bool has_type1 = false;
    double type1 = 0.0;  // mean rejection rate over the truly-zero slopes
    double type1_se = 0.0;
    double mse = 0.0;  // per-replication mean squared slope error, averaged
    double mse_se = 0.0;
    std::vector<double> bias;  // mean (estimate - truth) per slope
    std::vector<double> bias_se;
};

struct PairedDifference {
    double difference = 0.0;
    double se = 0.0;
};

struct ExperimentResult {
    std::vector<Protocol> protocols;
    std::vector<std::size_t> n_grid;
    std::size_t replications = 0;
    double alpha = 0.05;
    std::vector<double> true_slopes;
    std::vector<char> slope_nonzero;

    // cells indexed protocol-major; raw per-replication records alongside so
    // paired contrasts between protocols can be formed after the fact.
    std::vector<CellSummary> cells;
    std::vector<unsigned char> rep_ok;      // [protocol][n][rep]
    std::vector<unsigned char> rep_reject;  // [protocol][n][rep][slope]
    std::vector<double> rep_error;          // [protocol][n][rep][slope]

    std::size_t cell_index(std::size_t protocol_idx, std::size_t n_idx) const {
        return protocol_idx * n_grid.size() + n_idx;
    }
    const CellSummary& cell(std::size_t protocol_idx, std::size_t n_idx) const {
        return cells[cell_index(protocol_idx, n_idx)];
    }

    // Difference in all-slopes-significant power between two protocols at one
    // cohort size, with the paired standard error over shared replications.
    PairedDifference paired_power_difference(std::size_t protocol_a, std::size_t protocol_b,
                                             std::size_t n_idx) const;
};

ExperimentResult run_power_experiment(const GeneratorConfig& config,
                                      std::span<const Protocol> protocols,
                                      std::span<const std::size_t> n_grid,
                                      std::size_t replications, double alpha,
                                      std::uint64_t master_seed,
                                      const ExperimentOptions& options = {});

// Confounding study: a two-binary-covariate pool where the second covariate
// is dropped after outcome generation, so selection and fitting see only the
// first. The control arm runs the matching single-covariate pool with no
// hidden confounder. Bias of the fitted slope lands in CellSummary::bias.
struct UnmeasuredResult {
    ExperimentResult confounded;
    ExperimentResult control;
};

UnmeasuredResult run_unmeasured_covariate_experiment(std::span<const Protocol> protocols,
                                                     std::span<const std::size_t> n_grid,
                                                     std::size_t replications,
                                                     std::uint64_t master_seed,
                                                     const ExperimentOptions& options = {});

// --- EHR-style sub-pool study ----------------------------------------------

struct EhrCohortReport {
    Protocol protocol = Protocol::Random;
    bool converged = false;
    std::size_t recovered = 0;  // significant here and in the reference fit
    std::size_t missed = 0;
    std::size_t spurious = 0;  // significant here but not in the reference
    double mse_vs_reference = 0.0;
    double balance_ratio_median = 0.0;       // median min/max frequency, binary covariates
    std::vector<double> continuous_band_ks;  // per continuous covariate
    std::vector<double> coefficients;
    std::vector<char> significant;
};

struct EhrStudyResult {
    FittedModel reference;
    std::vector<char> reference_significant;
    std::size_t reference_significant_count = 0;
    std::vector<std::string> covariate_names;
    std::size_t n_subpools = 0;
    std::size_t cohort_n = 0;
    double alpha = 0.05;
    // Two reports per sub-pool: selective (marginal product weights) first,
    // then random.
    std::vector<EhrCohortReport> reports;

    const EhrCohortReport& selective(std::size_t subpool) const {
        return reports[subpool * 2];
    }
    const EhrCohortReport& random(std::size_t subpool) const {
        return reports[subpool * 2 + 1];
    }
};

EhrStudyResult run_ehr_study(const Pool& pool, std::size_t n_subpools, std::size_t cohort_n,
                             double alpha, std::uint64_t master_seed,
                             const ExperimentOptions& options = {});

// The synthetic stand-in cohort-study pool: 8 continuous + 15 binary
// covariates with health-record-like prevalences, quantile-scaled continuous
// columns, and exponential survival outcomes from the catalog coefficients.
std::vector<CovariateSpec> ehr_covariate_specs();
std::vector<double> ehr_prevalences();  // per binary covariate, catalog order
std::vector<double> ehr_true_betas();   // per covariate, catalog order
Pool make_synthetic_ehr_pool(std::uint64_t seed, std::size_t pool_size = 82080);

}  // namespace selrec
