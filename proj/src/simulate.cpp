#include "selrec/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "selrec/errors.hpp"
#include "selrec/format.hpp"
#include "selrec/parallel.hpp"
#include "selrec/rng.hpp"
#include "selrec/stats.hpp"

namespace selrec {

namespace {

void validate_probability(double p, const char* what) {
    if (!(p > 0.0 && p < 1.0)) {
        throw InvalidConfig(std::string(what) + " must lie strictly inside (0, 1), got " +
                            format_double(p));
    }
}

Pool two_binary_pool(const TwoBinaryScheme& scheme, std::size_t n, Rng& rng) {
    double total = 0.0;
    for (double c : scheme.cells) {
        if (!(c >= 0.0)) throw InvalidConfig("cell probabilities must be non-negative");
        total += c;
    }
    if (std::fabs(total - 1.0) > 1e-9) {
        throw InvalidConfig("cell probabilities must sum to 1, got " + format_double(total));
    }
    std::vector<double> x1(n), x2(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform();
        double acc = 0.0;
        std::size_t cell = 3;
        for (std::size_t k = 0; k < 4; ++k) {
            acc += scheme.cells[k];
            if (u < acc) {
                cell = k;
                break;
            }
        }
        x1[i] = cell >= 2 ? 1.0 : -1.0;
        x2[i] = (cell & 1) ? 1.0 : -1.0;
    }
    return Pool({{"x1", CovariateKind::Binary}, {"x2", CovariateKind::Binary}},
                {std::move(x1), std::move(x2)});
}

Pool one_binary_pool(const OneBinaryScheme& scheme, std::size_t n, Rng& rng) {
    validate_probability(scheme.p_plus, "p_plus");
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform() < scheme.p_plus ? 1.0 : -1.0;
    }
    return Pool({{"x1", CovariateKind::Binary}}, {std::move(x)});
}

Pool one_continuous_pool(const OneContinuousScheme& scheme, std::size_t n, Rng& rng) {
    if (!(scheme.sd > 0.0)) throw InvalidConfig("sd must be positive");
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = rng.normal(scheme.mean, scheme.sd);
    return Pool({{"x1", CovariateKind::Continuous}}, {std::move(x)});
}

Pool synthetic_ehr_pool(const SyntheticEhrScheme& scheme, std::size_t n, Rng& rng) {
    const std::size_t nc = scheme.n_continuous;
    const std::size_t nb = scheme.n_binary;
    if (nc + nb == 0) throw InvalidConfig("ehr scheme needs at least one covariate");
    if (scheme.prevalence.size() != nb) {
        throw InvalidConfig("ehr scheme needs one prevalence per binary covariate");
    }
    std::vector<double> threshold(nb);
    for (std::size_t j = 0; j < nb; ++j) {
        validate_probability(scheme.prevalence[j], "prevalence");
        threshold[j] = normal_quantile(scheme.prevalence[j]);
    }

    // Factor loadings are a function of the correlation seed alone so two
    // pools drawn with different seeds share the same dependence structure.
    Rng loading_rng(scheme.correlation_seed);
    std::vector<double> loading(nc + nb);
    for (double& l : loading) l = 0.15 + 0.35 * loading_rng.uniform();

    std::vector<std::vector<double>> cols(nc + nb, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double factor = rng.normal();
        for (std::size_t j = 0; j < nc + nb; ++j) {
            const double l = loading[j];
            const double z = l * factor + std::sqrt(1.0 - l * l) * rng.normal();
            if (j < nc) {
                cols[j][i] = z;
            } else {
                cols[j][i] = z < threshold[j - nc] ? 1.0 : -1.0;
            }
        }
    }

    std::vector<CovariateSpec> specs;
    specs.reserve(nc + nb);
    for (std::size_t j = 0; j < nc; ++j) {
        specs.push_back({"c" + std::to_string(j + 1), CovariateKind::Continuous});
    }
    for (std::size_t j = 0; j < nb; ++j) {
        specs.push_back({"b" + std::to_string(j + 1), CovariateKind::Binary});
    }
    return Pool(std::move(specs), std::move(cols));
}

}  // namespace

Pool gen_pool(const GeneratorConfig& config, std::uint64_t seed) {
    if (config.pool_size == 0) throw InvalidConfig("pool_size must be at least 1");
    Rng rng(seed);
    return std::visit(
        [&](const auto& scheme) -> Pool {
            using T = std::decay_t<decltype(scheme)>;
            if constexpr (std::is_same_v<T, TwoBinaryScheme>) {
                return two_binary_pool(scheme, config.pool_size, rng);
            } else if constexpr (std::is_same_v<T, OneBinaryScheme>) {
                return one_binary_pool(scheme, config.pool_size, rng);
            } else if constexpr (std::is_same_v<T, OneContinuousScheme>) {
                return one_continuous_pool(scheme, config.pool_size, rng);
            } else {
                return synthetic_ehr_pool(scheme, config.pool_size, rng);
            }
        },
        config.covariates);
}

Pool gen_logistic_outcomes(const Pool& pool, double w0, std::span<const double> w,
                           std::uint64_t seed) {
    if (w.size() != pool.dim()) {
        throw DimensionMismatch("logistic outcome needs " + std::to_string(pool.dim()) +
                                " slopes, got " + std::to_string(w.size()));
    }
    Rng rng(seed);
    std::vector<double> y(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        double eta = w0;
        for (std::size_t j = 0; j < pool.dim(); ++j) eta += w[j] * pool.value(i, j);
        const double p = 1.0 / (1.0 + std::exp(-eta));
        y[i] = rng.uniform() < p ? 1.0 : -1.0;
    }
    Pool out = pool;
    out.attach_binary_outcome(std::move(y));
    return out;
}

Pool gen_survival_outcomes(const Pool& pool, std::span<const double> beta,
                           double baseline_rate, double censor_rate, std::uint64_t seed) {
    if (beta.size() != pool.dim()) {
        throw DimensionMismatch("survival outcome needs " + std::to_string(pool.dim()) +
                                " slopes, got " + std::to_string(beta.size()));
    }
    if (!(baseline_rate > 0.0)) throw InvalidValue("baseline_rate must be positive");
    if (!(censor_rate >= 0.0)) throw InvalidValue("censor_rate must be non-negative");
    Rng rng(seed);
    std::vector<double> time(pool.size());
    std::vector<unsigned char> event(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        double eta = 0.0;
        for (std::size_t j = 0; j < pool.dim(); ++j) eta += beta[j] * pool.value(i, j);
        const double rate = baseline_rate * std::exp(eta);
        double t = rng.exponential(rate);
        while (!(t > 0.0)) t = rng.exponential(rate);
        if (censor_rate > 0.0) {
            double c = rng.exponential(censor_rate);
            while (!(c > 0.0)) c = rng.exponential(censor_rate);
            time[i] = std::min(t, c);
            event[i] = t <= c ? 1 : 0;
        } else {
            time[i] = t;
            event[i] = 1;
        }
    }
    Pool out = pool;
    out.attach_survival_outcome(std::move(time), std::move(event));
    return out;
}

Pool gen_pool_with_outcomes(const GeneratorConfig& config, std::uint64_t seed) {
    Pool covariates = gen_pool(config, derive_seed(seed, 1));
    const std::uint64_t outcome_seed = derive_seed(seed, 2);
    return std::visit(
        [&](const auto& outcome) {
            using T = std::decay_t<decltype(outcome)>;
            if constexpr (std::is_same_v<T, LogisticOutcome>) {
                return gen_logistic_outcomes(covariates, outcome.w0, outcome.w, outcome_seed);
            } else {
                return gen_survival_outcomes(covariates, outcome.beta, outcome.baseline_rate,
                                             outcome.censor_rate, outcome_seed);
            }
        },
        config.outcome);
}

// --- harness ----------------------------------------------------------------

namespace {

std::vector<double> outcome_slopes(const OutcomeScheme& outcome) {
    return std::visit(
        [](const auto& o) -> std::vector<double> {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, LogisticOutcome>) {
                return o.w;
            } else {
                return o.beta;
            }
        },
        outcome);
}

Pool project_columns(const Pool& pool, std::span<const std::size_t> keep) {
    std::vector<CovariateSpec> specs;
    std::vector<std::vector<double>> cols;
    for (std::size_t j : keep) {
        specs.push_back(pool.spec(j));
        auto col = pool.column(j);
        cols.emplace_back(col.begin(), col.end());
    }
    Pool out(std::move(specs), std::move(cols));
    if (pool.outcome_kind() == OutcomeKind::Binary) {
        auto y = pool.binary_outcome();
        out.attach_binary_outcome(std::vector<double>(y.begin(), y.end()));
    } else if (pool.outcome_kind() == OutcomeKind::Survival) {
        auto t = pool.survival_time();
        auto e = pool.survival_event();
        out.attach_survival_outcome(std::vector<double>(t.begin(), t.end()),
                                    std::vector<unsigned char>(e.begin(), e.end()));
    }
    return out;
}

FittedModel try_fit_outcome_model(const Pool& sub, CoxTies ties) {
    const Eigen::MatrixXd X = covariate_matrix(sub);
    if (sub.outcome_kind() == OutcomeKind::Binary) {
        auto y = sub.binary_outcome();
        Eigen::VectorXd labels(static_cast<Eigen::Index>(y.size()));
        for (std::size_t i = 0; i < y.size(); ++i) {
            labels[static_cast<Eigen::Index>(i)] = y[i];
        }
        return try_fit_logistic(X, labels);
    }
    if (sub.outcome_kind() == OutcomeKind::Survival) {
        auto t = sub.survival_time();
        Eigen::VectorXd time(static_cast<Eigen::Index>(t.size()));
        for (std::size_t i = 0; i < t.size(); ++i) {
            time[static_cast<Eigen::Index>(i)] = t[i];
        }
        return try_fit_cox(X, time, sub.survival_event(), ties);
    }
    throw SpecMismatch("pool carries no outcome to fit");
}

double proportion_se(double p, std::size_t m) {
    if (m == 0) return 0.0;
    return std::sqrt(p * (1.0 - p) / static_cast<double>(m));
}

double mean_se(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    return sample_sd(values) / std::sqrt(static_cast<double>(values.size()));
}

// Fills the per-replication records and the per-cell summaries; the heart of
// every experiment. make_pool maps a derived seed to a pool with outcomes.
void run_replications(ExperimentResult& result, std::uint64_t master_seed,
                      const ExperimentOptions& options,
                      const std::function<Pool(std::uint64_t)>& make_pool) {
    const std::size_t P = result.protocols.size();
    const std::size_t NG = result.n_grid.size();
    const std::size_t R = result.replications;
    const std::size_t D = result.true_slopes.size();

    result.cells.assign(P * NG, CellSummary{});
    result.rep_ok.assign(P * NG * R, 0);
    result.rep_reject.assign(P * NG * R * D, 0);
    result.rep_error.assign(P * NG * R * D, 0.0);

    // Generated eagerly so configuration errors surface before the parallel
    // region; doubles as the shared pool when fresh_pool is off.
    const Pool base_pool = make_pool(derive_seed(master_seed, 0x5eedULL));
    if (base_pool.dim() != D) {
        throw DimensionMismatch("outcome scheme has " + std::to_string(D) +
                                " slopes but the pool has " + std::to_string(base_pool.dim()) +
                                " covariates");
    }
    for (std::size_t n : result.n_grid) {
        if (n == 0 || n > base_pool.size()) {
            throw InvalidConfig("cohort size " + std::to_string(n) +
                                " is infeasible for pool size " +
                                std::to_string(base_pool.size()));
        }
    }

    const SelectionOptions sel_opts{options.kde_grid, options.band_grid, false};
    const int nt = resolve_threads(options.threads);
    const std::ptrdiff_t reps = static_cast<std::ptrdiff_t>(R);

#pragma omp parallel for schedule(dynamic) num_threads(nt)
    for (std::ptrdiff_t ri = 0; ri < reps; ++ri) {
        const std::size_t r = static_cast<std::size_t>(ri);
        const std::uint64_t rep_seed = derive_seed(master_seed, r);
        Pool local_pool({{"_", CovariateKind::Continuous}}, {{0.0}});
        const Pool* pool = &base_pool;
        if (options.fresh_pool) {
            bool ok = true;
            try {
                local_pool = make_pool(rep_seed);
            } catch (const Error&) {
                ok = false;
            }
            if (!ok) continue;
            pool = &local_pool;
        }

        std::vector<std::string> binary_names;
        for (const auto& s : pool->specs()) {
            if (s.kind == CovariateKind::Binary) binary_names.push_back(s.name);
        }

        for (std::size_t p_idx = 0; p_idx < P; ++p_idx) {
            const Protocol protocol = result.protocols[p_idx];
            RecruitmentWeights weights;
            bool weights_failed = false;
            if (protocol == Protocol::MarginalBalanced ||
                protocol == Protocol::ContinuousBalanced) {
                try {
                    weights = protocol_weights(*pool, protocol, sel_opts);
                } catch (const Error&) {
                    weights_failed = true;
                }
            }
            for (std::size_t n_idx = 0; n_idx < NG; ++n_idx) {
                if (weights_failed) continue;
                const std::size_t slot = (p_idx * NG + n_idx) * R + r;
                try {
                    const std::uint64_t cohort_seed =
                        derive_seed(rep_seed, 16 + p_idx * NG + n_idx);
                    const std::size_t n = result.n_grid[n_idx];
                    Cohort cohort;
                    switch (protocol) {
                        case Protocol::Random:
                            cohort = random_select(pool->size(), n, cohort_seed);
                            break;
                        case Protocol::JointBalanced:
                            cohort = joint_balance_select(*pool, binary_names, n, cohort_seed);
                            break;
                        default:
                            cohort = sample_cohort(weights, n, cohort_seed, protocol);
                            break;
                    }
                    const Pool sub = pool->subset(cohort.indices);
                    const FittedModel model = try_fit_outcome_model(sub, options.ties);
                    if (!model.converged) continue;
                    const Eigen::Index offset = model.kind == ModelKind::Logistic ? 1 : 0;
                    result.rep_ok[slot] = 1;
                    for (std::size_t j = 0; j < D; ++j) {
                        const Eigen::Index cj = static_cast<Eigen::Index>(j) + offset;
                        result.rep_error[slot * D + j] =
                            model.coefficients[cj] - result.true_slopes[j];
                        result.rep_reject[slot * D + j] =
                            model.p_values[cj] < result.alpha ? 1 : 0;
                    }
                } catch (const Error&) {
                    // cell stays non-converged for this replication
                }
            }
        }
    }

    // Deterministic fold in replication order, independent of the schedule.
    for (std::size_t p_idx = 0; p_idx < P; ++p_idx) {
        for (std::size_t n_idx = 0; n_idx < NG; ++n_idx) {
            CellSummary& cell = result.cells[result.cell_index(p_idx, n_idx)];
            cell.attempted = R;
            const std::size_t base = (p_idx * NG + n_idx) * R;

            std::size_t m = 0;
            std::size_t all_hits = 0;
            std::vector<std::size_t> slope_hits(D, 0);
            std::vector<double> mse_values;
            std::vector<double> type1_values;
            std::vector<std::vector<double>> err_values(D);
            mse_values.reserve(R);
            std::size_t n_zero = 0;
            for (std::size_t j = 0; j < D; ++j) {
                if (!result.slope_nonzero[j]) ++n_zero;
            }

            for (std::size_t r = 0; r < R; ++r) {
                if (!result.rep_ok[base + r]) continue;
                ++m;
                bool all_sig = true;
                double sq = 0.0;
                double zero_hits = 0.0;
                for (std::size_t j = 0; j < D; ++j) {
                    const std::size_t idx = (base + r) * D + j;
                    const bool rej = result.rep_reject[idx] != 0;
                    if (rej) ++slope_hits[j];
                    if (result.slope_nonzero[j] && !rej) all_sig = false;
                    if (!result.slope_nonzero[j] && rej) zero_hits += 1.0;
                    const double err = result.rep_error[idx];
                    sq += err * err;
                    err_values[j].push_back(err);
                }
                if (all_sig) ++all_hits;
                mse_values.push_back(sq / static_cast<double>(D));
                if (n_zero > 0) type1_values.push_back(zero_hits / static_cast<double>(n_zero));
            }

            cell.converged = m;
            cell.nonconverged_rate =
                1.0 - static_cast<double>(m) / static_cast<double>(cell.attempted);
            cell.reject_rate.assign(D, 0.0);
            cell.reject_rate_se.assign(D, 0.0);
            cell.bias.assign(D, 0.0);
            cell.bias_se.assign(D, 0.0);
            cell.has_type1 = n_zero > 0;
            if (m > 0) {
                cell.power_all = static_cast<double>(all_hits) / static_cast<double>(m);
                cell.power_all_se = proportion_se(cell.power_all, m);
                for (std::size_t j = 0; j < D; ++j) {
                    cell.reject_rate[j] =
                        static_cast<double>(slope_hits[j]) / static_cast<double>(m);
                    cell.reject_rate_se[j] = proportion_se(cell.reject_rate[j], m);
                    cell.bias[j] = mean(err_values[j]);
                    cell.bias_se[j] = mean_se(err_values[j]);
                }
                cell.mse = mean(mse_values);
                cell.mse_se = mean_se(mse_values);
                if (n_zero > 0) {
                    cell.type1 = mean(type1_values);
                    cell.type1_se = proportion_se(cell.type1, m);
                }
            }
        }
    }

    for (std::size_t p_idx = 0; p_idx < P; ++p_idx) {
        for (std::size_t n_idx = 0; n_idx < NG; ++n_idx) {
            const CellSummary& cell = result.cell(p_idx, n_idx);
            if (cell.nonconverged_rate > options.max_nonconverged_rate) {
                throw ExcessiveNonConvergence(
                    std::string(protocol_name(result.protocols[p_idx])) + " at n=" +
                    std::to_string(result.n_grid[n_idx]) + ": non-convergence rate " +
                    format_double(cell.nonconverged_rate) + " exceeds " +
                    format_double(options.max_nonconverged_rate));
            }
        }
    }
}

}  // namespace

PairedDifference ExperimentResult::paired_power_difference(std::size_t protocol_a,
                                                           std::size_t protocol_b,
                                                           std::size_t n_idx) const {
    const std::size_t D = true_slopes.size();
    const std::size_t base_a = (protocol_a * n_grid.size() + n_idx) * replications;
    const std::size_t base_b = (protocol_b * n_grid.size() + n_idx) * replications;
    std::vector<double> diffs;
    diffs.reserve(replications);
    for (std::size_t r = 0; r < replications; ++r) {
        if (!rep_ok[base_a + r] || !rep_ok[base_b + r]) continue;
        double a = 1.0, b = 1.0;
        for (std::size_t j = 0; j < D; ++j) {
            if (!slope_nonzero[j]) continue;
            if (!rep_reject[(base_a + r) * D + j]) a = 0.0;
            if (!rep_reject[(base_b + r) * D + j]) b = 0.0;
        }
        diffs.push_back(a - b);
    }
    if (diffs.size() < 2) {
        throw InvalidValue("paired difference needs at least two shared replications");
    }
    return {mean(diffs), mean_se(diffs)};
}

ExperimentResult run_power_experiment(const GeneratorConfig& config,
                                      std::span<const Protocol> protocols,
                                      std::span<const std::size_t> n_grid,
                                      std::size_t replications, double alpha,
                                      std::uint64_t master_seed,
                                      const ExperimentOptions& options) {
    if (protocols.empty()) throw InvalidConfig("need at least one protocol");
    if (n_grid.empty()) throw InvalidConfig("need at least one cohort size");
    if (replications == 0) throw InvalidConfig("need at least one replication");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidValue("alpha must lie in (0, 1)");

    ExperimentResult result;
    result.protocols.assign(protocols.begin(), protocols.end());
    result.n_grid.assign(n_grid.begin(), n_grid.end());
    result.replications = replications;
    result.alpha = alpha;
    result.true_slopes = outcome_slopes(config.outcome);
    result.slope_nonzero.resize(result.true_slopes.size());
    for (std::size_t j = 0; j < result.true_slopes.size(); ++j) {
        result.slope_nonzero[j] = result.true_slopes[j] != 0.0 ? 1 : 0;
    }

    run_replications(result, master_seed, options, [&config](std::uint64_t seed) {
        return gen_pool_with_outcomes(config, seed);
    });
    return result;
}

UnmeasuredResult run_unmeasured_covariate_experiment(std::span<const Protocol> protocols,
                                                     std::span<const std::size_t> n_grid,
                                                     std::size_t replications,
                                                     std::uint64_t master_seed,
                                                     const ExperimentOptions& options) {
    if (protocols.empty()) throw InvalidConfig("need at least one protocol");
    if (n_grid.empty()) throw InvalidConfig("need at least one cohort size");
    if (replications == 0) throw InvalidConfig("need at least one replication");

    constexpr double kAlpha = 0.05;
    constexpr double kW0 = -1.0 / 6.0;
    constexpr double kW1 = -1.0 / 3.0;
    constexpr double kW2 = 1.0 / 4.0;

    UnmeasuredResult out;

    // Confounded arm: x1 and x2 independent with P(x1=+1)=0.75, P(x2=+1)=0.5;
    // the outcome depends on both but only x1 survives into the analysis pool.
    GeneratorConfig confounded_config;
    confounded_config.pool_size = 10000;
    confounded_config.covariates = TwoBinaryScheme{{0.125, 0.125, 0.375, 0.375}};
    confounded_config.outcome = LogisticOutcome{kW0, {kW1, kW2}};

    out.confounded.protocols.assign(protocols.begin(), protocols.end());
    out.confounded.n_grid.assign(n_grid.begin(), n_grid.end());
    out.confounded.replications = replications;
    out.confounded.alpha = kAlpha;
    out.confounded.true_slopes = {kW1};
    out.confounded.slope_nonzero = {1};
    const std::size_t keep[] = {0};
    run_replications(out.confounded, derive_seed(master_seed, 11), options,
                     [&confounded_config, &keep](std::uint64_t seed) {
                         const Pool full = gen_pool_with_outcomes(confounded_config, seed);
                         return project_columns(full, keep);
                     });

    // Control arm: single covariate, correctly specified model.
    GeneratorConfig control_config;
    control_config.pool_size = 10000;
    control_config.covariates = OneBinaryScheme{0.75};
    control_config.outcome = LogisticOutcome{kW0, {kW1}};

    out.control.protocols.assign(protocols.begin(), protocols.end());
    out.control.n_grid.assign(n_grid.begin(), n_grid.end());
    out.control.replications = replications;
    out.control.alpha = kAlpha;
    out.control.true_slopes = {kW1};
    out.control.slope_nonzero = {1};
    run_replications(out.control, derive_seed(master_seed, 22), options,
                     [&control_config](std::uint64_t seed) {
                         return gen_pool_with_outcomes(control_config, seed);
                     });
    return out;
}

// --- EHR study ---------------------------------------------------------------

namespace {

double median_of(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

EhrStudyResult run_ehr_study(const Pool& pool, std::size_t n_subpools, std::size_t cohort_n,
                             double alpha, std::uint64_t master_seed,
                             const ExperimentOptions& options) {
    if (pool.outcome_kind() != OutcomeKind::Survival) {
        throw SpecMismatch("ehr study needs a pool with survival outcomes");
    }
    if (n_subpools == 0) throw InvalidConfig("need at least one sub-pool");
    const std::size_t block = pool.size() / n_subpools;
    if (block == 0) throw InvalidConfig("more sub-pools than pool members");
    if (cohort_n == 0 || cohort_n > block) {
        throw InvalidConfig("cohort size " + std::to_string(cohort_n) +
                            " is infeasible for sub-pools of " + std::to_string(block));
    }
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidValue("alpha must lie in (0, 1)");

    EhrStudyResult study;
    study.n_subpools = n_subpools;
    study.cohort_n = cohort_n;
    study.alpha = alpha;
    for (const auto& s : pool.specs()) study.covariate_names.push_back(s.name);

    study.reference = fit_pool_model(pool, options.ties);
    const SignificanceReport ref_sig = significance(study.reference, alpha);
    study.reference_significant = ref_sig.significant;
    for (char c : ref_sig.significant) {
        if (c) ++study.reference_significant_count;
    }

    // Uniformly random partition into equally sized sub-pools (any remainder
    // rows are left out, mirroring a pool size not divisible by the count).
    std::vector<std::size_t> shuffled(pool.size());
    std::iota(shuffled.begin(), shuffled.end(), std::size_t{0});
    Rng part_rng(derive_seed(master_seed, 0));
    for (std::size_t i = pool.size() - 1; i > 0; --i) {
        const std::size_t j = part_rng.uniform_below(i + 1);
        std::swap(shuffled[i], shuffled[j]);
    }

    std::vector<std::size_t> continuous_cols;
    for (std::size_t j = 0; j < pool.dim(); ++j) {
        if (pool.spec(j).kind == CovariateKind::Continuous) continuous_cols.push_back(j);
    }

    study.reports.assign(2 * n_subpools, EhrCohortReport{});
    const SelectionOptions sel_opts{options.kde_grid, options.band_grid, false};
    const int nt = resolve_threads(options.threads);
    const std::ptrdiff_t subpools = static_cast<std::ptrdiff_t>(n_subpools);

#pragma omp parallel for schedule(dynamic) num_threads(nt)
    for (std::ptrdiff_t si = 0; si < subpools; ++si) {
        const std::size_t s = static_cast<std::size_t>(si);
        std::vector<std::size_t> rows(shuffled.begin() + static_cast<std::ptrdiff_t>(s * block),
                                      shuffled.begin() +
                                          static_cast<std::ptrdiff_t>((s + 1) * block));
        std::sort(rows.begin(), rows.end());
        const Pool sub = pool.subset(rows);

        // Per-covariate truncation bands of this sub-pool, for the cohort
        // uniformity diagnostics.
        std::vector<TruncationBand> bands;
        bands.reserve(continuous_cols.size());
        for (std::size_t j : continuous_cols) {
            const auto col = sub.column(j);
            const DensityEstimate kde = kde_fit(col);
            const DensityTable table(kde, options.kde_grid);
            bands.push_back(truncation_band(col, table, options.band_grid));
        }

        for (int arm = 0; arm < 2; ++arm) {
            EhrCohortReport& report = study.reports[s * 2 + static_cast<std::size_t>(arm)];
            report.protocol = arm == 0 ? Protocol::MarginalBalanced : Protocol::Random;
            try {
                const std::uint64_t seed =
                    derive_seed(master_seed, 1000 + 2 * s + static_cast<std::size_t>(arm));
                const Cohort cohort =
                    arm == 0 ? select_cohort(sub, Protocol::MarginalBalanced, cohort_n, seed,
                                             sel_opts)
                             : random_select(sub.size(), cohort_n, seed);
                const Pool cpool = sub.subset(cohort.indices);

                std::vector<double> ratios;
                for (std::size_t j = 0; j < cpool.dim(); ++j) {
                    if (cpool.spec(j).kind != CovariateKind::Binary) continue;
                    std::size_t plus = 0;
                    for (double v : cpool.column(j)) {
                        if (v == 1.0) ++plus;
                    }
                    const std::size_t minus = cpool.size() - plus;
                    const std::size_t lo = std::min(plus, minus);
                    const std::size_t hi = std::max(plus, minus);
                    ratios.push_back(hi == 0 ? 0.0
                                             : static_cast<double>(lo) /
                                                   static_cast<double>(hi));
                }
                report.balance_ratio_median = median_of(std::move(ratios));

                report.continuous_band_ks.clear();
                for (std::size_t k = 0; k < continuous_cols.size(); ++k) {
                    std::vector<double> in_band;
                    for (double v : cpool.column(continuous_cols[k])) {
                        if (v >= bands[k].lower && v <= bands[k].upper) in_band.push_back(v);
                    }
                    report.continuous_band_ks.push_back(
                        in_band.size() < 2
                            ? 1.0
                            : ks_uniform(in_band, bands[k].lower, bands[k].upper));
                }

                const FittedModel model = try_fit_outcome_model(cpool, options.ties);
                report.converged = model.converged;
                if (!model.converged) continue;
                const SignificanceReport sig = significance(model, alpha);
                report.significant = sig.significant;
                report.coefficients.resize(pool.dim());
                double sq = 0.0;
                for (std::size_t j = 0; j < pool.dim(); ++j) {
                    const Eigen::Index jj = static_cast<Eigen::Index>(j);
                    report.coefficients[j] = model.coefficients[jj];
                    const double err =
                        model.coefficients[jj] - study.reference.coefficients[jj];
                    sq += err * err;
                    const bool ref = study.reference_significant[j] != 0;
                    const bool here = sig.significant[j] != 0;
                    if (ref && here) ++report.recovered;
                    if (ref && !here) ++report.missed;
                    if (!ref && here) ++report.spurious;
                }
                report.mse_vs_reference = sq / static_cast<double>(pool.dim());
            } catch (const Error&) {
                report.converged = false;
            }
        }
    }
    return study;
}

// --- synthetic EHR pool ------------------------------------------------------

std::vector<CovariateSpec> ehr_covariate_specs() {
    return {
        {"age", CovariateKind::Continuous},
        {"sbp", CovariateKind::Continuous},
        {"dbp", CovariateKind::Continuous},
        {"chol", CovariateKind::Continuous},
        {"hdl", CovariateKind::Continuous},
        {"creatinine", CovariateKind::Continuous},
        {"wbc", CovariateKind::Continuous},
        {"haemoglobin", CovariateKind::Continuous},
        {"gender", CovariateKind::Binary},
        {"smoking", CovariateKind::Binary},
        {"hypertension", CovariateKind::Binary},
        {"diabetes", CovariateKind::Binary},
        {"nitrates", CovariateKind::Binary},
        {"prior_pci", CovariateKind::Binary},
        {"prior_cabg", CovariateKind::Binary},
        {"aaa", CovariateKind::Binary},
        {"pad", CovariateKind::Binary},
        {"af", CovariateKind::Binary},
        {"stroke", CovariateKind::Binary},
        {"renal", CovariateKind::Binary},
        {"copd", CovariateKind::Binary},
        {"cancer", CovariateKind::Binary},
        {"depression", CovariateKind::Binary},
    };
}

std::vector<double> ehr_prevalences() {
    return {0.57, 0.20, 0.88, 0.15, 0.27, 0.046, 0.019, 0.011,
            0.07, 0.116, 0.054, 0.067, 0.351, 0.08, 0.191};
}

std::vector<double> ehr_true_betas() {
    return {
        0.60,  0.05,  -0.04, 0.0,  0.0,  0.05, 0.06,  -0.09,  // continuous
        0.10,  0.12,  0.08,  0.14, 0.05, -0.07, -0.13, 0.0,   // gender .. aaa
        0.17,  0.16,  0.22,  0.17, 0.07, 0.23,  0.06,          // pad .. depression
    };
}

Pool make_synthetic_ehr_pool(std::uint64_t seed, std::size_t pool_size) {
    SyntheticEhrScheme scheme;
    scheme.prevalence = ehr_prevalences();

    GeneratorConfig config;
    config.pool_size = pool_size;
    config.covariates = scheme;

    const Pool raw = gen_pool(config, derive_seed(seed, 1));
    std::vector<std::vector<double>> cols;
    cols.reserve(raw.dim());
    for (std::size_t j = 0; j < raw.dim(); ++j) {
        auto col = raw.column(j);
        cols.emplace_back(col.begin(), col.end());
    }
    Pool named(ehr_covariate_specs(), std::move(cols));
    const Pool scaled = apply_scaling(named, fit_scaling(named));
    return gen_survival_outcomes(scaled, ehr_true_betas(), 0.08, 0.25, derive_seed(seed, 2));
}

}  // namespace selrec
