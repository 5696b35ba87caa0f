// Command-line driver: pool ingestion, weight computation, cohort selection,
// Monte-Carlo experiments, and model fitting. Every run writes a manifest with
// the fully resolved configuration; re-running a command from its manifest
// reproduces the CSV outputs byte for byte.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "selrec/density.hpp"
#include "selrec/errors.hpp"
#include "selrec/format.hpp"
#include "selrec/models.hpp"
#include "selrec/pool.hpp"
#include "selrec/recruit.hpp"
#include "selrec/rng.hpp"
#include "selrec/simulate.hpp"
#include "selrec/stats.hpp"
#include "selrec/svg_plot.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace selrec;

namespace {

json load_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InvalidConfig(path.string() + ": " + e.what());
    }
}

std::string timestamp_utc() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::vector<CovariateSpec> parse_covariates(const json& cfg) {
    if (!cfg.contains("covariates") || !cfg["covariates"].is_array() ||
        cfg["covariates"].empty()) {
        throw InvalidConfig("config needs a non-empty 'covariates' array");
    }
    std::vector<CovariateSpec> specs;
    for (const auto& c : cfg["covariates"]) {
        CovariateSpec s;
        s.name = c.at("name").get<std::string>();
        const std::string kind = c.at("kind").get<std::string>();
        if (kind == "binary") {
            s.kind = CovariateKind::Binary;
        } else if (kind == "continuous") {
            s.kind = CovariateKind::Continuous;
        } else {
            throw InvalidConfig("covariate '" + s.name + "': unknown kind '" + kind + "'");
        }
        specs.push_back(std::move(s));
    }
    return specs;
}

OutcomeKind parse_outcome_kind(const std::string& name) {
    if (name == "none") return OutcomeKind::None;
    if (name == "binary") return OutcomeKind::Binary;
    if (name == "survival") return OutcomeKind::Survival;
    throw InvalidConfig("unknown outcome kind '" + name + "'");
}

Pool load_pool(const json& cfg) {
    const std::string path = cfg.at("pool").get<std::string>();
    if (path.empty()) throw InvalidConfig("config needs a 'pool' CSV path");
    const auto specs = parse_covariates(cfg);
    const OutcomeKind outcome = parse_outcome_kind(cfg.value("outcome", "none"));
    return ingest_csv(fs::path(path), specs, outcome);
}

GeneratorConfig parse_generator(const json& g) {
    GeneratorConfig config;
    config.pool_size = g.at("pool_size").get<std::size_t>();
    const json& cov = g.at("covariates");
    const std::string scheme = cov.at("scheme").get<std::string>();
    if (scheme == "two-binary") {
        TwoBinaryScheme s;
        const auto& cells = cov.at("cells");
        if (cells.size() != 4) throw InvalidConfig("two-binary scheme needs 4 cells");
        for (std::size_t i = 0; i < 4; ++i) s.cells[i] = cells[i].get<double>();
        config.covariates = s;
    } else if (scheme == "one-binary") {
        config.covariates = OneBinaryScheme{cov.at("p_plus").get<double>()};
    } else if (scheme == "one-continuous") {
        config.covariates =
            OneContinuousScheme{cov.at("mean").get<double>(), cov.at("sd").get<double>()};
    } else if (scheme == "synthetic-ehr") {
        SyntheticEhrScheme s;
        s.n_binary = cov.at("n_binary").get<std::size_t>();
        s.n_continuous = cov.at("n_continuous").get<std::size_t>();
        s.prevalence = cov.at("prevalence").get<std::vector<double>>();
        s.correlation_seed = cov.at("correlation_seed").get<std::uint64_t>();
        config.covariates = s;
    } else {
        throw InvalidConfig("unknown covariate scheme '" + scheme + "'");
    }
    const json& out = g.at("outcome");
    const std::string model = out.at("model").get<std::string>();
    if (model == "logistic") {
        LogisticOutcome o;
        o.w0 = out.at("w0").get<double>();
        o.w = out.at("w").get<std::vector<double>>();
        config.outcome = o;
    } else if (model == "cox") {
        CoxExponentialOutcome o;
        o.beta = out.at("beta").get<std::vector<double>>();
        o.baseline_rate = out.at("baseline_rate").get<double>();
        o.censor_rate = out.at("censor_rate").get<double>();
        config.outcome = o;
    } else {
        throw InvalidConfig("unknown outcome model '" + model + "'");
    }
    return config;
}

std::vector<Protocol> parse_protocols(const json& cfg) {
    std::vector<Protocol> protocols;
    for (const auto& p : cfg.at("protocols")) {
        protocols.push_back(parse_protocol(p.get<std::string>()));
    }
    if (protocols.empty()) throw InvalidConfig("config needs at least one protocol");
    return protocols;
}

ExperimentOptions parse_experiment_options(const json& cfg) {
    ExperimentOptions options;
    options.threads = cfg.value("threads", 0);
    options.fresh_pool = cfg.value("fresh_pool", true);
    options.kde_grid = cfg.value("kde_grid", std::size_t{4096});
    options.band_grid = cfg.value("band_grid", std::size_t{1024});
    const std::string ties = cfg.value("ties", "efron");
    if (ties == "efron") {
        options.ties = CoxTies::Efron;
    } else if (ties == "breslow") {
        options.ties = CoxTies::Breslow;
    } else {
        throw InvalidConfig("unknown ties rule '" + ties + "'");
    }
    return options;
}

SelectionOptions selection_options(const json& cfg) {
    SelectionOptions opts;
    opts.kde_grid = cfg.value("kde_grid", std::size_t{4096});
    opts.band_grid = cfg.value("band_grid", std::size_t{1024});
    return opts;
}

fs::path prepare_out_dir(const json& cfg) {
    const std::string out = cfg.at("out").get<std::string>();
    if (out.empty()) throw InvalidConfig("config needs an 'out' directory");
    fs::path dir(out);
    fs::create_directories(dir);
    return dir;
}

void write_manifest(const fs::path& dir, const json& cfg) {
    json manifest = cfg;
    manifest["created"] = timestamp_utc();
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
}

// --- config resolution ------------------------------------------------------

// Base config -> config file -> explicit flags, later layers winning. The
// config file may be a previous run's manifest; its bookkeeping keys are
// dropped and its command, when present, must match.
struct ConfigLayers {
    std::string command;
    json base;
    std::string config_path;
    json flag_overrides = json::object();

    json resolve() const {
        json cfg = base;
        if (!config_path.empty()) {
            json file = load_json(config_path);
            if (file.contains("command")) {
                const std::string cmd = file["command"].get<std::string>();
                if (cmd != command) {
                    throw InvalidConfig("config file is for command '" + cmd +
                                        "', not '" + command + "'");
                }
                file.erase("command");
            }
            if (file.contains("created")) file.erase("created");
            cfg.merge_patch(file);
        }
        json flags = flag_overrides;
        cfg.merge_patch(flags);
        json result = json::object();
        result["command"] = command;
        for (auto& [key, value] : cfg.items()) result[key] = value;
        return result;
    }
};

void apply_spec_file(json& overrides, const std::string& spec_path) {
    if (spec_path.empty()) return;
    const json spec = load_json(spec_path);
    if (spec.contains("covariates")) overrides["covariates"] = spec["covariates"];
    if (spec.contains("outcome")) overrides["outcome"] = spec["outcome"];
}

// --- CSV writers ------------------------------------------------------------

void write_weights_csv(const fs::path& path, const RecruitmentWeights& weights) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "row,unnormalized,normalized\n";
    for (std::size_t i = 0; i < weights.normalized.size(); ++i) {
        out << i << ',' << format_double(weights.unnormalized[i]) << ','
            << format_double(weights.normalized[i]) << '\n';
    }
}

void write_cohort_csv(const fs::path& path, const Pool& pool, const Cohort& cohort) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "row";
    for (const auto& s : pool.specs()) out << ',' << s.name;
    if (pool.outcome_kind() == OutcomeKind::Binary) out << ",y";
    if (pool.outcome_kind() == OutcomeKind::Survival) out << ",time,event";
    out << '\n';
    for (std::size_t row : cohort.indices) {
        out << row;
        for (std::size_t j = 0; j < pool.dim(); ++j) {
            out << ',' << format_double(pool.value(row, j));
        }
        if (pool.outcome_kind() == OutcomeKind::Binary) {
            out << ',' << format_double(pool.binary_outcome()[row]);
        } else if (pool.outcome_kind() == OutcomeKind::Survival) {
            out << ',' << format_double(pool.survival_time()[row]) << ','
                << static_cast<int>(pool.survival_event()[row]);
        }
        out << '\n';
    }
}

struct MetricRow {
    std::string protocol;
    std::size_t n = 0;
    std::string metric;
    double value = 0.0;
    double mc_se = 0.0;
    std::size_t replications = 0;
};

void write_results_csv(const fs::path& path, const std::vector<MetricRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "protocol,n,metric,value,mc_se,replications\n";
    for (const auto& r : rows) {
        out << r.protocol << ',' << r.n << ',' << r.metric << ',' << format_double(r.value)
            << ',' << format_double(r.mc_se) << ',' << r.replications << '\n';
    }
}

// Metrics for one experiment grid, in declaration order. A non-empty prefix
// tags every metric name (used by the two-arm confounding study).
void append_experiment_rows(std::vector<MetricRow>& rows, const ExperimentResult& result,
                            const std::string& prefix) {
    const std::size_t D = result.true_slopes.size();
    std::size_t n_nonzero = 0;
    for (char c : result.slope_nonzero) {
        if (c) ++n_nonzero;
    }
    for (std::size_t p = 0; p < result.protocols.size(); ++p) {
        const std::string protocol(protocol_name(result.protocols[p]));
        for (std::size_t ni = 0; ni < result.n_grid.size(); ++ni) {
            const CellSummary& cell = result.cell(p, ni);
            const std::size_t n = result.n_grid[ni];
            const std::size_t m = cell.converged;
            const auto push = [&](const std::string& metric, double value, double se,
                                  std::size_t reps) {
                rows.push_back({protocol, n, prefix + metric, value, se, reps});
            };
            if (n_nonzero > 0) {
                push("power_all", cell.power_all, cell.power_all_se, m);
                double mean_rate = 0.0;
                for (std::size_t j = 0; j < D; ++j) {
                    if (result.slope_nonzero[j]) mean_rate += cell.reject_rate[j];
                }
                mean_rate /= static_cast<double>(n_nonzero);
                const double se =
                    m == 0 ? 0.0
                           : std::sqrt(mean_rate * (1.0 - mean_rate) /
                                       static_cast<double>(m));
                push("power_mean", mean_rate, se, m);
            }
            for (std::size_t j = 0; j < D; ++j) {
                push("reject_rate_" + std::to_string(j + 1), cell.reject_rate[j],
                     cell.reject_rate_se[j], m);
            }
            if (cell.has_type1) push("type1", cell.type1, cell.type1_se, m);
            push("mse", cell.mse, cell.mse_se, m);
            for (std::size_t j = 0; j < D; ++j) {
                push("bias_" + std::to_string(j + 1), cell.bias[j], cell.bias_se[j], m);
            }
            push("nonconverged_rate", cell.nonconverged_rate, 0.0, cell.attempted);
        }
    }
}

std::vector<double> grid_as_double(const std::vector<std::size_t>& grid) {
    return std::vector<double>(grid.begin(), grid.end());
}

void write_experiment_plots(const fs::path& dir, const ExperimentResult& result,
                            const std::string& stem) {
    const std::vector<double> x = grid_as_double(result.n_grid);
    std::vector<PlotSeries> power, mse, type1;
    bool any_type1 = false;
    for (std::size_t p = 0; p < result.protocols.size(); ++p) {
        PlotSeries ps{std::string(protocol_name(result.protocols[p])), x, {}};
        PlotSeries ms = ps, ts = ps;
        for (std::size_t ni = 0; ni < result.n_grid.size(); ++ni) {
            const CellSummary& cell = result.cell(p, ni);
            ps.y.push_back(cell.power_all);
            ms.y.push_back(cell.mse);
            ts.y.push_back(cell.type1);
            any_type1 = any_type1 || cell.has_type1;
        }
        power.push_back(std::move(ps));
        mse.push_back(std::move(ms));
        type1.push_back(std::move(ts));
    }
    write_line_plot(dir / (stem + "power.svg"), "Power (all nonzero slopes significant)",
                    "cohort size n", "power", power, std::make_pair(0.0, 1.0));
    write_line_plot(dir / (stem + "mse.svg"), "Mean squared slope error", "cohort size n",
                    "MSE", mse);
    if (any_type1) {
        write_line_plot(dir / (stem + "type1.svg"), "Type-I error rate", "cohort size n",
                        "rejection rate", type1);
    }
}

// --- subcommands ------------------------------------------------------------

int cmd_weights(const json& cfg) {
    const fs::path dir = prepare_out_dir(cfg);
    const Pool pool = load_pool(cfg);
    const Protocol protocol = parse_protocol(cfg.value("protocol", "marginal"));
    if (protocol != Protocol::MarginalBalanced && protocol != Protocol::ContinuousBalanced) {
        throw InvalidConfig("protocol '" + std::string(protocol_name(protocol)) +
                            "' has no per-candidate weights; use marginal, mixed, or "
                            "continuous");
    }
    const RecruitmentWeights weights = protocol_weights(pool, protocol, selection_options(cfg));
    write_weights_csv(dir / "weights.csv", weights);
    write_manifest(dir, cfg);
    std::cout << "wrote " << (dir / "weights.csv").string() << " (" << pool.size()
              << " rows)\n";
    return 0;
}

int cmd_select(const json& cfg) {
    const fs::path dir = prepare_out_dir(cfg);
    const Pool pool = load_pool(cfg);
    const Protocol protocol = parse_protocol(cfg.value("protocol", "marginal"));
    const std::size_t n = cfg.at("n").get<std::size_t>();
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    Cohort cohort;
    try {
        cohort = select_cohort(pool, protocol, n, seed, selection_options(cfg));
    } catch (const InfeasibleCohort& e) {
        throw InfeasibleCohort(std::string(e.what()) +
                               " (reduce n or check the covariate distribution)");
    } catch (const TooManyStrata& e) {
        throw TooManyStrata(std::string(e.what()) +
                            " (joint balancing needs n >= the number of covariate cells)");
    }
    write_cohort_csv(dir / "cohort.csv", pool, cohort);
    write_manifest(dir, cfg);
    std::cout << "wrote " << (dir / "cohort.csv").string() << " (" << cohort.indices.size()
              << " of " << pool.size() << " rows";
    if (cohort.imperfect) std::cout << ", stratum quotas redistributed";
    std::cout << ")\n";
    return 0;
}

int simulate_power(const json& cfg, const fs::path& dir) {
    const GeneratorConfig generator = parse_generator(cfg.at("generator"));
    const std::vector<Protocol> protocols = parse_protocols(cfg);
    const std::vector<std::size_t> n_grid = cfg.at("n_grid").get<std::vector<std::size_t>>();
    const std::size_t R = cfg.at("replications").get<std::size_t>();
    const double alpha = cfg.at("alpha").get<double>();
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();

    const ExperimentResult result = run_power_experiment(
        generator, protocols, n_grid, R, alpha, seed, parse_experiment_options(cfg));

    std::vector<MetricRow> rows;
    append_experiment_rows(rows, result, "");
    write_results_csv(dir / "results.csv", rows);
    write_experiment_plots(dir, result, "");
    return 0;
}

int simulate_unmeasured(const json& cfg, const fs::path& dir) {
    const std::vector<Protocol> protocols = parse_protocols(cfg);
    const std::vector<std::size_t> n_grid = cfg.at("n_grid").get<std::vector<std::size_t>>();
    const std::size_t R = cfg.at("replications").get<std::size_t>();
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();

    const UnmeasuredResult result = run_unmeasured_covariate_experiment(
        protocols, n_grid, R, seed, parse_experiment_options(cfg));

    std::vector<MetricRow> rows;
    append_experiment_rows(rows, result.confounded, "confounded_");
    append_experiment_rows(rows, result.control, "control_");
    write_results_csv(dir / "results.csv", rows);

    const std::vector<double> x = grid_as_double(result.confounded.n_grid);
    std::vector<PlotSeries> bias;
    for (std::size_t p = 0; p < protocols.size(); ++p) {
        PlotSeries conf{"confounded " + std::string(protocol_name(protocols[p])), x, {}};
        PlotSeries ctrl{"control " + std::string(protocol_name(protocols[p])), x, {}};
        for (std::size_t ni = 0; ni < n_grid.size(); ++ni) {
            conf.y.push_back(result.confounded.cell(p, ni).bias[0]);
            ctrl.y.push_back(result.control.cell(p, ni).bias[0]);
        }
        bias.push_back(std::move(conf));
        bias.push_back(std::move(ctrl));
    }
    write_line_plot(dir / "bias.svg", "Slope bias with and without the hidden covariate",
                    "cohort size n", "bias", bias);
    return 0;
}

int simulate_ehr(const json& cfg, const fs::path& dir) {
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const std::size_t n_subpools = cfg.at("n_subpools").get<std::size_t>();
    const std::size_t cohort_n = cfg.at("cohort_n").get<std::size_t>();
    const double alpha = cfg.at("alpha").get<double>();

    Pool pool = cfg.value("pool", "").empty()
                    ? make_synthetic_ehr_pool(derive_seed(seed, 7),
                                              cfg.at("pool_size").get<std::size_t>())
                    : load_pool(cfg);
    const EhrStudyResult study =
        run_ehr_study(pool, n_subpools, cohort_n, alpha, seed, parse_experiment_options(cfg));

    // Per-sub-pool detail, then the aggregated results table.
    {
        std::ofstream out(dir / "subpools.csv", std::ios::binary);
        if (!out) throw IoError("cannot write " + (dir / "subpools.csv").string());
        out << "subpool,protocol,converged,recovered,missed,spurious,mse_vs_reference,"
               "balance_ratio_median,max_band_ks\n";
        for (std::size_t s = 0; s < study.n_subpools; ++s) {
            for (int arm = 0; arm < 2; ++arm) {
                const EhrCohortReport& r = study.reports[s * 2 + static_cast<std::size_t>(arm)];
                double max_ks = 0.0;
                for (double k : r.continuous_band_ks) max_ks = std::max(max_ks, k);
                out << s << ',' << protocol_name(r.protocol) << ',' << (r.converged ? 1 : 0)
                    << ',' << r.recovered << ',' << r.missed << ',' << r.spurious << ','
                    << format_double(r.mse_vs_reference) << ','
                    << format_double(r.balance_ratio_median) << ',' << format_double(max_ks)
                    << '\n';
            }
        }
    }

    std::vector<MetricRow> rows;
    rows.push_back({"reference", pool.size(), "significant_count",
                    static_cast<double>(study.reference_significant_count), 0.0, 1});
    for (int arm = 0; arm < 2; ++arm) {
        std::vector<double> recovered, spurious, mse, balance, ks;
        for (std::size_t s = 0; s < study.n_subpools; ++s) {
            const EhrCohortReport& r = study.reports[s * 2 + static_cast<std::size_t>(arm)];
            if (!r.converged) continue;
            recovered.push_back(static_cast<double>(r.recovered));
            spurious.push_back(static_cast<double>(r.spurious));
            mse.push_back(r.mse_vs_reference);
            balance.push_back(r.balance_ratio_median);
            double max_ks = 0.0;
            for (double k : r.continuous_band_ks) max_ks = std::max(max_ks, k);
            ks.push_back(max_ks);
        }
        const std::string protocol(
            protocol_name(arm == 0 ? Protocol::MarginalBalanced : Protocol::Random));
        const auto push = [&](const std::string& metric, const std::vector<double>& v) {
            if (v.empty()) return;
            const double se =
                v.size() < 2 ? 0.0 : sample_sd(v) / std::sqrt(static_cast<double>(v.size()));
            rows.push_back({protocol, cohort_n, metric, mean(v), se, v.size()});
        };
        push("recovered", recovered);
        push("spurious", spurious);
        push("mse_vs_reference", mse);
        push("balance_ratio_median", balance);
        push("max_band_ks", ks);
    }
    write_results_csv(dir / "results.csv", rows);
    return 0;
}

int cmd_simulate(const json& cfg) {
    const fs::path dir = prepare_out_dir(cfg);
    const std::string preset = cfg.at("preset").get<std::string>();
    int rc;
    if (preset == "unmeasured") {
        rc = simulate_unmeasured(cfg, dir);
    } else if (preset == "ehr-study") {
        rc = simulate_ehr(cfg, dir);
    } else {
        rc = simulate_power(cfg, dir);
    }
    write_manifest(dir, cfg);
    std::cout << "wrote " << (dir / "results.csv").string() << '\n';
    return rc;
}

int cmd_fit(const json& cfg) {
    const fs::path dir = prepare_out_dir(cfg);
    const Pool pool = load_pool(cfg);
    if (pool.outcome_kind() == OutcomeKind::None) {
        throw InvalidConfig("fit needs a pool with outcomes; set 'outcome' to binary or "
                            "survival and provide the matching CSV columns");
    }
    const double level = cfg.value("level", 0.95);
    if (!(level > 0.0 && level < 1.0)) throw InvalidValue("level must lie in (0, 1)");
    const ExperimentOptions opts = parse_experiment_options(cfg);
    const FittedModel model = fit_pool_model(pool, opts.ties);
    const Eigen::VectorXd se = standard_errors(model);
    const double z = normal_quantile(1.0 - (1.0 - level) / 2.0);

    std::vector<std::string> terms;
    if (model.kind == ModelKind::Logistic) terms.push_back("(intercept)");
    for (const auto& s : pool.specs()) terms.push_back(s.name);

    std::ofstream out(dir / "model.csv", std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / "model.csv").string());
    out << "term,beta,lower_ci,upper_ci,p_value\n";
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const Eigen::Index ii = static_cast<Eigen::Index>(i);
        out << terms[i] << ',' << format_double(model.coefficients[ii]) << ','
            << format_double(model.coefficients[ii] - z * se[ii]) << ','
            << format_double(model.coefficients[ii] + z * se[ii]) << ','
            << format_double(model.p_values[ii]) << '\n';
    }
    out.close();
    write_manifest(dir, cfg);
    std::cout << "wrote " << (dir / "model.csv").string() << " (" << terms.size()
              << " terms, loglik " << format_double(model.loglik) << ")\n";
    return 0;
}

// --- presets ----------------------------------------------------------------

json base_simulate_config(const std::string& preset) {
    json cfg = json::object();
    cfg["preset"] = preset;
    cfg["seed"] = 20260825;
    cfg["threads"] = 0;
    cfg["out"] = "selrec-out";
    const auto two_binary = [] {
        return json{{"scheme", "two-binary"}, {"cells", {0.15, 0.60, 0.15, 0.10}}};
    };
    if (preset == "binary-power") {
        cfg["generator"] = {{"pool_size", 10000},
                            {"covariates", two_binary()},
                            {"outcome",
                             {{"model", "logistic"},
                              {"w0", -1.0 / 6.0},
                              {"w", {1.0 / 3.0, 1.0 / 3.0}}}}};
        cfg["protocols"] = {"random", "marginal", "joint"};
        cfg["n_grid"] = {100, 250, 500, 750, 1000};
        cfg["replications"] = 2000;
        cfg["alpha"] = 0.05;
        cfg["fresh_pool"] = true;
    } else if (preset == "continuous-power") {
        cfg["generator"] = {{"pool_size", 10000},
                            {"covariates",
                             {{"scheme", "one-continuous"}, {"mean", 0.0}, {"sd", 0.608}}},
                            {"outcome",
                             {{"model", "logistic"}, {"w0", -0.5}, {"w", {-0.25}}}}};
        cfg["protocols"] = {"random", "continuous"};
        cfg["n_grid"] = {100, 200, 275, 350, 500, 750, 1000};
        cfg["replications"] = 2000;
        cfg["alpha"] = 0.05;
        cfg["fresh_pool"] = true;
    } else if (preset == "type1") {
        cfg["generator"] = {{"pool_size", 10000},
                            {"covariates", two_binary()},
                            {"outcome",
                             {{"model", "logistic"},
                              {"w0", -1.0 / 6.0},
                              {"w", {1.0 / 3.0, 0.0}}}}};
        cfg["protocols"] = {"random", "marginal", "joint"};
        cfg["n_grid"] = {100, 250, 500, 750, 1000};
        cfg["replications"] = 2000;
        cfg["alpha"] = 0.05;
        cfg["fresh_pool"] = true;
    } else if (preset == "unmeasured") {
        cfg["protocols"] = {"random", "joint"};
        cfg["n_grid"] = {250, 500, 1000};
        cfg["replications"] = 1000;
        cfg["fresh_pool"] = true;
    } else if (preset == "ehr-study") {
        cfg["pool"] = "";
        cfg["pool_size"] = 82080;
        cfg["n_subpools"] = 10;
        cfg["cohort_n"] = 1000;
        cfg["alpha"] = 0.05;
    } else if (preset == "custom") {
        cfg["protocols"] = {"random", "marginal"};
        cfg["n_grid"] = {100, 250, 500};
        cfg["replications"] = 200;
        cfg["alpha"] = 0.05;
        cfg["fresh_pool"] = true;
    } else {
        throw InvalidConfig("unknown preset '" + preset +
                            "'; expected binary-power, continuous-power, type1, unmeasured, "
                            "ehr-study, or custom");
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Selective-recruitment cohort sampling toolkit"};
    app.require_subcommand(1);

    struct {
        std::string config, pool, spec, protocol, out, preset, ties;
        std::uint64_t seed = 0;
        std::size_t n = 0, replications = 0;
        int threads = 0;
        double alpha = 0.0, level = 0.0;
    } f;

    const auto add_common = [&](CLI::App* sub, bool with_seed) {
        sub->add_option("--config", f.config, "JSON config or manifest from a previous run");
        sub->add_option("--pool", f.pool, "pool CSV path");
        sub->add_option("--spec", f.spec, "JSON covariate spec ({covariates:[...], outcome})");
        sub->add_option("--out", f.out, "output directory");
        sub->add_option("--threads", f.threads, "thread cap (0 = all)");
        if (with_seed) sub->add_option("--seed", f.seed, "master seed");
    };

    CLI::App* weights = app.add_subcommand("weights", "per-candidate recruitment weights");
    add_common(weights, false);
    weights->add_option("--protocol", f.protocol, "marginal | mixed | continuous");

    CLI::App* select = app.add_subcommand("select", "draw one cohort from a pool");
    add_common(select, true);
    select->add_option("--protocol", f.protocol,
                       "random | marginal | mixed | joint | continuous");
    select->add_option("--n", f.n, "cohort size");

    CLI::App* simulate = app.add_subcommand("simulate", "Monte-Carlo experiment harness");
    add_common(simulate, true);
    simulate->add_option("--preset", f.preset,
                         "binary-power | continuous-power | type1 | unmeasured | ehr-study "
                         "| custom");
    simulate->add_option("--R,--replications", f.replications, "replication count");
    simulate->add_option("--alpha", f.alpha, "significance level");

    CLI::App* fit = app.add_subcommand("fit", "fit the outcome model of a pool");
    add_common(fit, false);
    fit->add_option("--level", f.level, "confidence level (default 0.95)");
    fit->add_option("--ties", f.ties, "efron | breslow");

    CLI11_PARSE(app, argc, argv);

    try {
        CLI::App* sub = app.get_subcommands().front();
        json overrides = json::object();
        apply_spec_file(overrides, f.spec);
        if (sub->count("--pool")) overrides["pool"] = f.pool;
        if (sub->count("--out")) overrides["out"] = f.out;
        if (sub->count("--threads")) overrides["threads"] = f.threads;

        if (sub == weights) {
            if (sub->count("--protocol")) overrides["protocol"] = f.protocol;
            ConfigLayers layers{"weights",
                                {{"protocol", "marginal"},
                                 {"outcome", "none"},
                                 {"kde_grid", 4096},
                                 {"band_grid", 1024},
                                 {"out", "selrec-out"}},
                                f.config,
                                overrides};
            return cmd_weights(layers.resolve());
        }
        if (sub == select) {
            if (sub->count("--protocol")) overrides["protocol"] = f.protocol;
            if (sub->count("--n")) overrides["n"] = f.n;
            if (sub->count("--seed")) overrides["seed"] = f.seed;
            ConfigLayers layers{"select",
                                {{"protocol", "marginal"},
                                 {"outcome", "none"},
                                 {"seed", 20260825},
                                 {"kde_grid", 4096},
                                 {"band_grid", 1024},
                                 {"out", "selrec-out"}},
                                f.config,
                                overrides};
            return cmd_select(layers.resolve());
        }
        if (sub == simulate) {
            std::string preset = "custom";
            if (!f.config.empty()) {
                const json file = load_json(f.config);
                if (file.contains("preset")) preset = file["preset"].get<std::string>();
            }
            if (sub->count("--preset")) preset = f.preset;
            if (sub->count("--seed")) overrides["seed"] = f.seed;
            if (sub->count("--R")) overrides["replications"] = f.replications;
            if (sub->count("--alpha")) overrides["alpha"] = f.alpha;
            overrides["preset"] = preset;
            ConfigLayers layers{"simulate", base_simulate_config(preset), f.config, overrides};
            json cfg = layers.resolve();
            if (cfg["preset"] != "unmeasured" && cfg["preset"] != "ehr-study" &&
                !cfg.contains("generator")) {
                throw InvalidConfig("custom simulate runs need a 'generator' config block");
            }
            return cmd_simulate(cfg);
        }
        if (sub == fit) {
            if (sub->count("--level")) overrides["level"] = f.level;
            if (sub->count("--ties")) overrides["ties"] = f.ties;
            ConfigLayers layers{"fit",
                                {{"outcome", "binary"},
                                 {"level", 0.95},
                                 {"ties", "efron"},
                                 {"out", "selrec-out"}},
                                f.config,
                                overrides};
            return cmd_fit(layers.resolve());
        }
        throw InvalidConfig("unhandled subcommand");
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
