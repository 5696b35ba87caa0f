// Timing comparison of the parallel kernels against their serial references:
// batch kernel-density evaluation and the Monte-Carlo replication harness.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "selrec/density.hpp"
#include "selrec/parallel.hpp"
#include "selrec/rng.hpp"
#include "selrec/simulate.hpp"

using namespace selrec;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void report(const char* name, double serial, double parallel, int threads) {
    std::printf("%-28s %10.3fs %10.3fs  x%.2f  (%d threads)\n", name, serial, parallel,
                serial / parallel, threads);
}

void bench_kde(int threads) {
    Rng rng(7);
    std::vector<double> sample(20000);
    for (double& v : sample) v = rng.normal(0.0, 0.608);
    std::vector<double> eval(200000);
    for (double& v : eval) v = rng.normal(0.0, 0.8);
    const DensityEstimate kde = kde_fit(sample);

    std::vector<double> serial(eval.size()), parallel(eval.size());
    auto t0 = std::chrono::steady_clock::now();
    kde.pdf_many_serial(eval, serial);
    const double t_serial = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    kde.pdf_many(eval, parallel, threads);
    const double t_parallel = seconds_since(t0);

    double max_diff = 0.0;
    for (std::size_t i = 0; i < eval.size(); ++i) {
        max_diff = std::max(max_diff, std::fabs(serial[i] - parallel[i]));
    }
    report("kde batch pdf", t_serial, t_parallel, threads);
    std::printf("%-28s max |serial - parallel| = %.3g\n", "", max_diff);

    t0 = std::chrono::steady_clock::now();
    const DensityTable table(kde);
    double acc = 0.0;
    for (double v : eval) acc += table.pdf(v);
    const double t_table = seconds_since(t0);
    std::printf("%-28s %10.3fs (build + evaluate, checksum %.6f)\n", "kde binned table",
                t_table, acc / static_cast<double>(eval.size()));
}

void bench_harness(int threads) {
    GeneratorConfig config;
    config.pool_size = 4000;
    config.covariates = TwoBinaryScheme{};
    config.outcome = LogisticOutcome{-1.0 / 6.0, {1.0 / 3.0, 1.0 / 3.0}};
    const std::vector<Protocol> protocols{Protocol::Random, Protocol::MarginalBalanced};
    const std::vector<std::size_t> n_grid{200, 400};
    constexpr std::size_t kReps = 200;

    ExperimentOptions serial_opts;
    serial_opts.threads = 1;
    auto t0 = std::chrono::steady_clock::now();
    const ExperimentResult serial =
        run_power_experiment(config, protocols, n_grid, kReps, 0.05, 99, serial_opts);
    const double t_serial = seconds_since(t0);

    ExperimentOptions parallel_opts;
    parallel_opts.threads = threads;
    t0 = std::chrono::steady_clock::now();
    const ExperimentResult parallel =
        run_power_experiment(config, protocols, n_grid, kReps, 0.05, 99, parallel_opts);
    const double t_parallel = seconds_since(t0);

    bool identical = true;
    for (std::size_t c = 0; c < serial.cells.size(); ++c) {
        identical = identical && serial.cells[c].power_all == parallel.cells[c].power_all &&
                    serial.cells[c].mse == parallel.cells[c].mse;
    }
    report("replication harness", t_serial, t_parallel, threads);
    std::printf("%-28s results %s across thread counts\n", "",
                identical ? "identical" : "DIFFER");
}

}  // namespace

int main(int argc, char** argv) {
    const int threads =
        argc > 1 ? std::max(1, std::atoi(argv[1])) : resolve_threads(0);
    std::printf("%-28s %11s %11s\n", "kernel", "serial", "parallel");
    bench_kde(threads);
    bench_harness(threads);
    return 0;
}
