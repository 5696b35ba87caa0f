#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace selrec {

// splitmix64 finalizer; used to turn (master seed, stream id) pairs into
// well-separated engine seeds so parallel replications never share a stream.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return mix_seed(master ^ mix_seed(stream));
}

// Deterministic random source. All distribution transforms are written out
// explicitly (instead of using std::*_distribution) so that a given seed
// yields the same stream on every standard library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Unbiased integer on [0, bound) by rejection.
    std::uint64_t uniform_below(std::uint64_t bound) {
        const std::uint64_t spill = (UINT64_MAX % bound + 1) % bound;
        const std::uint64_t limit = UINT64_MAX - spill;
        std::uint64_t x = engine_();
        while (spill != 0 && x > limit) x = engine_();
        return x % bound;
    }

    // Standard normal via Box-Muller; caches the second deviate.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    double exponential(double rate) {
        double u = uniform();
        return -std::log1p(-u) / rate;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace selrec
