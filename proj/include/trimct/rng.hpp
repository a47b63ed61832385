#pragma once

#include <cmath>
#include <cstdint>

namespace trimct {

// SplitMix64 generator. Small, fast, and bit-identical on every platform,
// which the stdlib distributions are not. Every stochastic component of the
// library draws from this so that seed + config fully determine outputs.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    float uniform_f(float lo, float hi) { return static_cast<float>(uniform(lo, hi)); }

    // Uniform integer in [0, n). Rejection-free modulo bias is negligible for
    // the ranges used here (n << 2^64) but use Lemire-style scaling anyway.
    uint64_t uniform_int(uint64_t n) {
        // 128-bit multiply keeps the mapping unbiased enough and portable.
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        return static_cast<uint64_t>(m >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller; caches the paired variate.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925287 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    float normal_f() { return static_cast<float>(normal()); }

    // Derives an independent child stream. Used to split a master seed into
    // per-stage / per-tree / per-sample streams without sequence coupling.
    Rng fork(uint64_t tag) const {
        uint64_t z = state_ ^ (0x9e3779b97f4a7c15ull + tag * 0xd1342543de82ef95ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return Rng(z ^ (z >> 31));
    }

    static uint64_t derive_seed(uint64_t master, uint64_t tag) {
        return Rng(master).fork(tag).state_;
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace trimct
