#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

namespace hfsig {

// Deterministic stream RNG: xoshiro256++ seeded through splitmix64 from a
// (seed, stream_id) pair.  Distinct stream ids give statistically
// independent sequences, and every draw is reproducible bit for bit across
// platforms because the uniform and normal transforms below avoid the
// implementation-defined std:: distributions.
class SeededRng {
public:
    SeededRng(uint64_t seed, uint64_t stream_id)
        : seed_(seed), stream_(stream_id) {
        uint64_t x = seed ^ 0x9e3779b97f4a7c15ull;
        s_[0] = splitmix(x);
        x ^= stream_id + 0xbf58476d1ce4e5b9ull;
        s_[1] = splitmix(x);
        s_[2] = splitmix(x);
        s_[3] = splitmix(x);
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[3] = 1;
        for (int i = 0; i < 8; ++i) next_u64();
    }

    uint64_t seed() const { return seed_; }
    uint64_t stream() const { return stream_; }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // Log-uniform on [lo, hi]; both bounds must be positive.
    double log_uniform(double lo, double hi) {
        return std::exp(uniform(std::log(lo), std::log(hi)));
    }

    // Integer in [0, n) via 128-bit multiply (bias < 2^-64, n must be > 0).
    uint64_t below(uint64_t n) {
        return static_cast<uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Standard normal via Box-Muller; consumes exactly two raw draws.
    double normal() {
        double u1 = uniform01();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    // Circular complex Gaussian with E[|z|^2] = 1.
    std::complex<double> cnormal() {
        double u1 = uniform01();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double u2 = uniform01();
        const double r = std::sqrt(-std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(a), r * std::sin(a)};
    }

private:
    static uint64_t splitmix(uint64_t& x) {
        x += 0x9e3779b97f4a7c15ull;
        uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    static uint64_t rotl(uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }

    uint64_t s_[4];
    uint64_t seed_;
    uint64_t stream_;
};

}  // namespace hfsig
