#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace ecal {

/// Deterministic PRNG used everywhere in the project. All sampling routines
/// are implemented here (not via <random> distributions) so that a given seed
/// produces the same stream on every platform and standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    /// splitmix64 step.
    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        // Lemire's multiply-shift with rejection.
        std::uint64_t x = next();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            std::uint64_t threshold = (0ULL - n) % n;
            while (lo < threshold) {
                x = next();
                m = static_cast<__uint128_t>(x) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via Box-Muller (one value per call, no cached spare).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Uniform random permutation of {0, ..., n-1}.
    std::vector<std::uint32_t> permutation(std::size_t n) {
        std::vector<std::uint32_t> p(n);
        std::iota(p.begin(), p.end(), 0u);
        shuffle(p);
        return p;
    }

private:
    std::uint64_t state_;
};

/// Mixes a base seed with stream labels so that independent random uses
/// (init, shuffling, pairing, per-graph generation, ...) draw from
/// independent streams. Call-order changes in one stream never perturb
/// another.
inline std::uint64_t seed_stream(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    Rng r(seed ^ 0x6a09e667f3bcc909ULL);
    std::uint64_t s = r.next() ^ a;
    Rng r2(s);
    s = r2.next() ^ b;
    Rng r3(s);
    return r3.next() ^ c;
}

namespace streams {
constexpr std::uint64_t kInit = 1;
constexpr std::uint64_t kShuffle = 2;
constexpr std::uint64_t kPairing = 3;
constexpr std::uint64_t kSynth = 4;
constexpr std::uint64_t kImbalance = 5;
constexpr std::uint64_t kNoise = 6;
constexpr std::uint64_t kGradCheck = 7;
}  // namespace streams

}  // namespace ecal
