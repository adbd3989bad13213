#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace battdiag {

// splitmix64: cheap, well-mixed stream derivation. Used to spawn independent
// substreams from (seed, tag) pairs so parallel workers never share state and
// results do not depend on scheduling order.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t s = seed ^ (tag * 0x9e3779b97f4a7c15ull);
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    return a ^ (b + 0x632be59bd9b4e019ull);
}

// Deterministic RNG wrapper. All distribution sampling is hand-rolled on top
// of mt19937_64 so that streams are pinned by this code alone, not by the
// standard library's unspecified distribution algorithms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), eng_(seed) {}

    // Independent child stream keyed by tag.
    Rng derive(std::uint64_t tag) const { return Rng(mix_seed(seed_, tag)); }

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform01() {
        return static_cast<double>(eng_() >> 11) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // Uniform integer in [0, n), rejection sampled to avoid modulo bias.
    std::uint64_t uniform_int(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal via polar Box-Muller; the spare draw is discarded to
    // keep the stream state a pure function of call count.
    double normal() {
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        return u * std::sqrt(-2.0 * std::log(s) / s);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Standard normal truncated to [lo, hi] by rejection.
    double truncated_normal(double lo, double hi) {
        for (;;) {
            double z = normal();
            if (z >= lo && z <= hi) return z;
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 eng_;
};

}  // namespace battdiag
