#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace raildelay {

// Deterministic random source. The engine is std::mt19937_64 (a fixed,
// standardized algorithm) and every distribution below is derived from its
// raw output by explicit arithmetic, never through std::*_distribution,
// whose streams differ between standard libraries. A given seed therefore
// produces the same draw sequence everywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

    std::uint64_t raw() { return gen_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller, trigonometric form; two uniforms per draw.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    // Exponential with the given rate, by inversion.
    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    // Uniform integer on [0, n), unbiased by rejection.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Independent stream keyed off the original seed, not the current
    // state, so substreams do not depend on draw order.
    Rng substream(std::uint64_t tag) const { return Rng(splitmix(seed_ ^ splitmix(tag))); }

    Rng substream(std::string_view name, std::uint64_t index = 0) const {
        std::uint64_t h = 1469598103934665603ull; // FNV-1a
        for (char c : name) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        return substream(h + 0x9e3779b97f4a7c15ull * index);
    }

    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
};

} // namespace raildelay
