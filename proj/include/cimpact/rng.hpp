#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace cimpact {

/// One splitmix64 step. Used to fan a single user-facing seed out into
/// independent streams (per tree, per fold, per grid cell, ...).
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic random stream. The engine is std::mt19937_64, whose output
/// sequence is fixed by the standard; the distributions are hand rolled
/// because the standard library ones are implementation defined and would
/// break byte-identical outputs across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Stream keyed by (seed, tags...). Identical tags give identical
    /// streams; any change to a tag decorrelates the whole stream.
    static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
        std::uint64_t s = seed;
        std::uint64_t mixed = splitmix64(s);
        for (std::uint64_t t : tags) {
            s ^= t + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
            mixed = splitmix64(s);
        }
        return Rng(mixed);
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). Unbiased via rejection.
    std::uint64_t uniform_below(std::uint64_t n) {
        assert(n > 0);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = next_u64();
        while (x >= limit)
            x = next_u64();
        return x % n;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Poisson sample by Knuth's product-of-uniforms method. Large means are
    /// split into chunks so exp(-lambda) stays well away from underflow.
    std::int64_t poisson(double lambda) {
        assert(lambda >= 0.0);
        std::int64_t total = 0;
        while (lambda > 0.0) {
            const double chunk = lambda > 500.0 ? 500.0 : lambda;
            const double limit = std::exp(-chunk);
            double prod = 1.0;
            std::int64_t k = -1;
            do {
                ++k;
                prod *= uniform01();
            } while (prod > limit);
            total += k;
            lambda -= chunk;
        }
        return total;
    }

    /// Fisher-Yates shuffle.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[uniform_below(i)]);
    }

private:
    std::mt19937_64 engine_;
};

/// FNV-1a over a byte string; used for config hashes embedded in outputs.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace cimpact
