#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace tembed {

/// Seedable generator with a portable output sequence.
///
/// The engine is std::mt19937_64, whose sequence is fixed by the C++
/// standard. The standard distributions are implementation-defined, so all
/// derived draws (bounded integers, uniform reals, normals, shuffles) are
/// implemented here:
///
///   - seeding: engine seed = splitmix64(seed ^ (stream * 0x9E3779B97F4A7C15))
///   - index(n): rejection sampling on the top of the 64-bit range
///   - uniform(): top 53 bits scaled by 2^-53, in [0, 1)
///   - normal(): Box-Muller, one value per call (no caching)
///   - shuffle(): Fisher-Yates from the back, j = index(i + 1)
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : engine_(splitmix64(seed ^ (stream * 0x9E3779B97F4A7C15ULL))) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, n). n must be positive.
    std::size_t index(std::size_t n) {
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        // [2^64 mod n, 2^64) holds a whole number of copies of [0, n).
        const std::uint64_t threshold = (0 - bound) % bound;
        std::uint64_t x = engine_();
        while (x < threshold) x = engine_();
        return static_cast<std::size_t>(x % bound);
    }

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    template <class T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = index(i);
            std::swap(items[i - 1], items[j]);
        }
    }

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

private:
    std::mt19937_64 engine_;
};

} // namespace tembed
