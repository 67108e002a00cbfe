#pragma once

#include <cmath>
#include <cstdint>

namespace p3p {

/// Derive an independent stream state for (seed, index): golden-ratio
/// increment followed by the splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// splitmix64: tiny, portable, seedable 64-bit generator. Uniform doubles are
/// built from the top 53 bits, so streams are byte-identical on any IEEE-754
/// platform regardless of the standard library.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t state) : state_(state) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform01() { return double(next() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi). The fma keeps the mapping a fixed sequence of
    /// correctly-rounded operations, immune to compiler contraction choices.
    double uniform(double lo, double hi) { return std::fma(hi - lo, uniform01(), lo); }

private:
    std::uint64_t state_;
};

}  // namespace p3p
