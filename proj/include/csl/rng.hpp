#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace csl {

/// SplitMix64 (Steele, Lea & Flood). The update is plain 64-bit integer
/// algebra, so a given seed produces the same stream on every platform and
/// standard library. All randomized behavior in this library goes through
/// this generator.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). Lemire reduction; bias is O(2^-64).
    uint64_t next_below(uint64_t n) {
        return static_cast<uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Standard normal via Box-Muller (cosine branch). Consumes exactly two
    /// 64-bit draws per call, keeping stream positions easy to reason about.
    double next_normal() {
        double u1 = 1.0 - next_double();  // (0, 1], keeps log finite
        double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    uint64_t state_;
};

}  // namespace csl
