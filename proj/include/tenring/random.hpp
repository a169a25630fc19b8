// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace tenring {

/// SplitMix64 (Steele/Lea/Vigna): state advances by the golden-ratio gamma
/// and the output is a murmur-style finalizer of the new state. Chosen as
/// the project-wide generator because the algorithm is tiny, documented and
/// trivially reimplementable, so seeded runs are reproducible anywhere.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in (0, 1]: top 53 bits of the next output shifted into the
    /// unit interval, plus one ulp so log() never sees zero.
    double next_unit() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Integer in [0, n) by 128-bit multiply-shift (bias < 2^-64).
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n)) >> 64);
    }

private:
    std::uint64_t state_;
};

/// Standard normal draws via the trigonometric Box-Muller transform on
/// SplitMix64 uniforms: each pair (u1, u2) yields
///   z0 = sqrt(-2 ln u1) cos(2 pi u2),  z1 = sqrt(-2 ln u1) sin(2 pi u2),
/// consumed in order with z1 cached. Exactly two uniforms per pair, so the
/// stream position is a pure function of the number of draws.
class GaussianSampler {
public:
    explicit GaussianSampler(std::uint64_t seed) : rng_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = rng_.next_unit();
        const double u2 = rng_.next_unit();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    /// Underlying integer stream, for callers that also need indices.
    SplitMix64& engine() { return rng_; }

private:
    SplitMix64 rng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace tenring
