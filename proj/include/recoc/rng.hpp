#pragma once

#include <cmath>
#include <cstdint>

namespace recoc::rng {

// All randomness is counter based. A stream with key s produces
// mix64(s + (k+1)*kGamma) as its k-th word, and substream keys are derived
// with fold(). No stream shares state with another, so the order in which
// values are drawn can never change what any individual draw produces.

inline constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

// Derives a child key from (key, data). The +1 keeps fold(k, 0) distinct
// from the stream seeded directly at k.
inline std::uint64_t fold(std::uint64_t key, std::uint64_t data) {
    return mix64(key + kGamma * (data + 1));
}

class Stream {
public:
    explicit Stream(std::uint64_t key) : key_(key) {}

    std::uint64_t next() { return mix64(key_ + (++counter_) * kGamma); }

    // Uniform in [0, 1), 53-bit resolution.
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]; safe as a log() argument.
    double unit_pos() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

    // +1 or -1 with equal probability.
    int sign() { return (next() >> 63) ? -1 : +1; }

    bool bernoulli(double p) { return unit() < p; }

    // Standard normal via Box-Muller; caches the second deviate.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double radius = std::sqrt(-2.0 * std::log(unit_pos()));
        const double angle = 6.283185307179586476925286766559 * unit();
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace recoc::rng
