#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace qnest {

// splitmix64 finalizer, used for key derivation only.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Splittable random stream. child() derives a new stream from the key path
// alone, never from consumption state, so a derived stream is independent of
// how much randomness its parent or siblings have drawn. This is what makes
// per-(method, level, repetition) results scheduling-independent.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed)
        : key_(mix64(seed ^ 0x6a09e667f3bcc908ull)), eng_(key_) {}

    RngStream child(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
        std::uint64_t k = key_;
        k = mix64(k ^ mix64(a + 0x243f6a8885a308d3ull));
        k = mix64(k ^ mix64(b + 0x13198a2e03707344ull));
        k = mix64(k ^ mix64(c + 0xa4093822299f31d0ull));
        return RngStream(FromKey{}, k);
    }

    // Uniform double in [0, 1), 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller. The transform yields two values per
    // pair of uniforms; the spare is cached in the stream, so consumption
    // stays a pure function of the stream itself.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double angle = 6.283185307179586476925287 * u2;
        spare_ = r * std::sin(angle);
        has_spare_ = true;
        return r * std::cos(angle);
    }

    // Uniform integer in [0, n), rejection sampled to avoid modulo bias.
    std::uint64_t uniform_int(std::uint64_t n) {
        const std::uint64_t maxv = std::numeric_limits<std::uint64_t>::max();
        const std::uint64_t limit = maxv - maxv % n;
        std::uint64_t v = eng_();
        while (v >= limit) v = eng_();
        return v % n;
    }

    std::uint64_t next_u64() { return eng_(); }

private:
    struct FromKey {};
    RngStream(FromKey, std::uint64_t k) : key_(k), eng_(k) {}

    std::uint64_t key_;
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace qnest
