#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace peakdec {

// splitmix64 finalizer, used to derive substream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Deterministic 64-bit generator. The raw stream is std::mt19937_64, whose
// output sequence is fully pinned by the standard; all derived draws
// (bounded integers, unit doubles, normals) use the explicit transforms
// below rather than std:: distributions, which are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Unbiased integer in [0, bound) by rejection.
    std::uint64_t next_below(std::uint64_t bound) {
        // 2^64 mod bound; draws below this threshold are rejected so the
        // accepted range is an exact multiple of bound.
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t x = next_u64();
            if (x >= threshold) return x % bound;
        }
    }

    // Double in [0,1) with 53 random mantissa bits.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller. Consumes exactly two draws; the sine
    // branch is discarded so the mapping from raw stream to output is fixed.
    double next_normal() {
        const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; // (0,1]
        const double u2 = next_unit();                                               // [0,1)
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    std::mt19937_64 engine_;
};

// Substream derivation: seed = mix64(mix64(master ^ golden*(tag+1)) + index).
// Streams for distinct (tag, index) pairs are independent for all practical
// purposes and do not depend on how work is scheduled across threads.
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index) {
    return mix64(mix64(master ^ (0x9E3779B97F4A7C15ULL * (tag + 1))) + index);
}

inline Rng substream(std::uint64_t master, std::uint64_t tag, std::uint64_t index) {
    return Rng(substream_seed(master, tag, index));
}

} // namespace peakdec
