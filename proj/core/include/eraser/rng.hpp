#pragma once

#include <cstdint>
#include <string_view>

namespace eraser {

// Deterministic splitmix64 stream. Used instead of std distributions so that
// every sampled value is reproducible independent of the standard library.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64();

    // Uniform in [0, 1) with 53 bits of mantissa.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [0, n), unbiased.
    uint64_t below(uint64_t n);

    // Uniform integer in [lo, hi], inclusive.
    int range_inclusive(int lo, int hi);

    // Standard normal via Box-Muller (second draw cached).
    double gaussian();

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Mixes substream keys (seed, epoch, sample index) into one 64-bit seed.
uint64_t mix_seed(uint64_t a, uint64_t b);
uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c);

// FNV-1a over bytes; used for config hashes and stub-client keying.
uint64_t fnv1a64(std::string_view bytes);

}  // namespace eraser
