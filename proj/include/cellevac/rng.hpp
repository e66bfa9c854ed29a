#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cellevac {

// Deterministic PRNG wrapper. All uniform draws go through explicit bit
// manipulation so sequences are identical across standard libraries;
// only the mt19937_64 core (which is fully specified) is reused.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
    uint64_t below(uint64_t n);

    int poisson(double lambda);

private:
    std::mt19937_64 eng_;
};

uint64_t splitmix64(uint64_t x);

// Derive an independent stream seed from a run seed and a purpose tag.
uint64_t derive_seed(uint64_t seed, std::string_view tag);

inline Rng derive_stream(uint64_t seed, std::string_view tag) {
    return Rng(derive_seed(seed, tag));
}

} // namespace cellevac
