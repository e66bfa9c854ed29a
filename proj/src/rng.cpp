#include "cellevac/rng.hpp"

#include <cmath>

namespace cellevac {

uint64_t Rng::below(uint64_t n) {
    if (n <= 1) return 0;
    uint64_t threshold = (~uint64_t{0} - n + 1) % n;
    for (;;) {
        uint64_t r = eng_();
        if (r >= threshold) return r % n;
    }
}

int Rng::poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    // Knuth's product method, chunked so exp() never underflows.
    int count = 0;
    while (lambda > 30.0) {
        double l = std::exp(-30.0);
        double p = 1.0;
        int k = 0;
        do {
            ++k;
            p *= uniform();
        } while (p > l);
        count += k - 1;
        lambda -= 30.0;
    }
    double l = std::exp(-lambda);
    double p = 1.0;
    int k = 0;
    do {
        ++k;
        p *= uniform();
    } while (p > l);
    return count + k - 1;
}

uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

uint64_t derive_seed(uint64_t seed, std::string_view tag) {
    uint64_t h = 0xCBF29CE484222325ull; // FNV-1a
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return splitmix64(seed ^ h);
}

} // namespace cellevac
