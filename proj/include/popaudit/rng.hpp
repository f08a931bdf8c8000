#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

// Draw helpers with fully specified output sequences. std::mt19937_64 raw
// output is pinned by the standard, but the std distributions are not, so
// every transformation here is spelled out to keep seeded runs identical
// across compilers and standard libraries.
namespace popaudit::rng {

using Engine = std::mt19937_64;

// Uniform in [0, 1) with 53 bits of precision.
inline double uniform01(Engine& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline double uniform(Engine& gen, double lo, double hi) {
    return lo + (hi - lo) * uniform01(gen);
}

// Unbiased integer in [0, n) via rejection sampling.
inline std::uint64_t below(Engine& gen, std::uint64_t n) {
    if (n == 0) {
        throw std::invalid_argument("bounded draw from empty range");
    }
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    for (;;) {
        std::uint64_t x = gen();
        if (x < limit) {
            return x % n;
        }
    }
}

// Knuth's product-of-uniforms Poisson sampler; exact for the moderate means
// used here (exp(-mean) must stay above the double underflow threshold).
inline int poisson(Engine& gen, double mean) {
    if (!(mean >= 0.0) || mean > 700.0) {
        throw std::invalid_argument("poisson mean out of supported range");
    }
    const double threshold = std::exp(-mean);
    int count = 0;
    double product = uniform01(gen);
    while (product > threshold) {
        ++count;
        product *= uniform01(gen);
    }
    return count;
}

// Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& values, Engine& gen) {
    for (std::size_t i = values.size(); i > 1; --i) {
        std::swap(values[i - 1], values[below(gen, i)]);
    }
}

} // namespace popaudit::rng
