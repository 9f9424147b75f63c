#pragma once

#include <cstdint>
#include <random>

namespace plotbot {

// Seeded PRNG used for all weight init and data sampling. mt19937 output is
// fully specified by the standard and the uniform mapping below avoids the
// implementation-defined std distributions, so runs reproduce byte-for-byte
// across platforms.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(static_cast<uint32_t>(seed)) {}

    // uniform in [0, 1) with 24 bits of mantissa
    double uniform() {
        return static_cast<double>(gen_() >> 8) * (1.0 / 16777216.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    uint32_t below(uint32_t n) { return n ? gen_() % n : 0; }

private:
    std::mt19937 gen_;
};

}  // namespace plotbot
