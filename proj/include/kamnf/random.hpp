#pragma once

#include <cstdint>
#include <random>

namespace kamnf {

// Seeded generator with a fixed conversion to doubles, so streams are identical across platforms.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next() { return engine_(); }
    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Seed for an independent sub-stream.
    uint64_t split() { return engine_() ^ 0x9e3779b97f4a7c15ull; }

private:
    std::mt19937_64 engine_;
};

} // namespace kamnf
