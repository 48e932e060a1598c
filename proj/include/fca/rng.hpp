// rng.hpp — seeded random source with portable draw functions.
//
// The engine is std::mt19937_64 (bit-exact by the standard); the draw
// functions below avoid std:: distributions, whose output is
// implementation-defined, so identical seeds give identical streams on any
// platform. All randomness in the pipeline flows from one root seed through
// child() streams.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace fca {

inline uint64_t splitmix64(uint64_t x) {
    x += UINT64_C(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)) * UINT64_C(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)) * UINT64_C(0x94D049BB133111EB);
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

    uint64_t seed() const { return seed_; }

    // Independent stream derived from this generator's seed, not its state.
    Rng child(uint64_t stream) const {
        return Rng(splitmix64(seed_ ^ splitmix64(stream + 1)));
    }

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be positive.
    int uniform_int(int n) {
        return static_cast<int>(uniform() * static_cast<double>(n));
    }

    // Box-Muller; one draw per call, the pair's second half is discarded to
    // keep the stream position independent of call parity.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(static_cast<int>(i)));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace fca
