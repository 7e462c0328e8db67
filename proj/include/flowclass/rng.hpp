#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace flowclass {

// Deterministic random source. All transforms are written out here instead of
// using std::*_distribution, whose output is implementation-defined; the same
// seed therefore replays the same sequence on any platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // [0, 1)
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    double normal(double mean, double stddev) {
        // Box-Muller; one value per call keeps the draw count predictable
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log1p(-u1));
        return mean + stddev * r * std::cos(2.0 * M_PI * u2);
    }

    // mean 1/rate
    double exponential(double rate) {
        return -std::log1p(-uniform01()) / rate;
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // [0, n); n must be > 0
    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(next_u64() % n);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

} // namespace flowclass
