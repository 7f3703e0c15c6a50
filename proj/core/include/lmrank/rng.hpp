#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace lmrank {

// Seeded generator used everywhere randomness is needed. Only the mt19937_64
// engine (bit-exact by the standard) and IEEE +,-,*,/,sqrt are used, so the
// same seed produces identical output on every conforming platform. The
// normal deviate is the 12-uniform sum approximation for the same reason:
// no libm calls whose rounding varies between implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next() { return eng_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Approximately N(0,1); bounded to [-6, 6].
    double gaussian() {
        double s = 0.0;
        for (int i = 0; i < 12; ++i) s += uniform01();
        return s - 6.0;
    }

    // Uniform integer in [0, n); unbiased via rejection.
    std::uint64_t bounded(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        while (true) {
            std::uint64_t x = eng_();
            if (x >= threshold) return x % n;
        }
    }

    std::vector<double> gaussian_vec(std::size_t dim) {
        std::vector<double> v(dim);
        for (auto& x : v) x = gaussian();
        return v;
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace lmrank
