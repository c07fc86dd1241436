#pragma once

#include <cmath>
#include <cstdint>

namespace splidar {

// Counter-based generator built on the splitmix64 output function. A stream
// is keyed by up to four 64-bit words; draw k is a pure function of
// (key, k), so any bin can be sampled in any order on any thread.
class CounterRng {
public:
    CounterRng(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
               std::uint64_t d = 0) {
        base_ = mix(a + kGamma);
        base_ = mix(base_ ^ mix(b + 2 * kGamma));
        base_ = mix(base_ ^ mix(c + 3 * kGamma));
        base_ = mix(base_ ^ mix(d + 5 * kGamma));
    }

    std::uint64_t next_u64() { return mix(base_ + (++counter_) * kGamma); }

    /// Uniform on the open interval (0, 1).
    double next_unit() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Poisson variate with mean `lambda`. Inversion below 10, transformed
    /// rejection (PTRD, Hoermann 1993) above.
    std::uint32_t next_poisson(double lambda) {
        if (!(lambda > 0.0)) return 0;
        if (lambda < 10.0) return poisson_inversion(lambda);
        return poisson_ptrd(lambda);
    }

private:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint32_t poisson_inversion(double lambda) {
        const double limit = std::exp(-lambda);
        std::uint32_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= next_unit();
        } while (p > limit);
        return k - 1;
    }

    std::uint32_t poisson_ptrd(double lambda) {
        const double slam = std::sqrt(lambda);
        const double loglam = std::log(lambda);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double vr = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            double u;
            double v = next_unit();
            if (v <= 0.86 * vr) {
                u = v / vr - 0.43;
                return static_cast<std::uint32_t>(
                    std::floor((2.0 * a / (0.5 - std::fabs(u)) + b) * u + lambda + 0.445));
            }
            if (v >= vr) {
                u = next_unit() - 0.5;
            } else {
                u = v / vr - 0.93;
                u = (u < 0 ? -0.5 : 0.5) - u;
                v = next_unit() * vr;
            }
            const double us = 0.5 - std::fabs(u);
            if (us < 0.013 && v > us) continue;
            const double kf = std::floor((2.0 * a / us + b) * u + lambda + 0.445);
            v = v * inv_alpha / (a / (us * us) + b);
            if (kf >= 10.0) {
                const double log_sqrt_2pi = 0.91893853320467267;
                if (std::log(v * slam) <=
                    (kf + 0.5) * std::log(lambda / kf) - lambda -
                        log_sqrt_2pi + kf -
                        (1.0 / 12.0 - 1.0 / (360.0 * kf * kf)) / kf)
                    return static_cast<std::uint32_t>(kf);
            } else if (kf >= 0.0) {
                if (std::log(v) <= kf * loglam - lambda - std::lgamma(kf + 1.0))
                    return static_cast<std::uint32_t>(kf);
            }
        }
    }

    std::uint64_t base_;
    std::uint64_t counter_ = 0;
};

}  // namespace splidar
