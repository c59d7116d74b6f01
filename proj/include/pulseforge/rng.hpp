#pragma once

#include <cmath>
#include <cstdint>

namespace pulseforge {

namespace detail {
// SplitMix64 finalizer; full-avalanche 64-bit mix.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

// Counter-based generator: every draw is a pure function of (key, counter),
// so sub-streams split off a parent without sharing mutable state. All
// randomness in the toolkit flows from one base seed through named splits.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : key_(detail::mix64(seed)) {}

    // Independent stream derived from this one; deterministic in the salts.
    Rng split(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
        Rng r(0);
        r.key_ = detail::mix64(detail::mix64(detail::mix64(key_ ^ detail::mix64(a)) ^
                                             detail::mix64(b)) ^
                               detail::mix64(c));
        return r;
    }

    std::uint64_t next_u64() { return detail::mix64(key_ + (++counter_) * kStride); }

    // Uniform in [0, 1), 53-bit mantissa.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n); Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t n) {
        auto x = next_u64();
        auto m = static_cast<unsigned __int128>(x) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t t = (0 - n) % n;
            while (low < t) {
                x = next_u64();
                m = static_cast<unsigned __int128>(x) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Standard normal via Box-Muller; the paired value is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Exact Bernoulli-sum binomial draw. n up to ~1e7 stays cheap and the
    // result is reproducible across platforms, unlike std::binomial_distribution.
    long binomial(long n, double p) {
        if (p <= 0.0) return 0;
        if (p >= 1.0) return n;
        long zeros = 0;
        for (long i = 0; i < n; ++i)
            if (uniform() < p) ++zeros;
        return zeros;
    }

private:
    static constexpr std::uint64_t kStride = 0x9e3779b97f4a7c15ULL;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace pulseforge
