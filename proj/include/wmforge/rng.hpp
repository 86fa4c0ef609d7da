#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace wmforge {

// Counter-based generator built on the splitmix64 finalizer. Streams are
// keyed by a list of words (run seed, image id, draw site, ...) so any
// sample can be regenerated in isolation, independent of scheduling.
// All draws reduce to integer arithmetic plus libm calls on the same
// platform, which keeps reruns byte-identical.
class Rng {
public:
    explicit Rng(std::initializer_list<std::uint64_t> words) {
        state_ = 0x9e3779b97f4a7c15ull;
        for (std::uint64_t w : words) state_ = mix(state_ ^ (w + 0x9e3779b97f4a7c15ull));
    }
    explicit Rng(std::uint64_t seed) : Rng({seed}) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix(state_);
    }

    // [0, 1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive on both ends
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        return lo + std::int64_t(next_u64() % std::uint64_t(hi - lo + 1));
    }

    bool bernoulli(double p) { return uniform() < p; }

    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = 0.0;
        while (u1 == 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        cached_ = r * std::sin(2.0 * M_PI * u2);
        have_cached_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

    // normal truncated to [lo, hi] by rejection, for parameter init
    double trunc_normal(double stddev, double lo, double hi) {
        for (;;) {
            double v = stddev * normal();
            if (v >= lo && v <= hi) return v;
        }
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ull;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_ = 0;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

} // namespace wmforge
