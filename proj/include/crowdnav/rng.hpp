#pragma once

#include <cmath>
#include <cstdint>

namespace crowdnav {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& s) {
    s += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

/// Deterministic PRNG with hand-rolled distributions. std:: distributions are
/// implementation-defined, which would break the bit-exact reproducibility
/// contract, so everything is derived from the raw 64-bit stream here.
/// Copyable value type; a copy replays the same stream.
class Rng {
public:
    Rng() : state_(0x853c49e6748fea9bULL) {}
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // warm up so that small seeds diverge immediately
        next();
        next();
    }

    /// Derives an independent stream for (seed, stream_index), e.g. per-env RNGs.
    static Rng derive(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t s = seed;
        std::uint64_t a = detail::splitmix64(s);
        s = a ^ (stream * 0x9e3779b97f4a7c15ULL + 0x7f4a7c15ULL);
        return Rng(detail::splitmix64(s));
    }

    std::uint64_t next() { return detail::splitmix64(state_); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_int(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    /// Standard normal via Box-Muller (no cached spare, so the stream position
    /// is a pure function of call count).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Both Box-Muller outputs at once (for bulk noise generation).
    void normal_pair(double& a, double& b) {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u1));
        double t = 2.0 * M_PI * u2;
        a = r * std::cos(t);
        b = r * std::sin(t);
    }

    bool bernoulli(double p) { return uniform() < p; }

    std::uint64_t state() const { return state_; }
    bool operator==(const Rng& o) const { return state_ == o.state_; }

private:
    std::uint64_t state_;
};

/// Order-independent 64-bit mix of a few counters, used to seed per-step
/// reparameterization noise so rollout and PPO recompute draw identical eps.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
    std::uint64_t s = a;
    std::uint64_t h = detail::splitmix64(s);
    s = h ^ (b + 0x9e3779b97f4a7c15ULL);
    h = detail::splitmix64(s);
    s = h ^ (c + 0xbf58476d1ce4e5b9ULL);
    return detail::splitmix64(s);
}

}  // namespace crowdnav
