#ifndef MOPAC_RNG_HPP
#define MOPAC_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace mopac {

// splitmix64, used to derive decorrelated child seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seeded random stream. One instance per independent consumer so that
// adding draws in one component never shifts another component's stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    // Child stream keyed by a label (and optional index), e.g. derive("mpr", epoch).
    Rng derive(std::string_view label, std::uint64_t index = 0) const {
        std::uint64_t h = seed_hash_;
        for (char c : label) {
            h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
            h *= 0x100000001b3ULL;
        }
        h ^= index + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        std::uint64_t s = h;
        Rng child(splitmix64(s));
        child.seed_hash_ = h;
        return child;
    }

    static Rng from_master(std::uint64_t master_seed) {
        std::uint64_t s = master_seed;
        Rng r(splitmix64(s));
        r.seed_hash_ = master_seed;
        return r;
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Index in [0, n).
    std::size_t index(std::size_t n) {
        // Rejection-free modulo is fine at these scales; bias < 2^-40 for n < 2^24.
        return static_cast<std::size_t>(engine_() % n);
    }

    // Standard normal via Box-Muller (pair cached).
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double std) { return mean + std * normal(); }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_hash_ = 0;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

} // namespace mopac

#endif
