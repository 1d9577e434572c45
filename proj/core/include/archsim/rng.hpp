#pragma once

#include <cstdint>

namespace archsim {

/// splitmix64 finalizer (Steele, Lea, Flood). Used only to derive stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// PCG32 (XSH-RR, 64-bit state, 32-bit output) with the reference multiplier and
/// the pcg32_srandom_r seeding procedure, so Pcg32(42, 54) reproduces pcg32-demo.
class Pcg32 {
public:
    static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;

    Pcg32() : Pcg32(0x853C49E6748FEA9BULL, 0xDA3E39CB94B95BDBULL) {}
    Pcg32(std::uint64_t init_state, std::uint64_t init_seq) {
        inc_ = (init_seq << 1U) | 1U;
        state_ = 0;
        next();
        state_ += init_state;
        next();
    }

    /// Stream `index` of a run seeded with `master`. Distinct indices give
    /// independent streams; the derivation does not depend on how many streams exist.
    static Pcg32 derive(std::uint64_t master, std::uint64_t index) {
        const std::uint64_t base = master ^ (0xD1B54A32D192ED03ULL * (index + 1));
        return Pcg32(splitmix64(base), splitmix64(base + 1));
    }

    std::uint32_t next() {
        const std::uint64_t old = state_;
        state_ = old * kMultiplier + inc_;
        const auto xorshifted = static_cast<std::uint32_t>(((old >> 18U) ^ old) >> 27U);
        const auto rot = static_cast<std::uint32_t>(old >> 59U);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31U));
    }

    /// Uniform in [0, bound) by rejection; bound must be > 0.
    std::uint32_t bounded(std::uint32_t bound) {
        const std::uint32_t threshold = (-bound) % bound;
        for (;;) {
            const std::uint32_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

    /// Uniform in (0, 1].
    double unit_open_closed() { return (static_cast<double>(next()) + 1.0) / 4294967296.0; }

    friend bool operator==(const Pcg32&, const Pcg32&) = default;

private:
    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 0;
};

}  // namespace archsim
