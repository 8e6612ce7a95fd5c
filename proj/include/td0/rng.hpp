#pragma once

#include <cstdint>
#include <random>

namespace td0 {

/// splitmix64 step: advances the state and returns a fully avalanched word.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Seed for one trial substream: avalanche of (base, index). Nearby indices
/// land in unrelated parts of the generator's state space.
inline std::uint64_t derive_stream_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t s = base;
    std::uint64_t a = splitmix64(s);
    s ^= index * 0x9e3779b97f4a7c15ull;
    std::uint64_t b = splitmix64(s);
    return a ^ (b + 0x632be59bd9b4e019ull);
}

/// Deterministic generator wrapper. Uniform doubles are produced from raw
/// 64-bit output directly (std::uniform_real_distribution is not pinned
/// across standard library implementations).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform on [0, 1), 53-bit resolution.
    double next_uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    /// Fair +-1.
    double next_sign() { return (eng_() >> 63) ? 1.0 : -1.0; }

  private:
    std::mt19937_64 eng_;
};

} // namespace td0
