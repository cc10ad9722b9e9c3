#pragma once

#include <array>
#include <cstdint>

namespace rgdet {

/// splitmix64 step; used to expand a 64-bit seed into xoshiro state.
std::uint64_t splitmix64(std::uint64_t& state);

/// xoshiro256** 1.0 (Blackman & Vigna). State words are the first four
/// splitmix64 outputs starting from the seed. Self-contained so scenes and
/// weights reproduce bit-exactly on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    /// (next_u64() >> 11) * 2^-53, in [0, 1).
    double uniform();
    /// lo + (hi - lo) * uniform().
    double uniform(double lo, double hi);
    /// Box-Muller, one draw per call: u1 = 1 - uniform(), u2 = uniform(),
    /// returns sqrt(-2 ln u1) * cos(2 pi u2).
    double normal();

private:
    std::array<std::uint64_t, 4> s_{};
};

} // namespace rgdet
