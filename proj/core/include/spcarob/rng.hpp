#pragma once

#include <cstddef>
#include <cstdint>

#include "spcarob/numerics.hpp"

namespace spcarob {

// xoshiro256** (Blackman & Vigna) seeded through SplitMix64.
//
// The stream is fully specified by the algorithm below, so a given seed
// produces the same sequence on every platform:
//   * state s[0..3] = four successive SplitMix64 outputs starting at `seed`
//   * next(): result = rotl(s1 * 5, 7) * 9, then the xoshiro256 state update
//   * uniform01(): (next() >> 11) * 2^-53, in [0, 1)
//   * normal(): Box-Muller on two uniform01 draws, no caching of the spare
// Standard-library distributions are avoided because their output is
// implementation-defined.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed = 0);

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t next();
    double uniform01();
    double uniform(double lo, double hi);
    double normal(double mean = 0.0, double stddev = 1.0);
    // Uniform integer in [0, n) by rejection, n > 0.
    std::uint64_t below(std::uint64_t n);

private:
    std::uint64_t seed_;
    std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);
// Derives an independent seed for a sub-stream (e.g. per test example).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

Vec rng_uniform(SeededRng& rng, double lo, double hi, std::size_t n);
Vec rng_normal(SeededRng& rng, double mean, double stddev, std::size_t n);

}  // namespace spcarob
