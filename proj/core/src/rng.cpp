#include "spcarob/rng.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "spcarob/error.hpp"

namespace spcarob {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t state = base ^ (stream * 0xd1b54a32d192ed03ULL);
    splitmix64(state);
    return splitmix64(state);
}

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t state = seed;
    for (auto& word : s_) word = splitmix64(state);
}

std::uint64_t SeededRng::next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double SeededRng::uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double SeededRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double SeededRng::normal(double mean, double stddev) {
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t SeededRng::below(std::uint64_t n) {
    if (n == 0) throw ParameterError("SeededRng::below: n must be positive");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
        x = next();
    } while (x >= limit);
    return x % n;
}

Vec rng_uniform(SeededRng& rng, double lo, double hi, std::size_t n) {
    if (!(lo <= hi)) throw ParameterError(fmt::format("rng_uniform: invalid range [{}, {}]", lo, hi));
    Vec out(n);
    for (double& x : out) x = rng.uniform(lo, hi);
    return out;
}

Vec rng_normal(SeededRng& rng, double mean, double stddev, std::size_t n) {
    if (!(stddev >= 0.0)) throw ParameterError(fmt::format("rng_normal: negative stddev {}", stddev));
    Vec out(n);
    for (double& x : out) x = rng.normal(mean, stddev);
    return out;
}

}  // namespace spcarob
