#include "rfl/random.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace rfl {

std::uint64_t mix64(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t SplitMix64::next()
{
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
}

double SplitMix64::uniform01()
{
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

namespace {

// High 64 bits of the 128-bit product a * b.
std::uint64_t mul_high(std::uint64_t a, std::uint64_t b)
{
    const std::uint64_t a_lo = a & 0xFFFFFFFFULL;
    const std::uint64_t a_hi = a >> 32;
    const std::uint64_t b_lo = b & 0xFFFFFFFFULL;
    const std::uint64_t b_hi = b >> 32;
    const std::uint64_t lo_lo = a_lo * b_lo;
    const std::uint64_t hi_lo = a_hi * b_lo;
    const std::uint64_t lo_hi = a_lo * b_hi;
    const std::uint64_t cross = (lo_lo >> 32) + (hi_lo & 0xFFFFFFFFULL) + lo_hi;
    return a_hi * b_hi + (hi_lo >> 32) + (cross >> 32);
}

} // namespace

std::uint64_t SplitMix64::below(std::uint64_t n)
{
    return mul_high(next(), n);
}

double SplitMix64::normal()
{
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream)
{
    return mix64(base ^ mix64(stream + 0x9E3779B97F4A7C15ULL));
}

std::vector<std::size_t> permutation(std::size_t n, SplitMix64& rng)
{
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(std::span<std::size_t>(order), rng);
    return order;
}

} // namespace rfl
