#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace rfl {

// SplitMix64 (Steele, Lea & Flood 2014). Every random draw in the library goes
// through this generator so that a seed reproduces the same stream on any
// platform and in any language that implements the same 30 lines.
//
//   state += 0x9E3779B97F4A7C15
//   z = state
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
//
// uniform01() takes the top 53 bits: (next() >> 11) * 2^-53, so it lies in
// [0, 1). normal() is the Box-Muller cosine branch on (1 - u1, u2).
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next();
    double uniform01();
    // Uniform integer in [0, n), n > 0 (multiply-high reduction).
    std::uint64_t below(std::uint64_t n);
    double normal();

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

// The SplitMix64 output finalizer applied to a single word.
std::uint64_t mix64(std::uint64_t x);

// Derives an independent sub-seed from a base seed and a stream index.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// In-place Fisher-Yates shuffle driven by `rng`.
template <typename T>
void shuffle(std::span<T> items, SplitMix64& rng)
{
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(items[i - 1], items[j]);
    }
}

// Returns the identity permutation 0..n-1 shuffled by `rng`.
std::vector<std::size_t> permutation(std::size_t n, SplitMix64& rng);

} // namespace rfl
