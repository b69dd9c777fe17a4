#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace qshield {

// SplitMix64 finalizer. Used as the seed-derivation hash everywhere a
// named stream is split off a master seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from (master, stream). Streams with
/// different indices are decorrelated, so work keyed by index (campaign
/// runs, grid points) can execute in any order on any number of workers
/// and still reproduce bit-identical results.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^
                      splitmix64(stream * 0xd1b54a32d192ed03ull + 0x8cb92ba72f3d8dd7ull));
}

/// Deterministic generator. mt19937_64's output sequence is pinned by the
/// standard; the uniform helpers are hand-rolled because std distributions
/// are implementation-defined and would break cross-toolchain goldens.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1), 53 random bits.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n), unbiased (rejection sampling). n must be > 0.
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
        const std::uint64_t limit = max - max % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

private:
    std::mt19937_64 gen_;
};

} // namespace qshield
