#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace nullaudit {

/// Identifies the generator and the per-draw substream derivation. Written
/// into every report; bump the version suffix if either changes.
inline constexpr std::string_view kRngIdentifier = "xoshiro256** with splitmix64 per-draw substreams, v1";

/// SplitMix64 finalizer applied to `x + golden gamma`.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// xoshiro256** (Blackman & Vigna). State is seeded from SplitMix64.
class Xoshiro256 {
public:
    explicit Xoshiro256(std::uint64_t seed) noexcept;

    std::uint64_t next() noexcept;
    /// Uniform integer in [0, bound). `bound` must be > 0. Lemire's
    /// multiply-shift with rejection, so no modulo bias.
    std::uint64_t bounded(std::uint64_t bound) noexcept;
    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept;

private:
    std::uint64_t s_[4];
};

/// Independent stream for draw `index` under `seed`; a pure function of both,
/// so draws can be generated in any order or in parallel.
Xoshiro256 draw_stream(std::uint64_t seed, std::uint64_t index) noexcept;

/// `k` distinct values from [0, n), ascending (Floyd's algorithm).
std::vector<std::size_t> sample_without_replacement(Xoshiro256& rng, std::size_t n, std::size_t k);

}  // namespace nullaudit
