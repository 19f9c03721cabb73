#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dsnbench {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

/// Independent substream seed for (seed, tag); used to give bots, chunks and
/// synthesized entities their own reproducible streams.
constexpr std::uint64_t substream(std::uint64_t seed, std::uint64_t tag) {
    return splitmix64(splitmix64(seed) ^ splitmix64(tag ^ 0x6a09e667f3bcc909ULL));
}

inline std::uint64_t substream(std::uint64_t seed, std::string_view tag) {
    return substream(seed, fnv1a64(tag));
}

/// mt19937_64 with hand-rolled value mapping. The engine's output sequence is
/// pinned by the standard; std::uniform_*_distribution is not, so all mapping
/// from raw 64-bit draws to values is done here to keep frozen test
/// expectations stable across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform double in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(eng_()) * n) >> 64);
    }

private:
    std::mt19937_64 eng_;
};

} // namespace dsnbench
