#pragma once

#include <cstdint>
#include <random>

namespace sentisim {

using Rng = std::mt19937_64;

/// splitmix64 finalizer, used to turn (master seed, stream id) pairs into
/// decorrelated per-stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Per-stream seed derived from a master seed. Truncated to 53 bits so the
/// value survives a round trip through a double column in a CSV report.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    constexpr std::uint64_t mask53 = (1ULL << 53) - 1;
    return mix64(master + 0x9e3779b97f4a7c15ULL * (stream + 1)) & mask53;
}

}  // namespace sentisim
