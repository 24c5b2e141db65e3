#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace oikg {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for an independent substream identified by (root seed, purpose tag, index).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) {
    return Rng(derive_seed(seed, tag, index));
}

/// 64-bit FNV-1a; used for config hashes and substream tags.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace oikg
