#pragma once

#include <cstdint>
#include <random>

namespace harvest_guard {

using Rng = std::mt19937_64;

/// Independent stream for (master seed, index); used for per-episode and
/// per-purpose generators so results never depend on evaluation order.
inline Rng derive_rng(std::uint64_t master, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x68617276u};
  return Rng(seq);
}

}  // namespace harvest_guard
