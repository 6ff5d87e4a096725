#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "pixground/raster.hpp"

namespace pixground::testing {

/// Foreground with probability `density`.
inline BinaryMask random_mask(std::mt19937_64& rng, int w, int h, double density) {
  std::bernoulli_distribution on(density);
  std::vector<std::uint8_t> bits(std::size_t(w) * h);
  for (auto& b : bits) b = on(rng) ? 1 : 0;
  return BinaryMask(w, h, std::move(bits));
}

inline int random_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace pixground::testing
