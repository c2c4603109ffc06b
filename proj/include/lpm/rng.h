#pragma once

#include <cstdint>

namespace lpm {

// Counter-based per-pixel random stream: the state is a hash of
// (seed, stage, iteration, x, y), so results do not depend on the order in
// which pixels are visited.
struct RngKey {
  std::uint64_t seed = 0;
  int stage = 0;
  int iteration = 0;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class PixelRng {
 public:
  PixelRng(const RngKey& key, int x, int y) {
    std::uint64_t h = splitmix64(key.seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(key.stage)));
    h = splitmix64(h ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(key.iteration)) << 8));
    h = splitmix64(h ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)) << 32 |
                        static_cast<std::uint32_t>(y)));
    state_ = h;
  }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() {
    state_ = splitmix64(state_);
    return static_cast<double>(state_ >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

}  // namespace lpm
