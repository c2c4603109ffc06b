#pragma once

#include <filesystem>
#include <random>

#include "lpm/grid.h"

namespace lpm::test {

inline Grid random_grid(int w, int h, int c, std::mt19937& rng, float lo = -1.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> u(lo, hi);
  Grid g(w, h, c);
  for (float& v : g.data()) v = u(rng);
  return g;
}

inline std::filesystem::path source_dir() { return LPM_SOURCE_DIR; }

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("lpm_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace lpm::test
