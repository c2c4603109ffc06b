#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace lpm {

struct PointCloud {
  std::vector<Eigen::Vector3f> points;
  std::vector<std::array<std::uint8_t, 3>> colors;
  std::vector<int> support;  // views that agreed on the point; empty when unknown

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

enum class PlyErrc { open_failed, bad_header, truncated, write_failed };

class PlyError : public std::runtime_error {
 public:
  PlyError(PlyErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  PlyErrc code() const { return code_; }

 private:
  PlyErrc code_;
};

// Binary little-endian PLY with x, y, z (float) and red, green, blue (uchar).
void write_ply(const std::filesystem::path& path, const PointCloud& cloud);
// Accepts the layout above; other vertex properties of scalar type are skipped.
PointCloud read_ply(const std::filesystem::path& path);

}  // namespace lpm
