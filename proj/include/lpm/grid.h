#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace lpm {

// Dense row-major grid with interleaved channels. Pixel (x, y) has its center
// at integer coordinates (x, y); bilinear sampling treats the grid as a
// continuous function over [0, W-1] x [0, H-1].
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, int channels, float fill = 0.0f);
  Grid(int width, int height, int channels, std::vector<float> data);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  bool empty() const { return data_.empty(); }

  float& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  float at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::span<float> pixel(int x, int y) {
    return {data_.data() + index(x, y, 0), static_cast<std::size_t>(channels_)};
  }
  std::span<const float> pixel(int x, int y) const {
    return {data_.data() + index(x, y, 0), static_cast<std::size_t>(channels_)};
  }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  bool same_shape(const Grid& other) const {
    return width_ == other.width_ && height_ == other.height_ &&
           channels_ == other.channels_;
  }
  bool same_size(const Grid& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  // Single channel view of channel c.
  Grid channel(int c) const;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

class ValidityMask {
 public:
  ValidityMask() = default;
  ValidityMask(int width, int height, bool fill = false)
      : width_(width), height_(height),
        bits_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool get(int x, int y) const {
    return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  void set(int x, int y, bool v) {
    bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0;
  }
  std::size_t count() const;
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  // 1.0 where valid, 0.0 elsewhere; used for PFM debug dumps.
  Grid to_grid() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct Sample {
  std::vector<float> value;
  bool valid = false;
};

// Bilinear lookup at a continuous coordinate. Corner indices are clamped to
// the grid; the result is flagged invalid when (x, y) lies outside
// [0, W-1] x [0, H-1]. Non-finite coordinates yield zeros and invalid.
Sample bilinear_sample(const Grid& grid, double x, double y);

// Allocation-free form of bilinear_sample; out.size() must equal channels().
bool bilinear_sample_into(const Grid& grid, double x, double y,
                          std::span<float> out);

// Scalar fast path for single-channel grids.
float bilinear_sample_scalar(const Grid& grid, double x, double y, bool* valid);

// x2 bilinear upsampling. Output pixel u reads source coordinate
// (u + 0.5) / 2 - 0.5, clamped; this is the half-pixel alignment that matches
// 2x2 mean pooling in downsample_x2.
Grid upsample_x2(const Grid& grid);

// 2x2 mean pooling; output is ceil(W/2) x ceil(H/2). Partial footprints at odd
// borders average the pixels that exist.
Grid downsample_x2(const Grid& grid);

// Replicate-pad to the given size (right and bottom edges only).
Grid pad_to(const Grid& grid, int width, int height);
Grid crop(const Grid& grid, int width, int height);

// Mean over channels, producing a single-channel grid.
Grid to_intensity(const Grid& grid);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace lpm
