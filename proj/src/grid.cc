#include "lpm/grid.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace lpm {

Grid::Grid(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 0 || height < 0 || channels < 0) {
    throw ShapeError("Grid: negative dimension");
  }
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Grid::Grid(int width, int height, int channels, std::vector<float> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  if (width < 0 || height < 0 || channels < 0 ||
      data_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw ShapeError("Grid: data length " + std::to_string(data_.size()) +
                     " does not match " + std::to_string(width) + "x" +
                     std::to_string(height) + "x" + std::to_string(channels));
  }
}

Grid Grid::channel(int c) const {
  Grid out(width_, height_, 1);
  const std::size_t n = pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    out.data_[i] = data_[i * channels_ + c];
  }
  return out;
}

std::size_t ValidityMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

Grid ValidityMask::to_grid() const {
  Grid g(width_, height_, 1);
  for (std::size_t i = 0; i < bits_.size(); ++i) g.data()[i] = bits_[i] ? 1.0f : 0.0f;
  return g;
}

namespace {

struct Footprint {
  int x0, x1, y0, y1;
  float fx, fy;
};

inline Footprint footprint(int w, int h, double x, double y) {
  const double xf = std::floor(x);
  const double yf = std::floor(y);
  Footprint f;
  f.fx = static_cast<float>(x - xf);
  f.fy = static_cast<float>(y - yf);
  // Clamp in double first so huge coordinates cannot overflow int.
  const double xc = std::clamp(xf, -1.0, static_cast<double>(w));
  const double yc = std::clamp(yf, -1.0, static_cast<double>(h));
  const int xi = static_cast<int>(xc);
  const int yi = static_cast<int>(yc);
  f.x0 = std::clamp(xi, 0, w - 1);
  f.x1 = std::clamp(xi + 1, 0, w - 1);
  f.y0 = std::clamp(yi, 0, h - 1);
  f.y1 = std::clamp(yi + 1, 0, h - 1);
  return f;
}

inline bool inside(int w, int h, double x, double y) {
  return x >= 0.0 && y >= 0.0 && x <= w - 1 && y <= h - 1;
}

}  // namespace

bool bilinear_sample_into(const Grid& grid, double x, double y,
                          std::span<float> out) {
  const int w = grid.width();
  const int h = grid.height();
  const int c = grid.channels();
  if (!std::isfinite(x) || !std::isfinite(y) || w == 0 || h == 0) {
    std::fill(out.begin(), out.end(), 0.0f);
    return false;
  }
  const Footprint f = footprint(w, h, x, y);
  const float w00 = (1.0f - f.fx) * (1.0f - f.fy);
  const float w10 = f.fx * (1.0f - f.fy);
  const float w01 = (1.0f - f.fx) * f.fy;
  const float w11 = f.fx * f.fy;
  const float* p00 = grid.pixel(f.x0, f.y0).data();
  const float* p10 = grid.pixel(f.x1, f.y0).data();
  const float* p01 = grid.pixel(f.x0, f.y1).data();
  const float* p11 = grid.pixel(f.x1, f.y1).data();
  for (int i = 0; i < c; ++i) {
    out[i] = w00 * p00[i] + w10 * p10[i] + w01 * p01[i] + w11 * p11[i];
  }
  return inside(w, h, x, y);
}

Sample bilinear_sample(const Grid& grid, double x, double y) {
  Sample s;
  s.value.resize(grid.channels());
  s.valid = bilinear_sample_into(grid, x, y, s.value);
  return s;
}

float bilinear_sample_scalar(const Grid& grid, double x, double y, bool* valid) {
  const int w = grid.width();
  const int h = grid.height();
  if (!std::isfinite(x) || !std::isfinite(y) || w == 0 || h == 0) {
    if (valid) *valid = false;
    return 0.0f;
  }
  const Footprint f = footprint(w, h, x, y);
  const float v = (1.0f - f.fx) * (1.0f - f.fy) * grid.at(f.x0, f.y0) +
                  f.fx * (1.0f - f.fy) * grid.at(f.x1, f.y0) +
                  (1.0f - f.fx) * f.fy * grid.at(f.x0, f.y1) +
                  f.fx * f.fy * grid.at(f.x1, f.y1);
  if (valid) *valid = inside(w, h, x, y);
  return v;
}

Grid upsample_x2(const Grid& grid) {
  if (grid.width() < 1 || grid.height() < 1) {
    throw ShapeError("upsample_x2: empty grid");
  }
  const int w = grid.width() * 2;
  const int h = grid.height() * 2;
  Grid out(w, h, grid.channels());
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const double sy = (y + 0.5) / 2.0 - 0.5;
    for (int x = 0; x < w; ++x) {
      const double sx = (x + 0.5) / 2.0 - 0.5;
      bilinear_sample_into(grid, sx, sy, out.pixel(x, y));
    }
  }
  return out;
}

Grid downsample_x2(const Grid& grid) {
  if (grid.width() < 2 || grid.height() < 2) {
    throw ShapeError("downsample_x2: grid must be at least 2x2");
  }
  const int w = (grid.width() + 1) / 2;
  const int h = (grid.height() + 1) / 2;
  const int c = grid.channels();
  Grid out(w, h, c);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto dst = out.pixel(x, y);
      int n = 0;
      for (int dy = 0; dy < 2; ++dy) {
        const int sy = 2 * y + dy;
        if (sy >= grid.height()) continue;
        for (int dx = 0; dx < 2; ++dx) {
          const int sx = 2 * x + dx;
          if (sx >= grid.width()) continue;
          const auto src = grid.pixel(sx, sy);
          for (int i = 0; i < c; ++i) dst[i] += src[i];
          ++n;
        }
      }
      for (int i = 0; i < c; ++i) dst[i] /= static_cast<float>(n);
    }
  }
  return out;
}

Grid pad_to(const Grid& grid, int width, int height) {
  if (width < grid.width() || height < grid.height() || grid.empty()) {
    throw ShapeError("pad_to: target smaller than source");
  }
  Grid out(width, height, grid.channels());
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(y, grid.height() - 1);
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(x, grid.width() - 1);
      std::ranges::copy(grid.pixel(sx, sy), out.pixel(x, y).begin());
    }
  }
  return out;
}

Grid crop(const Grid& grid, int width, int height) {
  if (width > grid.width() || height > grid.height()) {
    throw ShapeError("crop: target larger than source");
  }
  Grid out(width, height, grid.channels());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      std::ranges::copy(grid.pixel(x, y), out.pixel(x, y).begin());
    }
  }
  return out;
}

Grid to_intensity(const Grid& grid) {
  if (grid.channels() == 1) return grid;
  Grid out(grid.width(), grid.height(), 1);
  const int c = grid.channels();
  const std::size_t n = grid.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    float s = 0.0f;
    for (int k = 0; k < c; ++k) s += grid.data()[i * c + k];
    out.data()[i] = s / static_cast<float>(c);
  }
  return out;
}

}  // namespace lpm
