#include "lpm/features.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace lpm {

namespace {

constexpr float kLeakySlope = 0.1f;

inline float clamped(const Grid& g, int x, int y) {
  x = std::clamp(x, 0, g.width() - 1);
  y = std::clamp(y, 0, g.height() - 1);
  return g.at(x, y);
}

Grid to_rgb(const Grid& image) {
  if (image.channels() == 3) return image;
  if (image.channels() != 1) throw ShapeError("expected a 1- or 3-channel image");
  Grid out(image.width(), image.height(), 3);
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    for (int c = 0; c < 3; ++c) out.data()[i * 3 + c] = image.data()[i];
  }
  return out;
}

Grid conv_layer(const Grid& in, const CoefficientSet& set, const std::string& base, int stride,
                int padding, bool activate) {
  const Tensor& w = set.require(base + ".weight");
  const Tensor* b = set.find(base + ".bias");
  if (w.shape.size() != 4 || w.shape[1] != in.channels()) {
    throw CoefficientError(CoefficientErrc::shape_mismatch, base + ".weight",
                           "tensor '" + base + ".weight' does not fit its input");
  }
  Grid out = conv2d(in, w, b, stride, padding);
  if (activate) leaky_relu_inplace(out, kLeakySlope);
  return out;
}

Grid add(Grid a, const Grid& b) {
  if (!a.same_shape(b)) throw ShapeError("feature merge: shape mismatch");
  for (std::size_t i = 0; i < a.data().size(); ++i) a.data()[i] += b.data()[i];
  return a;
}

}  // namespace

Grid handcrafted_features(const Grid& intensity) {
  if (intensity.channels() != 1) throw ShapeError("handcrafted_features: expected intensity");
  const int w = intensity.width();
  const int h = intensity.height();
  Grid out(w, h, kHandcraftedChannels);
  constexpr int census[5][2] = {{-1, -1}, {1, -1}, {-1, 1}, {1, 1}, {0, 0}};
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto f = out.pixel(x, y);
      f[0] = intensity.at(x, y);
      f[1] = 0.5f * (clamped(intensity, x + 1, y) - clamped(intensity, x - 1, y));
      f[2] = 0.5f * (clamped(intensity, x, y + 1) - clamped(intensity, x, y - 1));
      float mean = 0.0f;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) mean += clamped(intensity, x + dx, y + dy);
      }
      mean /= 9.0f;
      for (int i = 0; i < 5; ++i) {
        f[3 + i] = clamped(intensity, x + census[i][0], y + census[i][1]) - mean;
      }
    }
  }
  return out;
}

FeaturePyramid extract_pyramid(const Grid& image, FeatureMode mode,
                               const CoefficientSet* coefficients) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw ShapeError("extract_pyramid: image must have 1 or 3 channels");
  }
  if (image.width() % 8 != 0 || image.height() % 8 != 0 || image.empty()) {
    throw ShapeError("extract_pyramid: image size must be a non-zero multiple of 8");
  }
  FeaturePyramid pyr;
  pyr.guidance = image;

  if (mode == FeatureMode::handcrafted) {
    Grid level = to_intensity(image);
    for (int k = 1; k <= 3; ++k) {
      level = downsample_x2(level);
      pyr.stage(k) = handcrafted_features(level);
    }
    return pyr;
  }

  if (!coefficients) throw std::invalid_argument("extract_pyramid: coefficient mode needs coefficients");
  const CoefficientSet& set = *coefficients;
  const Grid rgb = to_rgb(image);
  const Grid f0 = conv_layer(rgb, set, "fpn.conv0", 1, 1, true);
  const Grid f1 = conv_layer(f0, set, "fpn.conv1", 2, 1, true);
  const Grid f2 = conv_layer(f1, set, "fpn.conv2", 2, 1, true);
  const Grid f3 = conv_layer(f2, set, "fpn.conv3", 2, 1, true);

  const Grid top3 = conv_layer(f3, set, "fpn.lat3", 1, 0, false);
  const Grid top2 = add(conv_layer(f2, set, "fpn.lat2", 1, 0, false), upsample_x2(top3));
  const Grid top1 = add(conv_layer(f1, set, "fpn.lat1", 1, 0, false), upsample_x2(top2));
  pyr.stage(3) = conv_layer(top3, set, "fpn.out3", 1, 1, false);
  pyr.stage(2) = conv_layer(top2, set, "fpn.out2", 1, 1, false);
  pyr.stage(1) = conv_layer(top1, set, "fpn.out1", 1, 1, false);
  return pyr;
}

Grid normalize_for_matching(const Grid& features, float sharpness) {
  const int c = features.channels();
  const std::size_t n = features.pixel_count();
  std::vector<double> mean(c, 0.0), var(c, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < c; ++k) mean[k] += features.data()[i * c + k];
  }
  for (int k = 0; k < c; ++k) mean[k] /= static_cast<double>(std::max<std::size_t>(n, 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < c; ++k) {
      const double d = features.data()[i * c + k] - mean[k];
      var[k] += d * d;
    }
  }
  std::vector<float> inv_std(c);
  for (int k = 0; k < c; ++k) {
    const double sd = std::sqrt(var[k] / static_cast<double>(std::max<std::size_t>(n, 1)));
    inv_std[k] = sd > 1e-12 ? static_cast<float>(1.0 / sd) : 0.0f;
  }

  Grid out(features.width(), features.height(), c);
  const float target = std::sqrt(static_cast<float>(c) * sharpness);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    float* dst = out.data().data() + i * c;
    const float* src = features.data().data() + i * c;
    float norm2 = 0.0f;
    for (int k = 0; k < c; ++k) {
      dst[k] = (src[k] - static_cast<float>(mean[k])) * inv_std[k];
      norm2 += dst[k] * dst[k];
    }
    if (norm2 > 1e-20f) {
      const float s = target / std::sqrt(norm2);
      for (int k = 0; k < c; ++k) dst[k] *= s;
    }
  }
  return out;
}

}  // namespace lpm
