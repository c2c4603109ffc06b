#include "lpm/conv.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace lpm {

std::size_t Tensor::numel() const {
  if (shape.empty()) return 0;
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
}

namespace {

void check_conv_args(const Grid& input, const Tensor& weight, const Tensor* bias, int in_axis,
                     int out_axis, const char* who) {
  if (weight.shape.size() != 4 || weight.values.size() != weight.numel()) {
    throw ShapeError(std::string(who) + ": weight must be a 4D tensor");
  }
  if (weight.shape[in_axis] != input.channels()) {
    throw ShapeError(std::string(who) + ": weight expects " + std::to_string(weight.shape[in_axis]) +
                     " input channels, got " + std::to_string(input.channels()));
  }
  if (bias && !bias->values.empty() &&
      bias->values.size() != static_cast<std::size_t>(weight.shape[out_axis])) {
    throw ShapeError(std::string(who) + ": bias length does not match output channels");
  }
}

}  // namespace

Grid conv2d(const Grid& input, const Tensor& weight, const Tensor* bias, int stride,
            int padding) {
  check_conv_args(input, weight, bias, 1, 0, "conv2d");
  if (stride < 1 || padding < 0) throw ShapeError("conv2d: bad stride/padding");
  const int cout = weight.shape[0];
  const int cin = weight.shape[1];
  const int kh = weight.shape[2];
  const int kw = weight.shape[3];
  const int ow = (input.width() + 2 * padding - kw) / stride + 1;
  const int oh = (input.height() + 2 * padding - kh) / stride + 1;
  if (ow <= 0 || oh <= 0) throw ShapeError("conv2d: kernel larger than padded input");

  Grid out(ow, oh, cout);
  const bool has_bias = bias && !bias->values.empty();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < oh; ++y) {
    std::vector<float> acc(cout);
    for (int x = 0; x < ow; ++x) {
      for (int o = 0; o < cout; ++o) acc[o] = has_bias ? bias->values[o] : 0.0f;
      for (int ky = 0; ky < kh; ++ky) {
        const int sy = y * stride + ky - padding;
        if (sy < 0 || sy >= input.height()) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int sx = x * stride + kx - padding;
          if (sx < 0 || sx >= input.width()) continue;
          const float* src = input.pixel(sx, sy).data();
          for (int o = 0; o < cout; ++o) {
            const float* w = weight.values.data() + ((static_cast<std::size_t>(o) * cin) * kh + ky) * kw + kx;
            float s = 0.0f;
            for (int i = 0; i < cin; ++i) s += w[static_cast<std::size_t>(i) * kh * kw] * src[i];
            acc[o] += s;
          }
        }
      }
      std::ranges::copy(acc, out.pixel(x, y).begin());
    }
  }
  return out;
}

Grid conv_transpose2d(const Grid& input, const Tensor& weight, const Tensor* bias, int stride,
                      int padding) {
  check_conv_args(input, weight, bias, 0, 1, "conv_transpose2d");
  if (stride < 1 || padding < 0) throw ShapeError("conv_transpose2d: bad stride/padding");
  const int cin = weight.shape[0];
  const int cout = weight.shape[1];
  const int kh = weight.shape[2];
  const int kw = weight.shape[3];
  const int ow = (input.width() - 1) * stride - 2 * padding + kw;
  const int oh = (input.height() - 1) * stride - 2 * padding + kh;
  if (ow <= 0 || oh <= 0) throw ShapeError("conv_transpose2d: empty output");

  Grid out(ow, oh, cout);
  const bool has_bias = bias && !bias->values.empty();
  // Gather form: each output pixel collects the input pixels that scatter to it.
#pragma omp parallel for schedule(static)
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      auto dst = out.pixel(x, y);
      for (int o = 0; o < cout; ++o) dst[o] = has_bias ? bias->values[o] : 0.0f;
      for (int ky = 0; ky < kh; ++ky) {
        const int ny = y + padding - ky;
        if (ny < 0 || ny % stride != 0) continue;
        const int sy = ny / stride;
        if (sy >= input.height()) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int nx = x + padding - kx;
          if (nx < 0 || nx % stride != 0) continue;
          const int sx = nx / stride;
          if (sx >= input.width()) continue;
          const float* src = input.pixel(sx, sy).data();
          for (int i = 0; i < cin; ++i) {
            const float* w = weight.values.data() + ((static_cast<std::size_t>(i) * cout) * kh + ky) * kw + kx;
            for (int o = 0; o < cout; ++o) dst[o] += src[i] * w[static_cast<std::size_t>(o) * kh * kw];
          }
        }
      }
    }
  }
  return out;
}

void leaky_relu_inplace(Grid& g, float slope) {
  for (float& v : g.data()) v = v >= 0.0f ? v : slope * v;
}

void relu_inplace(Grid& g) {
  for (float& v : g.data()) v = std::max(v, 0.0f);
}

float logistic(float x) { return 1.0f / (1.0f + std::exp(-x)); }

Grid concat_channels(const Grid& a, const Grid& b) {
  if (!a.same_size(b)) throw ShapeError("concat_channels: size mismatch");
  Grid out(a.width(), a.height(), a.channels() + b.channels());
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      auto dst = out.pixel(x, y);
      std::ranges::copy(a.pixel(x, y), dst.begin());
      std::ranges::copy(b.pixel(x, y), dst.begin() + a.channels());
    }
  }
  return out;
}

float run_pointwise_mlp(std::span<const DenseLayer> layers, std::span<const float> input,
                        std::vector<float>& scratch_a, std::vector<float>& scratch_b) {
  scratch_a.assign(input.begin(), input.end());
  for (const DenseLayer& layer : layers) {
    const int out = layer.weight->shape[0];
    const int in = layer.weight->shape[1];
    scratch_b.assign(out, 0.0f);
    for (int o = 0; o < out; ++o) {
      float s = layer.bias ? layer.bias->values[o] : 0.0f;
      const float* w = layer.weight->values.data() + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) s += w[i] * scratch_a[i];
      switch (layer.activation) {
        case DenseLayer::Activation::relu: s = std::max(s, 0.0f); break;
        case DenseLayer::Activation::sigmoid: s = logistic(s); break;
        case DenseLayer::Activation::none: break;
      }
      scratch_b[o] = s;
    }
    std::swap(scratch_a, scratch_b);
  }
  return scratch_a.empty() ? 0.0f : scratch_a[0];
}

}  // namespace lpm
