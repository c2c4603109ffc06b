#pragma once

#include <span>
#include <string>
#include <vector>

#include "lpm/grid.h"

namespace lpm {

// Dense float tensor, row-major over `shape`.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> values;

  std::size_t numel() const;
  bool operator==(const Tensor&) const = default;
};

// 2D cross-correlation (no kernel flip) with zero padding.
// weight: [out_channels, in_channels, kh, kw]; bias: [out_channels] or empty.
// Output size: floor((W + 2*padding - kw) / stride) + 1 (same for H).
Grid conv2d(const Grid& input, const Tensor& weight, const Tensor* bias, int stride, int padding);

// Transposed convolution (gradient of conv2d w.r.t. its input).
// weight: [in_channels, out_channels, kh, kw].
// Output size: (W - 1) * stride - 2*padding + kw.
Grid conv_transpose2d(const Grid& input, const Tensor& weight, const Tensor* bias, int stride,
                      int padding);

void leaky_relu_inplace(Grid& g, float slope);
void relu_inplace(Grid& g);
float logistic(float x);

// Channel concatenation of equally sized grids.
Grid concat_channels(const Grid& a, const Grid& b);

// One layer of a per-element channel MLP (a 1x1 or 1x1x1 convolution).
struct DenseLayer {
  const Tensor* weight = nullptr;  // [out, in]
  const Tensor* bias = nullptr;    // [out]
  enum class Activation { none, relu, sigmoid } activation = Activation::none;
};

// Applies the layer stack to one feature vector. `scratch` is resized as needed.
float run_pointwise_mlp(std::span<const DenseLayer> layers, std::span<const float> input,
                        std::vector<float>& scratch_a, std::vector<float>& scratch_b);

}  // namespace lpm
