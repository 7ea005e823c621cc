#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lrcnn/tensor.hpp"

namespace lrcnn {

struct Stride2 {
  std::size_t y = 1;
  std::size_t x = 1;
  friend bool operator==(const Stride2&, const Stride2&) = default;
};

struct Pad2 {
  std::size_t y = 0;
  std::size_t x = 0;
  friend bool operator==(const Pad2&, const Pad2&) = default;
};

/// "Same" padding for odd kernels: (kh/2, kw/2).
inline Pad2 same_padding(std::size_t kh, std::size_t kw) { return {kh / 2, kw / 2}; }

/// Filter bank of d filters of shape c x kh x kw, plus one bias per filter.
struct ConvWeights {
  std::size_t d = 0;
  std::size_t c = 0;
  std::size_t kh = 0;
  std::size_t kw = 0;
  std::vector<double> weights;  // (d, c, kh, kw) row-major
  std::vector<double> bias;     // d

  ConvWeights() = default;
  ConvWeights(std::size_t d, std::size_t c, std::size_t kh, std::size_t kw);

  std::size_t fan() const { return c * kh * kw; }
  double& w(std::size_t o, std::size_t i, std::size_t y, std::size_t x) {
    return weights[((o * c + i) * kh + y) * kw + x];
  }
  double w(std::size_t o, std::size_t i, std::size_t y, std::size_t x) const {
    return weights[((o * c + i) * kh + y) * kw + x];
  }
  friend bool operator==(const ConvWeights&, const ConvWeights&) = default;
};

/// Affine map from `in` to `out` features; weights are (in x out) row-major.
struct DenseWeights {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  DenseWeights() = default;
  DenseWeights(std::size_t in, std::size_t out);
  friend bool operator==(const DenseWeights&, const DenseWeights&) = default;
};

struct GradBundle {
  Tensor grad_input;
  std::vector<double> grad_weights;
  std::vector<double> grad_bias;
};

/// Output extent of a padded, strided window sweep.
std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad);
Shape conv_output_shape(const Shape& in, const ConvWeights& w, Stride2 stride, Pad2 pad);

// Convolution is cross-correlation with zero padding. Every output element is
// accumulated as bias + sum over (c, ky, kx) in that order, which is the order
// the serial reference uses too; the two agree bit for bit.
Tensor conv2d_forward(const Tensor& input, const ConvWeights& w, Stride2 stride, Pad2 pad);
GradBundle conv2d_backward(const Tensor& input, const ConvWeights& w, const Tensor& grad_out,
                           Stride2 stride, Pad2 pad);

struct PoolResult {
  Tensor output;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
};

PoolResult maxpool_forward(const Tensor& input, std::size_t k = 2, std::size_t stride = 2);
Tensor maxpool_backward(const Shape& input_shape, std::span<const std::uint32_t> argmax,
                        const Tensor& grad_out);

/// Per-channel spatial max; output is (n, c, 1, 1).
PoolResult global_maxpool_forward(const Tensor& input);
inline Tensor global_maxpool_backward(const Shape& input_shape,
                                      std::span<const std::uint32_t> argmax,
                                      const Tensor& grad_out) {
  return maxpool_backward(input_shape, argmax, grad_out);
}

Tensor relu_forward(const Tensor& input);
/// f'(0) is taken as 0.
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

/// Input is flattened per sample to (n, c*h*w); output is (n, out, 1, 1).
Tensor dense_forward(const Tensor& input, const DenseWeights& w);
GradBundle dense_backward(const Tensor& input, const DenseWeights& w, const Tensor& grad_out);

struct LossResult {
  double loss = 0.0;
  Tensor grad_logits;
};

/// Mean softmax cross-entropy over the batch. `logits` is (n, K, 1, 1) or (n, K*h*w) flattened.
LossResult softmax_xent(const Tensor& logits, std::span<const std::uint8_t> labels);

std::vector<double> softmax(std::span<const double> logits);

}  // namespace lrcnn
