#pragma once

// Serial, loop-for-loop kernels. They are the oracle the OpenMP kernels in
// ops.hpp are tested and benchmarked against; nothing on the training path
// calls them.

#include "lrcnn/ops.hpp"

namespace lrcnn::reference {

Tensor conv2d_forward(const Tensor& input, const ConvWeights& w, Stride2 stride, Pad2 pad);
GradBundle conv2d_backward(const Tensor& input, const ConvWeights& w, const Tensor& grad_out,
                           Stride2 stride, Pad2 pad);

}  // namespace lrcnn::reference
