#include "lrcnn/reference.hpp"

namespace lrcnn::reference {

namespace {

// Padded coordinate -> input coordinate, or false when the tap hits padding.
bool source(std::size_t o, std::size_t k, std::size_t stride, std::size_t pad, std::size_t extent,
            std::size_t& i) {
  const std::size_t padded = o * stride + k;
  if (padded < pad || padded - pad >= extent) return false;
  i = padded - pad;
  return true;
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const ConvWeights& w, Stride2 stride, Pad2 pad) {
  const Shape& is = input.shape();
  const Shape os = conv_output_shape(is, w, stride, pad);
  Tensor out(os);
  for (std::size_t n = 0; n < os.n; ++n)
    for (std::size_t d = 0; d < os.c; ++d)
      for (std::size_t oy = 0; oy < os.h; ++oy)
        for (std::size_t ox = 0; ox < os.w; ++ox) {
          double acc = w.bias[d];
          for (std::size_t c = 0; c < is.c; ++c)
            for (std::size_t ky = 0; ky < w.kh; ++ky)
              for (std::size_t kx = 0; kx < w.kw; ++kx) {
                std::size_t iy = 0;
                std::size_t ix = 0;
                if (!source(oy, ky, stride.y, pad.y, is.h, iy)) continue;
                if (!source(ox, kx, stride.x, pad.x, is.w, ix)) continue;
                acc += w.w(d, c, ky, kx) * input.at(n, c, iy, ix);
              }
          out.at(n, d, oy, ox) = acc;
        }
  return out;
}

GradBundle conv2d_backward(const Tensor& input, const ConvWeights& w, const Tensor& grad_out,
                           Stride2 stride, Pad2 pad) {
  const Shape& is = input.shape();
  const Shape os = conv_output_shape(is, w, stride, pad);
  if (grad_out.shape() != os) throw ShapeError("reference::conv2d_backward: grad_out shape");
  GradBundle g{Tensor(is), std::vector<double>(w.weights.size(), 0.0),
               std::vector<double>(w.d, 0.0)};
  for (std::size_t n = 0; n < os.n; ++n)
    for (std::size_t d = 0; d < os.c; ++d)
      for (std::size_t oy = 0; oy < os.h; ++oy)
        for (std::size_t ox = 0; ox < os.w; ++ox) {
          const double go = grad_out.at(n, d, oy, ox);
          g.grad_bias[d] += go;
          for (std::size_t c = 0; c < is.c; ++c)
            for (std::size_t ky = 0; ky < w.kh; ++ky)
              for (std::size_t kx = 0; kx < w.kw; ++kx) {
                std::size_t iy = 0;
                std::size_t ix = 0;
                if (!source(oy, ky, stride.y, pad.y, is.h, iy)) continue;
                if (!source(ox, kx, stride.x, pad.x, is.w, ix)) continue;
                g.grad_input.at(n, c, iy, ix) += go * w.w(d, c, ky, kx);
                g.grad_weights[((d * w.c + c) * w.kh + ky) * w.kw + kx] +=
                    go * input.at(n, c, iy, ix);
              }
        }
  return g;
}

}  // namespace lrcnn::reference
