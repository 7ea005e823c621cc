#include "lrcnn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

namespace lrcnn {

namespace {

// Range [lo, hi) of output positions whose tap at kernel offset k lands inside
// an input of extent `in`.
struct TapRange {
  std::size_t lo = 0;
  std::size_t hi = 0;
};

TapRange tap_range(std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                   std::size_t pad) {
  TapRange r;
  r.lo = pad > k ? (pad - k + stride - 1) / stride : 0;
  if (in + pad <= k) return {0, 0};
  r.hi = std::min(out, (in - 1 + pad - k) / stride + 1);
  if (r.hi < r.lo) r.hi = r.lo;
  return r;
}

void check_conv_args(const Shape& in, const ConvWeights& w, Stride2 stride, Pad2 pad) {
  if (in.c != w.c) {
    throw ShapeError("conv2d: input channels (c) " + std::to_string(in.c) +
                     " do not match filter channels " + std::to_string(w.c));
  }
  if (w.weights.size() != w.d * w.c * w.kh * w.kw) {
    throw ShapeError("conv2d: weight count does not equal d*c*kh*kw");
  }
  if (w.bias.size() != w.d) throw ShapeError("conv2d: bias count does not equal d");
  if (stride.y == 0 || stride.x == 0) throw ShapeError("conv2d: stride must be >= 1");
  if (in.h + 2 * pad.y < w.kh) {
    throw ShapeError("conv2d: kernel height (kh) " + std::to_string(w.kh) +
                     " exceeds padded input height " + std::to_string(in.h + 2 * pad.y));
  }
  if (in.w + 2 * pad.x < w.kw) {
    throw ShapeError("conv2d: kernel width (kw) " + std::to_string(w.kw) +
                     " exceeds padded input width " + std::to_string(in.w + 2 * pad.x));
  }
}

std::uint32_t checked_index(std::size_t i) {
  if (i > std::numeric_limits<std::uint32_t>::max()) {
    throw ShapeError("pooling: tensor too large for 32-bit argmax indices");
  }
  return static_cast<std::uint32_t>(i);
}

}  // namespace

ConvWeights::ConvWeights(std::size_t d, std::size_t c, std::size_t kh, std::size_t kw)
    : d(d), c(c), kh(kh), kw(kw), weights(d * c * kh * kw, 0.0), bias(d, 0.0) {}

DenseWeights::DenseWeights(std::size_t in, std::size_t out)
    : in(in), out(out), weights(in * out, 0.0), bias(out, 0.0) {}

std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

Shape conv_output_shape(const Shape& in, const ConvWeights& w, Stride2 stride, Pad2 pad) {
  check_conv_args(in, w, stride, pad);
  return {in.n, w.d, conv_out_extent(in.h, w.kh, stride.y, pad.y),
          conv_out_extent(in.w, w.kw, stride.x, pad.x)};
}

namespace {

constexpr std::size_t kLanes = 8;   // channels per register block, two vectors
constexpr std::size_t kPixels = 4;  // output pixels per register block

// Four doubles in one register. Multiply and add stay separate under
// -ffp-contract=off, so lane arithmetic rounds exactly like scalar code.
using v4d = double __attribute__((vector_size(32)));

v4d load4(const double* p) {
  v4d v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

v4d splat(double x) { return v4d{x, x, x, x}; }

std::size_t round_up(std::size_t v, std::size_t m) { return (v + m - 1) / m * m; }

// Kernel taps [lo, hi) of a k-tap kernel that stay inside an input of extent
// `in` for output position o.
TapRange valid_taps(std::size_t o, std::size_t k, std::size_t stride, std::size_t pad,
                    std::size_t in) {
  const std::size_t base = o * stride;
  TapRange r;
  r.lo = pad > base ? pad - base : 0;
  r.hi = std::min(k, in + pad > base ? in + pad - base : 0);
  if (r.hi < r.lo) r.hi = r.lo;
  return r;
}

// Output columns [lo, hi) whose every tap is inside the input.
TapRange interior_outputs(std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                          std::size_t pad) {
  TapRange r;
  r.lo = std::min(out, (pad + stride - 1) / stride);
  r.hi = in + pad >= k ? std::min(out, (in + pad - k) / stride + 1) : 0;
  if (r.hi < r.lo) r.hi = r.lo;
  return r;
}

// (kernel tap, output position) pairs that reach input position i, taps
// descending, which is output position ascending.
std::vector<std::pair<std::size_t, std::size_t>> taps_reaching(std::size_t i, std::size_t k,
                                                               std::size_t stride, std::size_t pad,
                                                               std::size_t out) {
  std::vector<std::pair<std::size_t, std::size_t>> r;
  for (std::size_t t = k; t-- > 0;) {
    if (i + pad < t || (i + pad - t) % stride != 0) continue;
    const std::size_t o = (i + pad - t) / stride;
    if (o < out) r.emplace_back(t, o);
  }
  return r;
}

// Accumulates one weight-gradient block of L input channels for filter d at
// tap (ky, kx). Each lane is its own chain over (n, oy, ox) in order, which is
// the reference summation order; the lanes give the CPU independent work.
template <std::size_t L>
void weight_grad_block(const double* xt, std::size_t cp, const double* go, const Shape& is,
                       const Shape& os, std::size_t d, std::size_t ky, std::size_t kx,
                       std::size_t cb, TapRange ry, TapRange rx, Stride2 stride, Pad2 pad,
                       double (&acc)[L]) {
  constexpr std::size_t V = L / 4;
  v4d sum[V] = {};
  for (std::size_t n = 0; n < is.n; ++n) {
    for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
      const double* grow = go + ((n * os.c + d) * os.h + oy) * os.w;
      const double* xrow = xt + ((n * is.h + oy * stride.y + ky - pad.y) * is.w) * cp + cb;
      for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
        const v4d g = splat(grow[ox]);
        const double* x = xrow + (ox * stride.x + kx - pad.x) * cp;
        for (std::size_t v = 0; v < V; ++v) sum[v] += g * load4(x + 4 * v);
      }
    }
  }
  std::memcpy(acc, sum, sizeof acc);
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const ConvWeights& w, Stride2 stride, Pad2 pad) {
  const Shape& is = input.shape();
  const Shape os = conv_output_shape(is, w, stride, pad);
  Tensor out(os);
  const double* in = input.data().data();
  double* o = out.data().data();

  // Filters innermost so one input value feeds kLanes accumulators. Padding
  // lanes are zero and never stored.
  const std::size_t dp = round_up(w.d, kLanes);
  std::vector<double> wt(is.c * w.kh * w.kw * dp, 0.0);
  std::vector<double> bias(dp, 0.0);
  for (std::size_t d = 0; d < w.d; ++d) {
    bias[d] = w.bias[d];
    for (std::size_t c = 0; c < is.c; ++c)
      for (std::size_t ky = 0; ky < w.kh; ++ky)
        for (std::size_t kx = 0; kx < w.kw; ++kx) wt[((c * w.kh + ky) * w.kw + kx) * dp + d] = w.w(d, c, ky, kx);
  }
  const TapRange inner = interior_outputs(is.w, os.w, w.kw, stride.x, pad.x);
  const std::ptrdiff_t batch = static_cast<std::ptrdiff_t>(is.n);
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(os.h);

  // Every output element starts at its bias and adds taps in (c, ky, kx)
  // order, skipping taps that fall in the padding, exactly like the reference.
#pragma omp parallel for collapse(2) schedule(static)
  for (std::ptrdiff_t n = 0; n < batch; ++n) {
    for (std::ptrdiff_t oy = 0; oy < rows; ++oy) {
      const TapRange ry = valid_taps(oy, w.kh, stride.y, pad.y, is.h);
      const double* src = in + n * is.c * is.plane();
      for (std::size_t db = 0; db < w.d; db += kLanes) {
        const std::size_t lanes = std::min(kLanes, w.d - db);
        double* dst = o + ((n * w.d + db) * os.h + oy) * os.w;
        std::size_t ox = 0;
        while (ox < os.w) {
          if (ox >= inner.lo && ox + kPixels <= inner.hi) {
            const v4d b0 = load4(bias.data() + db), b1 = load4(bias.data() + db + 4);
            v4d acc[kPixels][2];
            for (std::size_t p = 0; p < kPixels; ++p) {
              acc[p][0] = b0;
              acc[p][1] = b1;
            }
            for (std::size_t c = 0; c < is.c; ++c) {
              for (std::size_t ky = ry.lo; ky < ry.hi; ++ky) {
                const double* row = src + (c * is.h + oy * stride.y + ky - pad.y) * is.w + ox * stride.x - pad.x;
                const double* wrow = wt.data() + (c * w.kh + ky) * w.kw * dp + db;
                for (std::size_t kx = 0; kx < w.kw; ++kx) {
                  const v4d w0 = load4(wrow + kx * dp), w1 = load4(wrow + kx * dp + 4);
                  for (std::size_t p = 0; p < kPixels; ++p) {
                    const v4d x = splat(row[p * stride.x + kx]);
                    acc[p][0] += x * w0;
                    acc[p][1] += x * w1;
                  }
                }
              }
            }
            for (std::size_t j = 0; j < lanes; ++j)
              for (std::size_t p = 0; p < kPixels; ++p) dst[j * os.plane() + ox + p] = acc[p][j / 4][j % 4];
            ox += kPixels;
          } else {
            const TapRange rx = valid_taps(ox, w.kw, stride.x, pad.x, is.w);
            v4d acc[2] = {load4(bias.data() + db), load4(bias.data() + db + 4)};
            for (std::size_t c = 0; c < is.c; ++c) {
              for (std::size_t ky = ry.lo; ky < ry.hi; ++ky) {
                const double* row = src + (c * is.h + oy * stride.y + ky - pad.y) * is.w;
                const double* wrow = wt.data() + (c * w.kh + ky) * w.kw * dp + db;
                for (std::size_t kx = rx.lo; kx < rx.hi; ++kx) {
                  const v4d x = splat(row[ox * stride.x + kx - pad.x]);
                  acc[0] += x * load4(wrow + kx * dp);
                  acc[1] += x * load4(wrow + kx * dp + 4);
                }
              }
            }
            for (std::size_t j = 0; j < lanes; ++j) dst[j * os.plane() + ox] = acc[j / 4][j % 4];
            ++ox;
          }
        }
      }
    }
  }
  return out;
}

GradBundle conv2d_backward(const Tensor& input, const ConvWeights& w, const Tensor& grad_out,
                           Stride2 stride, Pad2 pad) {
  const Shape& is = input.shape();
  const Shape os = conv_output_shape(is, w, stride, pad);
  if (grad_out.shape() != os) {
    throw ShapeError("conv2d_backward: grad_out shape " + to_string(grad_out.shape()) +
                     " does not match forward output " + to_string(os));
  }
  GradBundle g{Tensor(is), std::vector<double>(w.weights.size(), 0.0),
               std::vector<double>(w.d, 0.0)};
  const double* in = input.data().data();
  const double* go = grad_out.data().data();

  // Channel-last copy of the input so a weight-gradient block reads its
  // channel lanes contiguously.
  const std::size_t cp = round_up(is.c, 4);
  std::vector<double> xt(is.n * is.plane() * cp, 0.0);
  for (std::size_t n = 0; n < is.n; ++n)
    for (std::size_t c = 0; c < is.c; ++c)
      for (std::size_t i = 0; i < is.plane(); ++i) xt[(n * is.plane() + i) * cp + c] = in[(n * is.c + c) * is.plane() + i];

  const std::ptrdiff_t filters = static_cast<std::ptrdiff_t>(w.d);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t d = 0; d < filters; ++d) {
    double bsum = 0.0;
    for (std::size_t n = 0; n < is.n; ++n) {
      const double* gplane = go + (n * w.d + d) * os.plane();
      for (std::size_t i = 0; i < os.plane(); ++i) bsum += gplane[i];
    }
    g.grad_bias[d] = bsum;
    for (std::size_t ky = 0; ky < w.kh; ++ky) {
      const TapRange ry = tap_range(is.h, os.h, ky, stride.y, pad.y);
      for (std::size_t kx = 0; kx < w.kw; ++kx) {
        const TapRange rx = tap_range(is.w, os.w, kx, stride.x, pad.x);
        auto store = [&](std::size_t cb, const double* acc, std::size_t width) {
          for (std::size_t j = 0; j < width && cb + j < is.c; ++j) {
            g.grad_weights[((d * w.c + cb + j) * w.kh + ky) * w.kw + kx] = acc[j];
          }
        };
        std::size_t cb = 0;
        for (; cb + 16 <= cp; cb += 16) {
          double acc[16];
          weight_grad_block(xt.data(), cp, go, is, os, d, ky, kx, cb, ry, rx, stride, pad, acc);
          store(cb, acc, 16);
        }
        for (; cb < cp; cb += 4) {
          double acc[4];
          weight_grad_block(xt.data(), cp, go, is, os, d, ky, kx, cb, ry, rx, stride, pad, acc);
          store(cb, acc, 4);
        }
      }
    }
  }

  // Input gradient is the transposed convolution: lanes run over input
  // channels, and each input pixel sums over d, then output positions
  // ascending (taps descending), matching the reference.
  const std::size_t cpl = round_up(is.c, kLanes);
  std::vector<double> wb(w.d * w.kh * w.kw * cpl, 0.0);
  for (std::size_t d = 0; d < w.d; ++d)
    for (std::size_t c = 0; c < is.c; ++c)
      for (std::size_t ky = 0; ky < w.kh; ++ky)
        for (std::size_t kx = 0; kx < w.kw; ++kx) wb[((d * w.kh + ky) * w.kw + kx) * cpl + c] = w.w(d, c, ky, kx);
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> ytaps(is.h), xtaps(is.w);
  for (std::size_t iy = 0; iy < is.h; ++iy) ytaps[iy] = taps_reaching(iy, w.kh, stride.y, pad.y, os.h);
  for (std::size_t ix = 0; ix < is.w; ++ix) xtaps[ix] = taps_reaching(ix, w.kw, stride.x, pad.x, os.w);
  // Input columns reached by every kx tap; the block path needs stride 1.
  TapRange inner{0, 0};
  if (stride.x == 1) {
    inner.lo = w.kw - 1 > pad.x ? w.kw - 1 - pad.x : 0;
    inner.hi = os.w > pad.x ? std::min(is.w, os.w - pad.x) : 0;
    if (inner.hi < inner.lo) inner.hi = inner.lo;
  }

  double* gi = g.grad_input.data().data();
  const std::ptrdiff_t batch = static_cast<std::ptrdiff_t>(is.n);
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(is.h);
#pragma omp parallel for collapse(2) schedule(static)
  for (std::ptrdiff_t n = 0; n < batch; ++n) {
    for (std::ptrdiff_t iy = 0; iy < rows; ++iy) {
      const auto& yt = ytaps[iy];
      for (std::size_t cb = 0; cb < is.c; cb += kLanes) {
        const std::size_t lanes = std::min(kLanes, is.c - cb);
        double* dst = gi + ((n * is.c + cb) * is.h + iy) * is.w;
        std::size_t ix = 0;
        while (ix < is.w) {
          if (ix >= inner.lo && ix + kPixels <= inner.hi) {
            v4d acc[kPixels][2] = {};
            for (std::size_t d = 0; d < w.d; ++d) {
              const double* gplane = go + (n * w.d + d) * os.plane();
              for (const auto& [ky, oy] : yt) {
                // Column of tap kw - 1 for pixel ix; tap kx is kw - 1 - kx further on.
                const double* grow = gplane + oy * os.w + ix + pad.x + 1 - w.kw;
                const double* wrow = wb.data() + (d * w.kh + ky) * w.kw * cpl + cb;
                for (std::size_t kx = w.kw; kx-- > 0;) {
                  const v4d w0 = load4(wrow + kx * cpl), w1 = load4(wrow + kx * cpl + 4);
                  for (std::size_t p = 0; p < kPixels; ++p) {
                    const v4d x = splat(grow[p + w.kw - 1 - kx]);
                    acc[p][0] += x * w0;
                    acc[p][1] += x * w1;
                  }
                }
              }
            }
            for (std::size_t j = 0; j < lanes; ++j)
              for (std::size_t p = 0; p < kPixels; ++p) dst[j * is.plane() + ix + p] = acc[p][j / 4][j % 4];
            ix += kPixels;
          } else {
            const auto& xs = xtaps[ix];
            v4d acc[2] = {};
            for (std::size_t d = 0; d < w.d; ++d) {
              const double* gplane = go + (n * w.d + d) * os.plane();
              for (const auto& [ky, oy] : yt) {
                const double* grow = gplane + oy * os.w;
                const double* wrow = wb.data() + (d * w.kh + ky) * w.kw * cpl + cb;
                for (const auto& [kx, ox] : xs) {
                  const v4d x = splat(grow[ox]);
                  acc[0] += x * load4(wrow + kx * cpl);
                  acc[1] += x * load4(wrow + kx * cpl + 4);
                }
              }
            }
            for (std::size_t j = 0; j < lanes; ++j) dst[j * is.plane() + ix] = acc[j / 4][j % 4];
            ++ix;
          }
        }
      }
    }
  }
  return g;
}

PoolResult maxpool_forward(const Tensor& input, std::size_t k, std::size_t stride) {
  const Shape& is = input.shape();
  if (k == 0 || stride == 0) throw ShapeError("maxpool: window and stride must be >= 1");
  if (is.h < k) throw ShapeError("maxpool: input height (h) smaller than window");
  if (is.w < k) throw ShapeError("maxpool: input width (w) smaller than window");
  checked_index(is.size());
  const Shape os{is.n, is.c, (is.h - k) / stride + 1, (is.w - k) / stride + 1};
  PoolResult r{Tensor(os), std::vector<std::uint32_t>(os.size())};
  const std::ptrdiff_t planes = static_cast<std::ptrdiff_t>(is.n * is.c);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < planes; ++p) {
    const std::size_t base = p * is.plane();
    for (std::size_t oy = 0; oy < os.h; ++oy) {
      for (std::size_t ox = 0; ox < os.w; ++ox) {
        std::size_t best = base + oy * stride * is.w + ox * stride;
        for (std::size_t y = 0; y < k; ++y) {
          for (std::size_t x = 0; x < k; ++x) {
            const std::size_t i = base + (oy * stride + y) * is.w + ox * stride + x;
            if (input[i] > input[best]) best = i;
          }
        }
        const std::size_t o = p * os.plane() + oy * os.w + ox;
        r.output[o] = input[best];
        r.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

Tensor maxpool_backward(const Shape& input_shape, std::span<const std::uint32_t> argmax,
                        const Tensor& grad_out) {
  if (argmax.size() != grad_out.size()) {
    throw ShapeError("maxpool_backward: argmax count does not match grad_out size");
  }
  Tensor g(input_shape);
  // Windows may overlap when stride < k, so accumulate serially.
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    if (argmax[i] >= g.size()) throw ShapeError("maxpool_backward: argmax out of range");
    g[argmax[i]] += grad_out[i];
  }
  return g;
}

PoolResult global_maxpool_forward(const Tensor& input) {
  const Shape& is = input.shape();
  if (is.plane() == 0) throw ShapeError("global_maxpool: empty spatial extent");
  checked_index(is.size());
  PoolResult r{Tensor({is.n, is.c, 1, 1}), std::vector<std::uint32_t>(is.n * is.c)};
  for (std::size_t p = 0; p < is.n * is.c; ++p) {
    std::size_t best = p * is.plane();
    for (std::size_t i = best + 1; i < (p + 1) * is.plane(); ++i) {
      if (input[i] > input[best]) best = i;
    }
    r.output[p] = input[best];
    r.argmax[p] = static_cast<std::uint32_t>(best);
  }
  return r;
}

Tensor relu_forward(const Tensor& input) {
  Tensor out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? input[i] : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
  if (input.shape() != grad_out.shape()) {
    throw ShapeError("relu_backward: grad_out shape " + to_string(grad_out.shape()) +
                     " does not match input " + to_string(input.shape()));
  }
  Tensor g(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) g[i] = input[i] > 0.0 ? grad_out[i] : 0.0;
  return g;
}

Tensor dense_forward(const Tensor& input, const DenseWeights& w) {
  const std::size_t batch = input.shape().n;
  const std::size_t k = input.shape().image();
  if (k != w.in) {
    throw ShapeError("dense: flattened input features (k) " + std::to_string(k) +
                     " do not match fan-in " + std::to_string(w.in));
  }
  Tensor out({batch, w.out, 1, 1});
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(batch);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t n = 0; n < rows; ++n) {
    double* y = out.data().data() + n * w.out;
    std::copy(w.bias.begin(), w.bias.end(), y);
    const double* x = input.data().data() + n * k;
    for (std::size_t i = 0; i < k; ++i) {
      const double xv = x[i];
      const double* wrow = w.weights.data() + i * w.out;
      for (std::size_t j = 0; j < w.out; ++j) y[j] += xv * wrow[j];
    }
  }
  return out;
}

GradBundle dense_backward(const Tensor& input, const DenseWeights& w, const Tensor& grad_out) {
  const std::size_t batch = input.shape().n;
  const std::size_t k = input.shape().image();
  if (k != w.in) throw ShapeError("dense_backward: input features (k) do not match fan-in");
  if (grad_out.shape().n != batch || grad_out.shape().image() != w.out) {
    throw ShapeError("dense_backward: grad_out shape " + to_string(grad_out.shape()) +
                     " does not match output (n, " + std::to_string(w.out) + ")");
  }
  GradBundle g{Tensor(input.shape()), std::vector<double>(w.weights.size(), 0.0),
               std::vector<double>(w.out, 0.0)};
  const double* x = input.data().data();
  const double* go = grad_out.data().data();
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(batch);
  const std::ptrdiff_t fan_in = static_cast<std::ptrdiff_t>(k);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t n = 0; n < rows; ++n) {
    const double* gy = go + n * w.out;
    double* gx = g.grad_input.data().data() + n * k;
    for (std::size_t i = 0; i < k; ++i) {
      const double* wrow = w.weights.data() + i * w.out;
      double acc = 0.0;
      for (std::size_t j = 0; j < w.out; ++j) acc += wrow[j] * gy[j];
      gx[i] = acc;
    }
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < fan_in; ++i) {
    double* gw = g.grad_weights.data() + i * w.out;
    for (std::size_t n = 0; n < batch; ++n) {
      const double xv = x[n * k + i];
      const double* gy = go + n * w.out;
      for (std::size_t j = 0; j < w.out; ++j) gw[j] += xv * gy[j];
    }
  }
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t j = 0; j < w.out; ++j) g.grad_bias[j] += go[n * w.out + j];
  }
  return g;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (auto& v : p) v /= z;
  return p;
}

LossResult softmax_xent(const Tensor& logits, std::span<const std::uint8_t> labels) {
  const std::size_t batch = logits.shape().n;
  const std::size_t classes = logits.shape().image();
  if (labels.size() != batch) {
    throw ShapeError("softmax_xent: " + std::to_string(labels.size()) + " labels for batch (n) " +
                     std::to_string(batch));
  }
  if (batch == 0) throw ShapeError("softmax_xent: empty batch");
  LossResult r{0.0, Tensor(logits.shape())};
  const double inv_n = 1.0 / static_cast<double>(batch);
  for (std::size_t n = 0; n < batch; ++n) {
    if (labels[n] >= classes) {
      throw ShapeError("softmax_xent: label " + std::to_string(labels[n]) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
    std::span<const double> row = logits.data().subspan(n * classes, classes);
    const double m = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - m);
    const double log_z = std::log(z);
    r.loss += -(row[labels[n]] - m - log_z);
    for (std::size_t k = 0; k < classes; ++k) {
      const double p = std::exp(row[k] - m - log_z);
      r.grad_logits[n * classes + k] = (p - (k == labels[n] ? 1.0 : 0.0)) * inv_n;
    }
  }
  r.loss *= inv_n;
  return r;
}

}  // namespace lrcnn
