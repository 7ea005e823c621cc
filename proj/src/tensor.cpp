#include "lrcnn/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>

namespace lrcnn {

std::string to_string(const Shape& s) {
  return std::to_string(s.n) + "x" + std::to_string(s.c) + "x" + std::to_string(s.h) + "x" +
         std::to_string(s.w);
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.size(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + to_string(shape_));
  }
}

Tensor Tensor::reshaped(Shape s) const {
  if (s.size() != size()) {
    throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(s));
  }
  return Tensor(s, data_);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor concat_channels(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no parts");
  const Shape& first = parts.front().shape();
  std::size_t channels = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.n != first.n) throw ShapeError("concat_channels: batch (n) mismatch");
    if (s.h != first.h) throw ShapeError("concat_channels: height (h) mismatch");
    if (s.w != first.w) throw ShapeError("concat_channels: width (w) mismatch");
    channels += s.c;
  }
  Tensor out({first.n, channels, first.h, first.w});
  const std::size_t plane = first.plane();
  double* dst = out.data().data();
  for (std::size_t n = 0; n < first.n; ++n) {
    for (const auto& p : parts) {
      const std::size_t len = p.shape().c * plane;
      std::copy_n(p.data().data() + n * len, len, dst);
      dst += len;
    }
  }
  return out;
}

std::vector<Tensor> split_channels(const Tensor& t, std::span<const std::size_t> sizes) {
  const Shape& s = t.shape();
  std::size_t total = 0;
  for (auto c : sizes) total += c;
  if (total != s.c) {
    throw ShapeError("split_channels: sizes sum to " + std::to_string(total) +
                     " but tensor has " + std::to_string(s.c) + " channels (c)");
  }
  std::vector<Tensor> out;
  out.reserve(sizes.size());
  for (auto c : sizes) out.emplace_back(Shape{s.n, c, s.h, s.w});
  const double* src = t.data().data();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      const std::size_t len = sizes[i] * s.plane();
      std::copy_n(src, len, out[i].data().data() + n * len);
      src += len;
    }
  }
  return out;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

}  // namespace lrcnn
