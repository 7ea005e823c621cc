#include "lrcnn/augment.hpp"

#include <stdexcept>

namespace lrcnn {

AugmentDraw draw_augment(const AugmentOptions& options, Rng& rng) {
  AugmentDraw d{options.pad, options.pad, false};
  if (options.crop) {
    d.offset_y = rng.below(2 * options.pad + 1);
    d.offset_x = rng.below(2 * options.pad + 1);
  }
  if (options.mirror) d.mirror = rng.bernoulli(0.5);
  return d;
}

void crop_and_mirror(std::span<const float> image, const InputShape& shape, std::size_t pad,
                     const AugmentDraw& draw, std::span<double> out) {
  const std::size_t h = shape.h, w = shape.w;
  if (image.size() != shape.c * h * w || out.size() != image.size()) {
    throw std::invalid_argument("crop_and_mirror: buffer size does not match shape");
  }
  if (draw.offset_y > 2 * pad || draw.offset_x > 2 * pad) {
    throw std::invalid_argument("crop_and_mirror: offset outside the padded image");
  }
  for (std::size_t c = 0; c < shape.c; ++c) {
    const float* src = image.data() + c * h * w;
    double* dst = out.data() + c * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      // Row y of the crop is padded row y + offset_y, i.e. source row y + offset_y - pad.
      const std::size_t py = y + draw.offset_y;
      const bool row_in = py >= pad && py - pad < h;
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t cx = draw.mirror ? w - 1 - x : x;
        const std::size_t px = cx + draw.offset_x;
        const bool in = row_in && px >= pad && px - pad < w;
        dst[y * w + x] = in ? static_cast<double>(src[(py - pad) * w + (px - pad)]) : 0.0;
      }
    }
  }
}

std::vector<double> augment(std::span<const float> image, const InputShape& shape,
                            const AugmentOptions& options, Rng& rng) {
  std::vector<double> out(image.size());
  crop_and_mirror(image, shape, options.pad, draw_augment(options, rng), out);
  return out;
}

}  // namespace lrcnn
