#pragma once

#include <span>
#include <vector>

#include "lrcnn/arch.hpp"
#include "lrcnn/rng.hpp"

namespace lrcnn {

struct AugmentOptions {
  bool crop = true;
  bool mirror = true;
  std::size_t pad = 4;
  friend bool operator==(const AugmentOptions&, const AugmentOptions&) = default;
};

/// Crop window offset into the zero-padded image plus the mirror flag.
struct AugmentDraw {
  std::size_t offset_y = 0;
  std::size_t offset_x = 0;
  bool mirror = false;
};

/// Draws offset_y, offset_x (each uniform on [0, 2*pad]) and then the mirror
/// flag (p = 0.5), skipping draws for disabled steps. A disabled crop takes
/// the centered window, which is the unpadded image.
AugmentDraw draw_augment(const AugmentOptions& options, Rng& rng);

/// Zero-pads `image` (c, h, w) by `pad`, takes the h x w window at the given
/// offsets and optionally reverses columns.
void crop_and_mirror(std::span<const float> image, const InputShape& shape, std::size_t pad,
                     const AugmentDraw& draw, std::span<double> out);

std::vector<double> augment(std::span<const float> image, const InputShape& shape,
                            const AugmentOptions& options, Rng& rng);

}  // namespace lrcnn
