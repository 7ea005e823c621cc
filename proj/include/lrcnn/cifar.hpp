#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lrcnn/arch.hpp"

namespace lrcnn {

/// Images stored channel-major (c, h, w) per sample, as floats to keep a full
/// CIFAR-10 training set near 600 MB.
struct Dataset {
  InputShape shape{3, 32, 32};
  std::vector<float> pixels;
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t image_size() const { return shape.c * shape.h * shape.w; }
  std::span<const float> image(std::size_t i) const {
    return std::span<const float>(pixels).subspan(i * image_size(), image_size());
  }
  std::span<float> image(std::size_t i) {
    return std::span<float>(pixels).subspan(i * image_size(), image_size());
  }
  /// First `count` samples.
  Dataset head(std::size_t count) const;
};

class CifarError : public std::runtime_error {
 public:
  CifarError(const std::string& file, std::uint64_t offset, const std::string& what);
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

inline constexpr std::size_t kCifarRecordBytes = 3073;
inline constexpr std::size_t kCifarClasses = 10;

/// One binary batch: records of 1 label byte + 3072 channel-major pixel bytes.
/// Pixels are scaled to [0, 1].
Dataset load_cifar10_file(const std::string& path);
Dataset parse_cifar10(std::span<const std::uint8_t> bytes, const std::string& source);

struct CifarSplit {
  Dataset train;
  Dataset test;
};

/// data_batch_1.bin .. data_batch_5.bin and test_batch.bin under `dir`.
CifarSplit load_cifar10(const std::string& dir);

/// Inverse of the loader (pixels rounded back to bytes).
std::vector<std::uint8_t> encode_cifar10(const Dataset& data);
void write_cifar10_file(const std::string& path, const Dataset& data);

}  // namespace lrcnn
