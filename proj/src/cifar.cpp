#include "lrcnn/cifar.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

namespace lrcnn {

Dataset Dataset::head(std::size_t count) const {
  count = std::min(count, size());
  Dataset out;
  out.shape = shape;
  out.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(count));
  out.pixels.assign(pixels.begin(), pixels.begin() + static_cast<std::ptrdiff_t>(count * image_size()));
  return out;
}

CifarError::CifarError(const std::string& file, std::uint64_t offset, const std::string& what)
    : std::runtime_error(file + ": byte offset " + std::to_string(offset) + ": " + what),
      offset_(offset) {}

Dataset parse_cifar10(std::span<const std::uint8_t> bytes, const std::string& source) {
  Dataset d;
  const std::size_t pixels = kCifarRecordBytes - 1;
  const std::size_t records = bytes.size() / kCifarRecordBytes;
  if (bytes.size() % kCifarRecordBytes != 0) {
    const std::uint64_t offset = records * kCifarRecordBytes;
    throw CifarError(source, offset,
                     "truncated record " + std::to_string(records) + " (" +
                         std::to_string(bytes.size() - offset) + " of " +
                         std::to_string(kCifarRecordBytes) + " bytes)");
  }
  d.labels.resize(records);
  d.pixels.resize(records * pixels);
  for (std::size_t r = 0; r < records; ++r) {
    const std::uint8_t* rec = bytes.data() + r * kCifarRecordBytes;
    if (rec[0] >= kCifarClasses) {
      throw CifarError(source, r * kCifarRecordBytes,
                       "record " + std::to_string(r) + " has label " + std::to_string(rec[0]) +
                           " outside [0, 10)");
    }
    d.labels[r] = rec[0];
    float* dst = d.pixels.data() + r * pixels;
    for (std::size_t i = 0; i < pixels; ++i) dst[i] = static_cast<float>(rec[1 + i]) / 255.0f;
  }
  return d;
}

Dataset load_cifar10_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CifarError(path, 0, "cannot open file");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_cifar10(bytes, path);
}

namespace {

void append(Dataset& dst, Dataset&& src) {
  dst.labels.insert(dst.labels.end(), src.labels.begin(), src.labels.end());
  dst.pixels.insert(dst.pixels.end(), src.pixels.begin(), src.pixels.end());
}

}  // namespace

CifarSplit load_cifar10(const std::string& dir) {
  CifarSplit s;
  for (int i = 1; i <= 5; ++i) {
    append(s.train, load_cifar10_file(dir + "/data_batch_" + std::to_string(i) + ".bin"));
  }
  s.test = load_cifar10_file(dir + "/test_batch.bin");
  return s;
}

std::vector<std::uint8_t> encode_cifar10(const Dataset& data) {
  std::vector<std::uint8_t> bytes(data.size() * kCifarRecordBytes);
  for (std::size_t r = 0; r < data.size(); ++r) {
    std::uint8_t* rec = bytes.data() + r * kCifarRecordBytes;
    rec[0] = data.labels[r];
    const auto img = data.image(r);
    for (std::size_t i = 0; i < img.size(); ++i) {
      rec[1 + i] = static_cast<std::uint8_t>(std::lround(std::clamp(img[i], 0.0f, 1.0f) * 255.0f));
    }
  }
  return bytes;
}

void write_cifar10_file(const std::string& path, const Dataset& data) {
  const auto bytes = encode_cifar10(data);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace lrcnn
