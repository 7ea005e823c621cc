#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lrcnn/network.hpp"
#include "lrcnn/zca.hpp"

namespace lrcnn {

/// Little-endian layout:
///   "LRCF"  u16 version
///   u32 length, architecture text (save_arch_text)
///   u32 block count, then per block:
///     u32 layer, u8 role (ParamRole), u32 group, u8 rank, u64 dims[rank], f64 values[prod(dims)]
///   u32 CRC-32 (zlib polynomial) of every preceding byte
inline constexpr std::uint16_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  ArchSpec arch;
  ModelParams params;
};

std::vector<std::uint8_t> encode_checkpoint(const ArchSpec& arch, const ModelParams& params);
/// Validates everything before returning; nothing is produced on error.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const ArchSpec& arch, const ModelParams& params, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Whitening statistics written next to a checkpoint ("LRCZ", same framing:
/// u16 version, u64 dim, f64 epsilon, mean, whiten, unwhiten, CRC-32).
std::vector<std::uint8_t> encode_zca(const ZcaTransform& t);
ZcaTransform decode_zca(std::span<const std::uint8_t> bytes);
void save_zca(const ZcaTransform& t, const std::string& path);
ZcaTransform load_zca(const std::string& path);

std::vector<std::uint8_t> read_binary_file(const std::string& path);
void write_binary_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace lrcnn
