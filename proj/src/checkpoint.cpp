#include "lrcnn/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "lrcnn/arch.hpp"

namespace lrcnn {

namespace {

class Writer {
 public:
  template <class T>
  void put(T v) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                    std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
    U u = std::bit_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes_.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void finish() { put(crc(bytes_)); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

  static std::uint32_t crc(std::span<const std::uint8_t> b) {
    uLong c = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks.
    for (std::size_t off = 0; off < b.size(); off += 1u << 30) {
      const std::size_t n = std::min<std::size_t>(b.size() - off, 1u << 30);
      c = crc32(c, b.data() + off, static_cast<uInt>(n));
    }
    return static_cast<std::uint32_t>(c);
  }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> b, const char* what) : b_(b), what_(what) {}

  template <class T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                    std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
    need(sizeof(U));
    U u = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) u |= static_cast<U>(static_cast<U>(b_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return std::bit_cast<T>(u);
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return b_.size() - pos_; }
  [[noreturn]] void fail(const std::string& msg) const {
    throw CheckpointError(std::string(what_) + ": " + msg + " at byte offset " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) fail("truncated data");
  }
  std::span<const std::uint8_t> b_;
  const char* what_;
  std::size_t pos_ = 0;
};

// Checks magic, version and trailing CRC; returns a reader over the body.
Reader open_framed(std::span<const std::uint8_t> bytes, const char* magic, const char* what) {
  if (bytes.size() < 4 + 2 + 4) throw CheckpointError(std::string(what) + ": file too short");
  if (std::memcmp(bytes.data(), magic, 4) != 0) {
    throw CheckpointError(std::string(what) + ": bad magic (expected '" + magic + "')");
  }
  const auto body = bytes.first(bytes.size() - 4);
  Reader tail(bytes.subspan(bytes.size() - 4), what);
  if (tail.get<std::uint32_t>() != Writer::crc(body)) throw CheckpointError(std::string(what) + ": CRC mismatch");
  Reader r(body, what);
  r.raw(4);
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError(std::string(what) + ": unsupported version " + std::to_string(version));
  }
  return r;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ArchSpec& arch, const ModelParams& params) {
  const auto refs = param_refs(arch, params);
  Writer w;
  w.raw("LRCF");
  w.put(kCheckpointVersion);
  const std::string text = save_arch_text(arch);
  w.put(static_cast<std::uint32_t>(text.size()));
  w.raw(text);
  w.put(static_cast<std::uint32_t>(refs.size()));
  for (const auto& r : refs) {
    w.put(static_cast<std::uint32_t>(r.layer));
    w.put(static_cast<std::uint8_t>(r.role));
    w.put(static_cast<std::uint32_t>(r.group));
    w.put(static_cast<std::uint8_t>(r.dims.size()));
    for (const auto d : r.dims) w.put(static_cast<std::uint64_t>(d));
    for (const double v : r.values) w.put(v);
  }
  w.finish();
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r = open_framed(bytes, "LRCF", "checkpoint");
  Checkpoint ck;
  const auto text_len = r.get<std::uint32_t>();
  try {
    ck.arch = load_arch_text(r.raw(text_len));
  } catch (const std::exception& e) {
    r.fail(std::string("invalid architecture (") + e.what() + ")");
  }
  ck.params = make_params(ck.arch);
  const auto refs = param_refs(ck.arch, ck.params);
  const auto count = r.get<std::uint32_t>();
  if (count != refs.size()) {
    r.fail("expected " + std::to_string(refs.size()) + " parameter blocks, found " + std::to_string(count));
  }
  for (const auto& ref : refs) {
    const auto layer = r.get<std::uint32_t>();
    const auto role = r.get<std::uint8_t>();
    const auto group = r.get<std::uint32_t>();
    const auto rank = r.get<std::uint8_t>();
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) d = static_cast<std::size_t>(r.get<std::uint64_t>());
    if (layer != ref.layer || role != static_cast<std::uint8_t>(ref.role) || group != ref.group ||
        dims != ref.dims) {
      r.fail("parameter block does not match layer " + std::to_string(ref.layer) + " of the architecture");
    }
    for (double& v : ref.values) v = r.get<double>();
  }
  if (r.remaining() != 0) r.fail("trailing bytes");
  return ck;
}

std::vector<std::uint8_t> read_binary_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_binary_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

void save_checkpoint(const ArchSpec& arch, const ModelParams& params, const std::string& path) {
  write_binary_file(path, encode_checkpoint(arch, params));
}

Checkpoint load_checkpoint(const std::string& path) {
  try {
    return decode_checkpoint(read_binary_file(path));
  } catch (const CheckpointError& e) {
    throw CheckpointError(path + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_zca(const ZcaTransform& t) {
  Writer w;
  w.raw("LRCZ");
  w.put(kCheckpointVersion);
  w.put(static_cast<std::uint64_t>(t.dim));
  w.put(t.epsilon);
  for (const auto* v : {&t.mean, &t.whiten, &t.unwhiten}) {
    for (const double x : *v) w.put(x);
  }
  w.finish();
  return w.take();
}

ZcaTransform decode_zca(std::span<const std::uint8_t> bytes) {
  Reader r = open_framed(bytes, "LRCZ", "zca");
  ZcaTransform t;
  t.dim = static_cast<std::size_t>(r.get<std::uint64_t>());
  t.epsilon = r.get<double>();
  if (r.remaining() != (t.dim + 2 * t.dim * t.dim) * 8) r.fail("size does not match dimension");
  t.mean.resize(t.dim);
  t.whiten.resize(t.dim * t.dim);
  t.unwhiten.resize(t.dim * t.dim);
  for (auto* v : {&t.mean, &t.whiten, &t.unwhiten}) {
    for (double& x : *v) x = r.get<double>();
  }
  return t;
}

void save_zca(const ZcaTransform& t, const std::string& path) { write_binary_file(path, encode_zca(t)); }

ZcaTransform load_zca(const std::string& path) {
  try {
    return decode_zca(read_binary_file(path));
  } catch (const CheckpointError& e) {
    throw CheckpointError(path + ": " + e.what());
  }
}

}  // namespace lrcnn
