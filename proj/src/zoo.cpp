#include "lrcnn/zoo.hpp"

#include <algorithm>
#include <stdexcept>

namespace lrcnn {

namespace {

enum class Variant { kVgg11, kGmp, kSeparable, kLowRank, kLowRank2x, kJoin, kEmbed, kJoinFull };

struct NamedVariant {
  const char* name;
  Variant variant;
};

constexpr NamedVariant kVgg[] = {
    {"vgg11", Variant::kVgg11},
    {"vgg-gmp", Variant::kGmp},
    {"vgg-gmp-sf", Variant::kSeparable},
    {"vgg-gmp-lr", Variant::kLowRank},
    {"vgg-gmp-lr-2x", Variant::kLowRank2x},
    {"vgg-gmp-lr-join", Variant::kJoin},
    {"vgg-gmp-lr-lde", Variant::kEmbed},
    {"vgg-gmp-lr-join-wfull", Variant::kJoinFull},
};

LayerSpec conv(std::string name, std::size_t d, std::size_t kh, std::size_t kw,
               std::size_t stride = 1) {
  return {std::move(name), ConvLayer{d, kh, kw, {stride, stride}, same_padding(kh, kw)}};
}

LayerSpec composite(std::string name, std::vector<FilterGroup> groups, std::size_t stride = 1) {
  CompositeConvSpec spec;
  spec.groups = std::move(groups);
  spec.stride = {stride, stride};
  return {std::move(name), CompositeLayer{spec}};
}

// FilterGroup is {kw, kh, d}.
FilterGroup vertical(std::size_t d) { return {1, 3, d, std::nullopt}; }    // 3x1
FilterGroup horizontal(std::size_t d) { return {3, 1, d, std::nullopt}; }  // 1x3
FilterGroup square(std::size_t d) { return {3, 3, d, std::nullopt}; }

// One row of the conv table: the layers that replace a single 3x3, d-filter
// conv. Returns the channel count it leaves behind.
std::size_t add_conv_row(std::vector<LayerSpec>& layers, Variant v, const std::string& name,
                         std::size_t d, std::size_t stride) {
  switch (v) {
    case Variant::kVgg11:
    case Variant::kGmp:
      layers.push_back(conv(name, d, 3, 3, stride));
      return d;
    case Variant::kSeparable:
      layers.push_back(conv(name + "-h", d, 1, 3, stride));
      layers.push_back(conv(name + "-v", d, 3, 1));
      return d;
    case Variant::kLowRank:
      layers.push_back(composite(name, {vertical(d / 2), horizontal(d / 2)}, stride));
      return d;
    case Variant::kLowRank2x:
      layers.push_back(composite(name, {vertical(d), horizontal(d)}, stride));
      return 2 * d;
    case Variant::kJoin:
      layers.push_back(composite(name, {vertical(d / 2), horizontal(d / 2)}, stride));
      layers.push_back(conv(name + "-join", d, 1, 1));
      return d;
    case Variant::kEmbed:
      layers.push_back(composite(name, {vertical(d / 2), horizontal(d / 2)}, stride));
      layers.push_back(conv(name + "-embed", d / 2, 1, 1));
      return d / 2;
    case Variant::kJoinFull:
      layers.push_back(
          composite(name, {vertical(3 * d / 8), horizontal(3 * d / 8), square(d / 4)}, stride));
      layers.push_back(conv(name + "-join", d, 1, 1));
      return d;
  }
  throw std::logic_error("unhandled variant");
}

ArchSpec build_vgg(const std::string& name, Variant v, const BuildOptions& options) {
  struct Row {
    const char* name;
    std::size_t d;
    bool pool_after;
  };
  constexpr Row rows[] = {
      {"conv1", 64, true},   {"conv2", 128, true},  {"conv3a", 256, false}, {"conv3b", 256, true},
      {"conv4a", 512, false}, {"conv4b", 512, true}, {"conv5a", 512, false}, {"conv5b", 512, false},
  };
  ArchSpec arch;
  arch.name = name;
  arch.input = {3, 224, 224};
  std::size_t channels = 3;
  std::size_t spatial = 224;
  int pool_index = 1;
  for (std::size_t r = 0; r < std::size(rows); ++r) {
    const std::size_t stride = (v == Variant::kEmbed && r == 0) ? 2 : 1;
    channels = add_conv_row(arch.layers, v, rows[r].name, rows[r].d, stride);
    spatial = (spatial + stride - 1) / stride;
    const std::string suffix = std::string(rows[r].name).substr(4);
    arch.layers.push_back({"relu" + suffix, ReluLayer{}});
    if (rows[r].pool_after) {
      arch.layers.push_back({"pool" + std::to_string(pool_index++), MaxPoolLayer{2, 2}});
      spatial /= 2;
    }
  }
  std::size_t fc_in = channels;
  if (v == Variant::kVgg11) {
    arch.layers.push_back({"pool5", MaxPoolLayer{2, 2}});
    spatial /= 2;
    fc_in = channels * spatial * spatial;
  } else {
    arch.layers.push_back({"gmp", GlobalMaxPoolLayer{}});
  }
  arch.layers.push_back({"fc6", DenseLayer{fc_in, 4096}});
  arch.layers.push_back({"relu6", ReluLayer{}});
  if (options.fc_dropout > 0.0) arch.layers.push_back({"drop6", DropoutLayer{options.fc_dropout}});
  arch.layers.push_back({"fc7", DenseLayer{4096, 4096}});
  arch.layers.push_back({"relu7", ReluLayer{}});
  if (options.fc_dropout > 0.0) arch.layers.push_back({"drop7", DropoutLayer{options.fc_dropout}});
  arch.layers.push_back({"fc8", DenseLayer{4096, 1000}});
  arch.layers.push_back({"prob", SoftmaxLayer{}});
  validate_or_throw(arch);
  return arch;
}

std::string available() {
  std::string s;
  for (const auto& n : model_names()) s += (s.empty() ? "" : ", ") + n;
  return s;
}

}  // namespace

ArchSpec build(const std::string& name, const BuildOptions& options) {
  const std::string canonical = name == "vgg-11" ? "vgg11" : name;
  for (const auto& nv : kVgg) {
    if (canonical == nv.name) return build_vgg(canonical, nv.variant, options);
  }
  throw std::invalid_argument("unknown model '" + name + "'; available: " + available());
}

ArchSpec build_desk(const std::string& name) {
  constexpr std::size_t widths[] = {32, 64, 128};
  const bool low_rank = name == "desk-lr";
  if (!low_rank && name != "desk-full") {
    throw std::invalid_argument("unknown model '" + name + "'; available: " + available());
  }
  ArchSpec arch;
  arch.name = name;
  arch.input = {3, 32, 32};
  for (std::size_t b = 0; b < std::size(widths); ++b) {
    const std::string id = std::to_string(b + 1);
    const std::size_t d = widths[b];
    if (low_rank) {
      arch.layers.push_back(composite("conv" + id, {vertical(d / 2), horizontal(d / 2)}));
    } else {
      arch.layers.push_back(conv("conv" + id, d, 3, 3));
    }
    arch.layers.push_back({"relu" + id, ReluLayer{}});
    if (b + 1 < std::size(widths)) arch.layers.push_back({"pool" + id, MaxPoolLayer{2, 2}});
  }
  arch.layers.push_back({"gmp", GlobalMaxPoolLayer{}});
  arch.layers.push_back({"fc", DenseLayer{widths[std::size(widths) - 1], 10}});
  arch.layers.push_back({"prob", SoftmaxLayer{}});
  validate_or_throw(arch);
  return arch;
}

ArchSpec build_any(const std::string& name) {
  const auto desk = desk_model_names();
  if (std::find(desk.begin(), desk.end(), name) != desk.end()) return build_desk(name);
  return build(name);
}

std::vector<std::string> vgg_model_names() {
  std::vector<std::string> out;
  for (const auto& nv : kVgg) out.emplace_back(nv.name);
  return out;
}

std::vector<std::string> desk_model_names() { return {"desk-full", "desk-lr"}; }

std::vector<std::string> model_names() {
  auto out = vgg_model_names();
  for (auto& n : desk_model_names()) out.push_back(std::move(n));
  std::sort(out.begin(), out.end());
  return out;
}

std::pair<std::size_t, std::size_t> receptive_field(const ArchSpec& arch, std::size_t upto) {
  if (upto >= arch.layers.size()) throw std::out_of_range("receptive_field: layer index");
  std::size_t ry = 1, rx = 1, jy = 1, jx = 1;
  for (std::size_t i = 0; i <= upto; ++i) {
    const LayerKind& k = arch.layers[i].kind;
    std::size_t kh = 1, kw = 1, sy = 1, sx = 1;
    if (const auto* c = std::get_if<ConvLayer>(&k)) {
      kh = c->kh;
      kw = c->kw;
      sy = c->stride.y;
      sx = c->stride.x;
    } else if (const auto* c = std::get_if<CompositeLayer>(&k)) {
      for (const auto& g : c->spec.groups) {
        kh = std::max(kh, g.kh);
        kw = std::max(kw, g.kw);
      }
      sy = c->spec.stride.y;
      sx = c->spec.stride.x;
    } else if (const auto* p = std::get_if<MaxPoolLayer>(&k)) {
      kh = kw = p->k;
      sy = sx = p->stride;
    } else if (std::holds_alternative<GlobalMaxPoolLayer>(k) ||
               std::holds_alternative<DenseLayer>(k)) {
      return {arch.input.h, arch.input.w};
    }
    ry += (kh - 1) * jy;
    rx += (kw - 1) * jx;
    jy *= sy;
    jx *= sx;
  }
  return {ry, rx};
}

}  // namespace lrcnn
