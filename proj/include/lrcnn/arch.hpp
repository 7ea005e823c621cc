#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "lrcnn/composite.hpp"

namespace lrcnn {

struct ConvLayer {
  std::size_t d = 1;
  std::size_t kh = 3;
  std::size_t kw = 3;
  Stride2 stride{};
  Pad2 pad{};  // zoo layers use same_padding(kh, kw)
  friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

struct CompositeLayer {
  CompositeConvSpec spec;
  friend bool operator==(const CompositeLayer&, const CompositeLayer&) = default;
};

struct MaxPoolLayer {
  std::size_t k = 2;
  std::size_t stride = 2;
  friend bool operator==(const MaxPoolLayer&, const MaxPoolLayer&) = default;
};

struct GlobalMaxPoolLayer {
  friend bool operator==(const GlobalMaxPoolLayer&, const GlobalMaxPoolLayer&) = default;
};

struct ReluLayer {
  friend bool operator==(const ReluLayer&, const ReluLayer&) = default;
};

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Inverted dropout; identity at evaluation time.
struct DropoutLayer {
  double rate = 0.5;
  friend bool operator==(const DropoutLayer&, const DropoutLayer&) = default;
};

/// Marks the classifier head; the loss applies softmax itself.
struct SoftmaxLayer {
  friend bool operator==(const SoftmaxLayer&, const SoftmaxLayer&) = default;
};

using LayerKind = std::variant<ConvLayer, CompositeLayer, MaxPoolLayer, GlobalMaxPoolLayer,
                               ReluLayer, DenseLayer, DropoutLayer, SoftmaxLayer>;

struct LayerSpec {
  std::string name;
  LayerKind kind;
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct InputShape {
  std::size_t c = 3;
  std::size_t h = 32;
  std::size_t w = 32;
  friend bool operator==(const InputShape&, const InputShape&) = default;
};

struct ArchSpec {
  std::string name;
  InputShape input;
  std::vector<LayerSpec> layers;
  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

/// Validation failure carrying every problem found.
class ArchError : public std::invalid_argument {
 public:
  explicit ArchError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Empty when the spec chains correctly from its declared input.
std::vector<std::string> validate(const ArchSpec& arch);
void validate_or_throw(const ArchSpec& arch);

/// Per-image (n = 1) output shape of every layer. Throws ArchError.
std::vector<Shape> infer_shapes(const ArchSpec& arch);

bool has_weights(const LayerSpec& layer);
std::string kind_name(const LayerKind& kind);

/// "CxHxW" with lowercase x.
InputShape parse_input_shape(const std::string& text);
std::string format_input_shape(const InputShape& s);

/// Text form: `name = ...`, `input = CxHxW`, then one `layer = ...` line per
/// layer. Kernel sizes are written rows x cols, so a horizontal filter is 1x3.
///
///   layer = conv 64 3x3 stride=1x1 pad=1x1 name=conv1
///   layer = composite 3x1:32,1x3:32 stride=1x1 join=64 name=conv1
///   layer = maxpool 2 stride=2
///   layer = gmp | relu | softmax
///   layer = dense 512 4096
///   layer = dropout 0.5
std::string save_arch_text(const ArchSpec& arch);
ArchSpec load_arch_text(const std::string& text);
std::string format_layer(const LayerSpec& layer);
LayerSpec parse_layer(const std::string& text);

}  // namespace lrcnn
