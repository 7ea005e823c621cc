#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lrcnn/arch.hpp"
#include "lrcnn/rng.hpp"

namespace lrcnn {

/// Weights of one layer. Conv layers use `conv.groups[0]`; composite layers use
/// all of `conv`; dense layers use `dense`; everything else is empty.
struct LayerParams {
  CompositeParams conv;
  DenseWeights dense;
  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct ModelParams {
  std::vector<LayerParams> layers;
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Tags for the individual tensors of a layer; the checkpoint format stores them.
enum class ParamRole : std::uint8_t {
  kConvWeights = 0,
  kConvBias = 1,
  kGroupWeights = 2,
  kGroupBias = 3,
  kJoinWeights = 4,
  kJoinBias = 5,
  kDenseWeights = 6,
  kDenseBias = 7,
};

inline bool is_bias(ParamRole r) {
  return r == ParamRole::kConvBias || r == ParamRole::kGroupBias || r == ParamRole::kJoinBias ||
         r == ParamRole::kDenseBias;
}

template <class T>
struct BasicParamRef {
  std::size_t layer = 0;
  ParamRole role{};
  std::size_t group = 0;
  std::vector<std::size_t> dims;
  std::span<T> values;
};
using ParamRef = BasicParamRef<double>;
using ConstParamRef = BasicParamRef<const double>;

/// Zero-valued parameters shaped for `arch` (validated first).
ModelParams make_params(const ArchSpec& arch);

/// Every parameter tensor in a fixed order: layer, then group, weights before bias, join last.
std::vector<ParamRef> param_refs(const ArchSpec& arch, ModelParams& params);
std::vector<ConstParamRef> param_refs(const ArchSpec& arch, const ModelParams& params);
std::size_t parameter_count(const ArchSpec& arch, const ModelParams& params);

struct ForwardOptions {
  bool training = false;
  Rng* dropout_rng = nullptr;  // required when training with dropout layers
};

/// Intermediate values kept for backward.
struct ForwardTrace {
  std::vector<Tensor> inputs;                       // input to each layer
  std::vector<Tensor> basis;                        // pre-join maps for composite joins
  std::vector<std::vector<std::uint32_t>> argmax;   // pooling layers
  std::vector<Tensor> dropout_scale;                // dropout layers in training
  Tensor output;
};

ForwardTrace forward(const ArchSpec& arch, const ModelParams& params, const Tensor& input,
                     const ForwardOptions& options = {});

/// Forward pass without keeping intermediates.
Tensor predict(const ArchSpec& arch, const ModelParams& params, const Tensor& input);

struct BackwardResult {
  ModelParams grads;
  Tensor grad_input;
  std::vector<Tensor> layer_input_grads;  // filled only when requested
};

BackwardResult backward(const ArchSpec& arch, const ModelParams& params, const ForwardTrace& trace,
                        const Tensor& grad_output, bool keep_layer_grads = false);

}  // namespace lrcnn
