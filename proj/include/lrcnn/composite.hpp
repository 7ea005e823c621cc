#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lrcnn/ops.hpp"

namespace lrcnn {

/// One homogeneous set of `d` filters of kh rows by kw columns.
struct FilterGroup {
  std::size_t kw = 1;
  std::size_t kh = 1;
  std::size_t d = 1;
  // Only for describing malformed specs: a group stride that differs from the
  // layer stride is rejected by validation.
  std::optional<Stride2> stride;
  friend bool operator==(const FilterGroup&, const FilterGroup&) = default;
};

/// A convolutional layer whose filter bank is split into differently shaped
/// groups. Group outputs are concatenated in spec order; `join`, when set, is
/// the output channel count of a 1x1 convolution applied to the concatenation
/// with no nonlinearity in between.
struct CompositeConvSpec {
  std::vector<FilterGroup> groups;
  Stride2 stride{};
  std::optional<std::size_t> join;

  std::size_t basis_channels() const;
  std::size_t output_channels() const { return join ? *join : basis_channels(); }
  friend bool operator==(const CompositeConvSpec&, const CompositeConvSpec&) = default;
};

/// Weights of a composite layer; also used for a plain conv (one group, no join).
struct CompositeParams {
  std::vector<ConvWeights> groups;
  std::optional<ConvWeights> join;
  friend bool operator==(const CompositeParams&, const CompositeParams&) = default;
};

struct CompositeGrads {
  Tensor grad_input;
  std::vector<GradBundle> groups;  // grad_input left empty; it is summed into the above
  std::optional<GradBundle> join;
};

/// Zero-valued parameters with the shapes `spec` requires for `in_channels` inputs.
CompositeParams make_composite_params(const CompositeConvSpec& spec, std::size_t in_channels);

/// Throws ShapeError if params do not match spec or the groups disagree on output size.
Shape composite_output_shape(const Shape& in, const CompositeConvSpec& spec,
                             const CompositeParams& params);

/// Channel concatenation of every group's response (the pre-join basis maps).
Tensor composite_basis(const Tensor& input, const CompositeConvSpec& spec,
                       const CompositeParams& params);
Tensor composite_forward(const Tensor& input, const CompositeConvSpec& spec,
                         const CompositeParams& params);

/// `basis` may carry the cached result of composite_basis to skip recomputing it
/// when a join is present.
CompositeGrads composite_backward(const Tensor& input, const CompositeConvSpec& spec,
                                  const CompositeParams& params, const Tensor& grad_out,
                                  const Tensor* basis = nullptr);

class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Spatial kernel seen by one (join output, input channel) pair.
struct EffectiveFilter {
  std::size_t out_channel = 0;
  std::size_t in_channel = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major
  friend bool operator==(const EffectiveFilter&, const EffectiveFilter&) = default;
};

/// Collapses a {horizontal 1xk, vertical kx1} composite layer and its join into
/// the cross-shaped kernels they jointly apply. Throws UnsupportedError for any
/// other group pattern or when there is no join.
std::vector<EffectiveFilter> effective_filters(const CompositeConvSpec& spec,
                                               const CompositeParams& params);

/// One block per kernel: `kernel,<out>,<in>,<rows>,<cols>` then `rows` lines of
/// row-major values; blocks separated by an empty line.
std::string effective_filters_csv(std::span<const EffectiveFilter> filters);
std::vector<EffectiveFilter> parse_effective_filters_csv(const std::string& csv);

}  // namespace lrcnn
