#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lrcnn/network.hpp"

namespace lrcnn {

/// sqrt(2 / n_hat): the gradient-variance preserving std for a layer with
/// n_hat outgoing connections per input followed by a ReLU.
double he_stddev(std::size_t n_hat);

/// sqrt(2 / sum_i(w_i * h_i * d_i)): a composite layer is initialized as one
/// layer whose connection count is the sum over its groups.
double composite_stddev(std::span<const FilterGroup> groups);

enum class InitScheme {
  kHe,           // "he-fanin": every filter group sized on its own, kh*kw*d_i
  kCompositeHe,  // "composite-he": groups share sigma from the summed connection count
};

std::string to_string(InitScheme s);
InitScheme parse_init_scheme(const std::string& s);

struct InitSpec {
  InitScheme scheme = InitScheme::kCompositeHe;
  std::uint64_t seed = 0;
  double sigma_scale = 1.0;  // multiplies every weight std; 1 for normal use
};

/// Per-layer weight std under the composite scheme (0 for layers without
/// weights). Composite layers report the shared group std and the join std.
struct LayerStd {
  std::size_t layer = 0;
  double weights = 0.0;
  double join = 0.0;
};
std::vector<LayerStd> layer_stddevs(const ArchSpec& arch);

/// Zero-mean Gaussian weights, zero biases. Draws come from one Rng seeded
/// with `init.seed`, in param_refs order, so a seed fixes every value.
ModelParams init_network(const ArchSpec& arch, const InitSpec& init);

struct ProbeRow {
  std::size_t layer_index = 0;  // index into arch.layers
  double ratio_mean = 0.0;
  double ratio_std = 0.0;
};

struct ProbeOptions {
  std::size_t trials = 20;
  std::uint64_t seed = 0;
  std::size_t batch = 1;
  InitScheme scheme = InitScheme::kCompositeHe;
  double sigma_scale = 1.0;
};

/// Backward variance ratio Var[dx_l] / Var[dx_{l+1}] for every weighted layer,
/// where dx_l is the loss gradient at the layer's input and dx_{l+1} the
/// gradient at the next weighted layer's input (or the injected output
/// gradient for the last one). Inputs and output gradients are unit Gaussians.
std::vector<ProbeRow> variance_probe(const ArchSpec& arch, const ProbeOptions& options);

std::string probe_csv(std::span<const ProbeRow> rows);

double geometric_mean_ratio(std::span<const ProbeRow> rows);

/// Sample variance (population form) of a span.
double variance(std::span<const double> v);

}  // namespace lrcnn
