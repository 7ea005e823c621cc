#include "lrcnn/init.hpp"

#include <cmath>
#include <stdexcept>

#include "lrcnn/format.hpp"

namespace lrcnn {

double he_stddev(std::size_t n_hat) {
  if (n_hat == 0) throw std::invalid_argument("he_stddev: n_hat must be >= 1");
  return std::sqrt(2.0 / static_cast<double>(n_hat));
}

double composite_stddev(std::span<const FilterGroup> groups) {
  if (groups.empty()) throw std::invalid_argument("composite_stddev: empty group list");
  std::size_t n_hat = 0;
  for (const auto& g : groups) n_hat += g.kw * g.kh * g.d;
  return he_stddev(n_hat);
}

std::string to_string(InitScheme s) {
  return s == InitScheme::kHe ? "he-fanin" : "composite-he";
}

InitScheme parse_init_scheme(const std::string& s) {
  if (s == "he-fanin") return InitScheme::kHe;
  if (s == "composite-he") return InitScheme::kCompositeHe;
  throw std::invalid_argument("unknown init scheme '" + s + "' (he-fanin, composite-he)");
}

std::vector<LayerStd> layer_stddevs(const ArchSpec& arch) {
  std::size_t last_dense = arch.layers.size();
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    if (std::holds_alternative<DenseLayer>(arch.layers[i].kind)) last_dense = i;
  }
  std::vector<LayerStd> out;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerKind& k = arch.layers[i].kind;
    LayerStd s{i, 0.0, 0.0};
    if (const auto* c = std::get_if<ConvLayer>(&k)) {
      s.weights = he_stddev(c->kh * c->kw * c->d);
    } else if (const auto* c = std::get_if<CompositeLayer>(&k)) {
      s.weights = composite_stddev(c->spec.groups);
      if (c->spec.join) s.join = he_stddev(*c->spec.join);
    } else if (const auto* d = std::get_if<DenseLayer>(&k)) {
      // The classifier feeds softmax, not a ReLU: unit gain on its fan-in.
      s.weights = i == last_dense ? std::sqrt(1.0 / static_cast<double>(d->in)) : he_stddev(d->out);
    }
    out.push_back(s);
  }
  return out;
}

ModelParams init_network(const ArchSpec& arch, const InitSpec& init) {
  ModelParams params = make_params(arch);
  const auto stds = layer_stddevs(arch);
  Rng rng(init.seed);
  for (auto& ref : param_refs(arch, params)) {
    if (is_bias(ref.role)) continue;
    double sigma = stds[ref.layer].weights;
    if (ref.role == ParamRole::kJoinWeights) {
      sigma = stds[ref.layer].join;
    } else if (ref.role == ParamRole::kGroupWeights && init.scheme == InitScheme::kHe) {
      const auto& g = std::get<CompositeLayer>(arch.layers[ref.layer].kind).spec.groups[ref.group];
      sigma = he_stddev(g.kh * g.kw * g.d);
    }
    sigma *= init.sigma_scale;
    for (double& v : ref.values) v = sigma * rng.normal();
  }
  return params;
}

double variance(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return acc / static_cast<double>(v.size());
}

std::vector<ProbeRow> variance_probe(const ArchSpec& arch, const ProbeOptions& options) {
  validate_or_throw(arch);
  if (options.trials == 0) throw std::invalid_argument("variance_probe: trials must be >= 1");
  std::vector<std::size_t> weighted;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    if (has_weights(arch.layers[i])) weighted.push_back(i);
  }
  std::vector<std::vector<double>> ratios(weighted.size());
  const Shape in_shape{options.batch, arch.input.c, arch.input.h, arch.input.w};
  for (std::size_t t = 0; t < options.trials; ++t) {
    const InitSpec init{options.scheme, Rng::derive(options.seed, 2 * t), options.sigma_scale};
    const ModelParams params = init_network(arch, init);
    Rng rng(Rng::derive(options.seed, 2 * t + 1));
    Tensor x(in_shape);
    for (double& v : x.data()) v = rng.normal();
    const ForwardTrace trace = forward(arch, params, x);
    Tensor g(trace.output.shape());
    for (double& v : g.data()) v = rng.normal();
    const BackwardResult b = backward(arch, params, trace, g, true);
    for (std::size_t k = 0; k < weighted.size(); ++k) {
      const Tensor& here = b.layer_input_grads[weighted[k]];
      const Tensor& there = k + 1 < weighted.size() ? b.layer_input_grads[weighted[k + 1]] : g;
      ratios[k].push_back(variance(here.data()) / variance(there.data()));
    }
  }
  std::vector<ProbeRow> rows;
  for (std::size_t k = 0; k < weighted.size(); ++k) {
    double mean = 0.0;
    for (double r : ratios[k]) mean += r;
    mean /= static_cast<double>(ratios[k].size());
    rows.push_back({weighted[k], mean, std::sqrt(variance(ratios[k]))});
  }
  return rows;
}

std::string probe_csv(std::span<const ProbeRow> rows) {
  std::string out = "layer_index,ratio_mean,ratio_std\n";
  for (const auto& r : rows) {
    out += std::to_string(r.layer_index) + "," + format_double(r.ratio_mean) + "," +
           format_double(r.ratio_std) + "\n";
  }
  return out;
}

double geometric_mean_ratio(std::span<const ProbeRow> rows) {
  if (rows.empty()) return 1.0;
  double log_sum = 0.0;
  for (const auto& r : rows) log_sum += std::log(r.ratio_mean);
  return std::exp(log_sum / static_cast<double>(rows.size()));
}

}  // namespace lrcnn
