#include "lrcnn/network.hpp"

#include <type_traits>

namespace lrcnn {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::vector<std::size_t> input_channels(const ArchSpec& arch) {
  const auto shapes = infer_shapes(arch);
  std::vector<std::size_t> c(arch.layers.size());
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    c[i] = i == 0 ? arch.input.c : shapes[i - 1].c;
  }
  return c;
}

}  // namespace

ModelParams make_params(const ArchSpec& arch) {
  const auto in_c = input_channels(arch);
  ModelParams p;
  p.layers.resize(arch.layers.size());
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    std::visit(Overloaded{
                   [&](const ConvLayer& c) {
                     p.layers[i].conv.groups.emplace_back(c.d, in_c[i], c.kh, c.kw);
                   },
                   [&](const CompositeLayer& c) {
                     p.layers[i].conv = make_composite_params(c.spec, in_c[i]);
                   },
                   [&](const DenseLayer& d) { p.layers[i].dense = DenseWeights(d.in, d.out); },
                   [](const auto&) {},
               },
               arch.layers[i].kind);
  }
  return p;
}

template <class Params>
auto collect_refs(const ArchSpec& arch, Params& params) {
  using T = std::conditional_t<std::is_const_v<Params>, const double, double>;
  std::vector<BasicParamRef<T>> refs;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    auto& lp = params.layers.at(i);
    auto add_conv = [&](auto& w, ParamRole wr, ParamRole br, std::size_t group) {
      refs.push_back({i, wr, group, {w.d, w.c, w.kh, w.kw}, std::span<T>(w.weights)});
      refs.push_back({i, br, group, {w.d}, std::span<T>(w.bias)});
    };
    std::visit(Overloaded{
                   [&](const ConvLayer&) {
                     add_conv(lp.conv.groups.at(0), ParamRole::kConvWeights, ParamRole::kConvBias, 0);
                   },
                   [&](const CompositeLayer&) {
                     for (std::size_t g = 0; g < lp.conv.groups.size(); ++g) {
                       add_conv(lp.conv.groups[g], ParamRole::kGroupWeights, ParamRole::kGroupBias, g);
                     }
                     if (lp.conv.join) {
                       add_conv(*lp.conv.join, ParamRole::kJoinWeights, ParamRole::kJoinBias, 0);
                     }
                   },
                   [&](const DenseLayer&) {
                     auto& d = lp.dense;
                     refs.push_back({i, ParamRole::kDenseWeights, 0, {d.in, d.out}, std::span<T>(d.weights)});
                     refs.push_back({i, ParamRole::kDenseBias, 0, {d.out}, std::span<T>(d.bias)});
                   },
                   [](const auto&) {},
               },
               arch.layers[i].kind);
  }
  return refs;
}

std::vector<ParamRef> param_refs(const ArchSpec& arch, ModelParams& params) {
  return collect_refs(arch, params);
}

std::vector<ConstParamRef> param_refs(const ArchSpec& arch, const ModelParams& params) {
  return collect_refs(arch, params);
}

std::size_t parameter_count(const ArchSpec& arch, const ModelParams& params) {
  std::size_t total = 0;
  for (const auto& r : param_refs(arch, params)) total += r.values.size();
  return total;
}

ForwardTrace forward(const ArchSpec& arch, const ModelParams& params, const Tensor& input,
                     const ForwardOptions& options) {
  if (params.layers.size() != arch.layers.size()) {
    throw ShapeError("forward: parameter set has " + std::to_string(params.layers.size()) +
                     " layers, architecture has " + std::to_string(arch.layers.size()));
  }
  const Shape& s = input.shape();
  if (s.c != arch.input.c) {
    throw ShapeError("forward: input channels (c) " + std::to_string(s.c) + " but architecture expects " +
                     std::to_string(arch.input.c));
  }
  const std::size_t n_layers = arch.layers.size();
  ForwardTrace t;
  t.inputs.resize(n_layers);
  t.basis.resize(n_layers);
  t.argmax.resize(n_layers);
  t.dropout_scale.resize(n_layers);
  Tensor cur = input;
  for (std::size_t i = 0; i < n_layers; ++i) {
    const LayerParams& lp = params.layers[i];
    Tensor next;
    std::visit(
        Overloaded{
            [&](const ConvLayer& c) { next = conv2d_forward(cur, lp.conv.groups.at(0), c.stride, c.pad); },
            [&](const CompositeLayer& c) {
              if (c.spec.join) {
                t.basis[i] = composite_basis(cur, c.spec, lp.conv);
                next = conv2d_forward(t.basis[i], *lp.conv.join, {1, 1}, {0, 0});
              } else {
                next = composite_forward(cur, c.spec, lp.conv);
              }
            },
            [&](const MaxPoolLayer& p) {
              PoolResult r = maxpool_forward(cur, p.k, p.stride);
              next = std::move(r.output);
              t.argmax[i] = std::move(r.argmax);
            },
            [&](const GlobalMaxPoolLayer&) {
              PoolResult r = global_maxpool_forward(cur);
              next = std::move(r.output);
              t.argmax[i] = std::move(r.argmax);
            },
            [&](const ReluLayer&) { next = relu_forward(cur); },
            [&](const DenseLayer&) { next = dense_forward(cur, lp.dense); },
            [&](const DropoutLayer& d) {
              if (!options.training || d.rate == 0.0) {
                next = cur;
                return;
              }
              if (options.dropout_rng == nullptr) throw std::logic_error("dropout needs an rng");
              Tensor scale(cur.shape());
              next = Tensor(cur.shape());
              const double keep = 1.0 / (1.0 - d.rate);
              for (std::size_t k = 0; k < cur.size(); ++k) {
                scale[k] = options.dropout_rng->bernoulli(d.rate) ? 0.0 : keep;
                next[k] = cur[k] * scale[k];
              }
              t.dropout_scale[i] = std::move(scale);
            },
            [&](const SoftmaxLayer&) { next = cur; },
        },
        arch.layers[i].kind);
    t.inputs[i] = std::move(cur);
    cur = std::move(next);
  }
  t.output = std::move(cur);
  return t;
}

Tensor predict(const ArchSpec& arch, const ModelParams& params, const Tensor& input) {
  Tensor cur = input;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerParams& lp = params.layers.at(i);
    std::visit(Overloaded{
                   [&](const ConvLayer& c) { cur = conv2d_forward(cur, lp.conv.groups.at(0), c.stride, c.pad); },
                   [&](const CompositeLayer& c) { cur = composite_forward(cur, c.spec, lp.conv); },
                   [&](const MaxPoolLayer& p) { cur = maxpool_forward(cur, p.k, p.stride).output; },
                   [&](const GlobalMaxPoolLayer&) { cur = global_maxpool_forward(cur).output; },
                   [&](const ReluLayer&) { cur = relu_forward(cur); },
                   [&](const DenseLayer&) { cur = dense_forward(cur, lp.dense); },
                   [](const DropoutLayer&) {},
                   [](const SoftmaxLayer&) {},
               },
               arch.layers[i].kind);
  }
  return cur;
}

BackwardResult backward(const ArchSpec& arch, const ModelParams& params, const ForwardTrace& trace,
                        const Tensor& grad_output, bool keep_layer_grads) {
  if (grad_output.shape() != trace.output.shape()) {
    throw ShapeError("backward: grad_output shape " + to_string(grad_output.shape()) +
                     " does not match network output " + to_string(trace.output.shape()));
  }
  BackwardResult r;
  r.grads = make_params(arch);
  if (keep_layer_grads) r.layer_input_grads.resize(arch.layers.size());
  Tensor g = grad_output;
  for (std::size_t ii = arch.layers.size(); ii-- > 0;) {
    const LayerParams& lp = params.layers[ii];
    LayerParams& gp = r.grads.layers[ii];
    const Tensor& in = trace.inputs[ii];
    Tensor gin;
    std::visit(
        Overloaded{
            [&](const ConvLayer& c) {
              GradBundle b = conv2d_backward(in, lp.conv.groups.at(0), g, c.stride, c.pad);
              gp.conv.groups[0].weights = std::move(b.grad_weights);
              gp.conv.groups[0].bias = std::move(b.grad_bias);
              gin = std::move(b.grad_input);
            },
            [&](const CompositeLayer& c) {
              const Tensor* basis = c.spec.join ? &trace.basis[ii] : nullptr;
              CompositeGrads cg = composite_backward(in, c.spec, lp.conv, g, basis);
              for (std::size_t k = 0; k < cg.groups.size(); ++k) {
                gp.conv.groups[k].weights = std::move(cg.groups[k].grad_weights);
                gp.conv.groups[k].bias = std::move(cg.groups[k].grad_bias);
              }
              if (cg.join) {
                gp.conv.join->weights = std::move(cg.join->grad_weights);
                gp.conv.join->bias = std::move(cg.join->grad_bias);
              }
              gin = std::move(cg.grad_input);
            },
            [&](const MaxPoolLayer&) { gin = maxpool_backward(in.shape(), trace.argmax[ii], g); },
            [&](const GlobalMaxPoolLayer&) {
              gin = global_maxpool_backward(in.shape(), trace.argmax[ii], g);
            },
            [&](const ReluLayer&) { gin = relu_backward(in, g); },
            [&](const DenseLayer&) {
              GradBundle b = dense_backward(in, lp.dense, g);
              gp.dense.weights = std::move(b.grad_weights);
              gp.dense.bias = std::move(b.grad_bias);
              gin = std::move(b.grad_input);
            },
            [&](const DropoutLayer&) {
              gin = std::move(g);
              const Tensor& scale = trace.dropout_scale[ii];
              if (scale.size() == gin.size()) {
                for (std::size_t k = 0; k < gin.size(); ++k) gin[k] *= scale[k];
              }
            },
            [&](const SoftmaxLayer&) { gin = std::move(g); },
        },
        arch.layers[ii].kind);
    if (keep_layer_grads) r.layer_input_grads[ii] = gin;
    g = std::move(gin);
  }
  r.grad_input = std::move(g);
  return r;
}

}  // namespace lrcnn
