#include "lrcnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "lrcnn/composite.hpp"
#include "lrcnn/format.hpp"
#include "lrcnn/ops.hpp"
#include "lrcnn/rng.hpp"

namespace lrcnn {

namespace {

struct Probe {
  std::span<double> values;
  std::span<const double> analytic;
};

struct Outcome {
  std::size_t entries = 0;
  double max_error = 0.0;
};

Outcome finite_differences(std::span<const Probe> probes, const std::function<double()>& f, double eps) {
  Outcome o;
  for (const auto& p : probes) {
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      const double saved = p.values[i];
      p.values[i] = saved + eps;
      const double up = f();
      p.values[i] = saved - eps;
      const double down = f();
      p.values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      o.max_error = std::max(o.max_error, gradcheck_error(p.analytic[i], numeric));
      ++o.entries;
    }
  }
  return o;
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

void fill_normal(std::span<double> v, Rng& rng) {
  for (double& x : v) x = rng.normal();
}

Tensor normal_tensor(Shape s, Rng& rng) {
  Tensor t(s);
  fill_normal(t.data(), rng);
  return t;
}

// Distinct values 0.01 apart in random order: pooling winners are separated
// from runners-up by far more than the difference step.
Tensor distinct_tensor(Shape s, Rng& rng) {
  Tensor t(s);
  std::vector<double> v(t.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.01 * static_cast<double>(i) - 0.005 * static_cast<double>(v.size());
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
  std::copy(v.begin(), v.end(), t.data().begin());
  return t;
}

void randomize(ConvWeights& w, Rng& rng) {
  fill_normal(w.weights, rng);
  fill_normal(w.bias, rng);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct KernelShape {
  std::size_t kh, kw;
};
constexpr KernelShape kOddKernels[] = {{1, 1}, {1, 3}, {3, 1}, {3, 3}, {1, 5}, {5, 1}, {5, 5}};
constexpr KernelShape kAnyKernels[] = {{1, 1}, {1, 3}, {3, 1}, {3, 3}, {2, 2}, {1, 5}, {5, 1}, {2, 3}};

Outcome check_conv(Rng& rng, double eps) {
  const auto k = kAnyKernels[rng.below(std::size(kAnyKernels))];
  const std::size_t n = pick(rng, 1, 2), c = pick(rng, 1, 3), d = pick(rng, 1, 3);
  const Stride2 stride{pick(rng, 1, 2), pick(rng, 1, 2)};
  const Pad2 pad{pick(rng, 0, k.kh / 2), pick(rng, 0, k.kw / 2)};
  const std::size_t h = pick(rng, k.kh, 6), w = pick(rng, k.kw, 6);
  Tensor x = normal_tensor({n, c, h, w}, rng);
  ConvWeights wt(d, c, k.kh, k.kw);
  randomize(wt, rng);
  const Tensor g = normal_tensor(conv_output_shape(x.shape(), wt, stride, pad), rng);
  const GradBundle a = conv2d_backward(x, wt, g, stride, pad);
  const Probe probes[] = {{x.data(), a.grad_input.data()}, {wt.weights, a.grad_weights}, {wt.bias, a.grad_bias}};
  return finite_differences(probes, [&] { return dot(g.data(), conv2d_forward(x, wt, stride, pad).data()); }, eps);
}

Outcome check_composite(Rng& rng, double eps, bool with_join) {
  CompositeConvSpec spec;
  const std::size_t groups = pick(rng, 1, 3);
  for (std::size_t i = 0; i < groups; ++i) {
    const auto k = kOddKernels[rng.below(std::size(kOddKernels))];
    spec.groups.push_back({k.kw, k.kh, pick(rng, 1, 3), std::nullopt});
  }
  const std::size_t s = pick(rng, 1, 2);
  spec.stride = {s, s};
  if (with_join) spec.join = pick(rng, 1, 3);
  const std::size_t n = pick(rng, 1, 2), c = pick(rng, 1, 3);
  Tensor x = normal_tensor({n, c, pick(rng, 3, 6), pick(rng, 3, 6)}, rng);
  CompositeParams p = make_composite_params(spec, c);
  for (auto& gw : p.groups) randomize(gw, rng);
  if (p.join) randomize(*p.join, rng);
  const Tensor g = normal_tensor(composite_output_shape(x.shape(), spec, p), rng);
  const CompositeGrads a = composite_backward(x, spec, p, g);
  std::vector<Probe> probes{{x.data(), a.grad_input.data()}};
  for (std::size_t i = 0; i < p.groups.size(); ++i) {
    probes.push_back({p.groups[i].weights, a.groups[i].grad_weights});
    probes.push_back({p.groups[i].bias, a.groups[i].grad_bias});
  }
  if (p.join) {
    probes.push_back({p.join->weights, a.join->grad_weights});
    probes.push_back({p.join->bias, a.join->grad_bias});
  }
  return finite_differences(probes, [&] { return dot(g.data(), composite_forward(x, spec, p).data()); }, eps);
}

Outcome check_maxpool(Rng& rng, double eps) {
  const std::size_t k = pick(rng, 2, 3), stride = pick(rng, 1, 2);
  Tensor x = distinct_tensor({pick(rng, 1, 2), pick(rng, 1, 3), pick(rng, k, 7), pick(rng, k, 7)}, rng);
  const PoolResult r = maxpool_forward(x, k, stride);
  const Tensor g = normal_tensor(r.output.shape(), rng);
  const Tensor a = maxpool_backward(x.shape(), r.argmax, g);
  const Probe probes[] = {{x.data(), a.data()}};
  return finite_differences(probes, [&] { return dot(g.data(), maxpool_forward(x, k, stride).output.data()); }, eps);
}

Outcome check_global_maxpool(Rng& rng, double eps) {
  Tensor x = distinct_tensor({pick(rng, 1, 2), pick(rng, 1, 4), pick(rng, 1, 6), pick(rng, 1, 6)}, rng);
  const PoolResult r = global_maxpool_forward(x);
  const Tensor g = normal_tensor(r.output.shape(), rng);
  const Tensor a = global_maxpool_backward(x.shape(), r.argmax, g);
  const Probe probes[] = {{x.data(), a.data()}};
  return finite_differences(probes, [&] { return dot(g.data(), global_maxpool_forward(x).output.data()); }, eps);
}

Outcome check_relu(Rng& rng, double eps) {
  Tensor x({pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 5), pick(rng, 1, 5)});
  for (double& v : x.data()) {
    do v = rng.normal();
    while (std::abs(v) < 1e-3);
  }
  const Tensor g = normal_tensor(x.shape(), rng);
  const Tensor a = relu_backward(x, g);
  const Probe probes[] = {{x.data(), a.data()}};
  return finite_differences(probes, [&] { return dot(g.data(), relu_forward(x).data()); }, eps);
}

Outcome check_dense(Rng& rng, double eps) {
  const Shape s{pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 3)};
  Tensor x = normal_tensor(s, rng);
  DenseWeights w(s.image(), pick(rng, 1, 6));
  fill_normal(w.weights, rng);
  fill_normal(w.bias, rng);
  const Tensor g = normal_tensor({s.n, w.out, 1, 1}, rng);
  const GradBundle a = dense_backward(x, w, g);
  const Probe probes[] = {{x.data(), a.grad_input.data()}, {w.weights, a.grad_weights}, {w.bias, a.grad_bias}};
  return finite_differences(probes, [&] { return dot(g.data(), dense_forward(x, w).data()); }, eps);
}

Outcome check_softmax_xent(Rng& rng, double eps) {
  const std::size_t n = pick(rng, 1, 4), classes = pick(rng, 2, 10);
  Tensor logits({n, classes, 1, 1});
  for (double& v : logits.data()) v = 2.0 * rng.normal();
  std::vector<std::uint8_t> labels(n);
  for (auto& l : labels) l = static_cast<std::uint8_t>(rng.below(classes));
  const LossResult r = softmax_xent(logits, labels);
  const Probe probes[] = {{logits.data(), r.grad_logits.data()}};
  return finite_differences(probes, [&] { return softmax_xent(logits, labels).loss; }, eps);
}

struct OpCheck {
  const char* name;
  std::function<Outcome(Rng&, double)> run;
};

}  // namespace

double gradcheck_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1.0});
  return std::abs(analytic - numeric) / scale;
}

std::vector<GradCheckRow> run_gradcheck(const GradCheckOptions& options) {
  const OpCheck ops[] = {
      {"conv", check_conv},
      {"composite", [](Rng& r, double e) { return check_composite(r, e, false); }},
      {"composite_join", [](Rng& r, double e) { return check_composite(r, e, true); }},
      {"maxpool", check_maxpool},
      {"global_maxpool", check_global_maxpool},
      {"relu", check_relu},
      {"dense", check_dense},
      {"softmax_xent", check_softmax_xent},
  };
  std::vector<GradCheckRow> rows;
  for (std::size_t o = 0; o < std::size(ops); ++o) {
    GradCheckRow row{ops[o].name, options.cases, 0, 0.0};
    for (std::size_t c = 0; c < options.cases; ++c) {
      Rng rng(Rng::derive(Rng::derive(options.seed, o), c));
      const Outcome out = ops[o].run(rng, options.epsilon);
      row.entries += out.entries;
      row.max_error = std::max(row.max_error, out.max_error);
    }
    rows.push_back(row);
  }
  return rows;
}

std::string gradcheck_csv(std::span<const GradCheckRow> rows) {
  std::string s = "op,cases,entries,max_rel_error\n";
  for (const auto& r : rows) {
    s += r.op + "," + std::to_string(r.cases) + "," + std::to_string(r.entries) + "," +
         format_double(r.max_error) + "\n";
  }
  return s;
}

}  // namespace lrcnn
