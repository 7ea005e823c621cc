// Serial reference vs OpenMP conv kernels on the desk-net layer shapes.
// Arguments: batch, in channels, filters, side, kernel rows, kernel cols.
// The MACs counter is a wall-time rate; backward counts two passes (input
// and weight gradients).

#include <benchmark/benchmark.h>

#include "lrcnn/ops.hpp"
#include "lrcnn/reference.hpp"
#include "lrcnn/rng.hpp"

namespace {

using namespace lrcnn;

struct Setup {
  Tensor x;
  ConvWeights w;
  Pad2 pad;
  Tensor grad;
  double macs = 0.0;
};

Setup make(const benchmark::State& s) {
  const auto n = static_cast<std::size_t>(s.range(0)), c = static_cast<std::size_t>(s.range(1)),
             d = static_cast<std::size_t>(s.range(2)), side = static_cast<std::size_t>(s.range(3)),
             kh = static_cast<std::size_t>(s.range(4)), kw = static_cast<std::size_t>(s.range(5));
  Rng rng(1);
  Setup u{Tensor({n, c, side, side}), ConvWeights(d, c, kh, kw), {kh / 2, kw / 2}, Tensor(), 0.0};
  for (double& v : u.x.data()) v = rng.normal();
  for (double& v : u.w.weights) v = rng.normal();
  u.grad = Tensor({n, d, side, side});
  for (double& v : u.grad.data()) v = rng.normal();
  u.macs = static_cast<double>(n * side * side * d * c * kh * kw);
  return u;
}

template <bool Reference>
void forward(benchmark::State& state) {
  const Setup u = make(state);
  for (auto _ : state) {
    Tensor y = Reference ? reference::conv2d_forward(u.x, u.w, {1, 1}, u.pad)
                         : conv2d_forward(u.x, u.w, {1, 1}, u.pad);
    benchmark::DoNotOptimize(y.data().data());
  }
  state.counters["MACs"] = benchmark::Counter(u.macs, benchmark::Counter::kIsIterationInvariantRate);
}

template <bool Reference>
void backward(benchmark::State& state) {
  const Setup u = make(state);
  for (auto _ : state) {
    GradBundle g = Reference ? reference::conv2d_backward(u.x, u.w, u.grad, {1, 1}, u.pad)
                             : conv2d_backward(u.x, u.w, u.grad, {1, 1}, u.pad);
    benchmark::DoNotOptimize(g.grad_weights.data());
  }
  state.counters["MACs"] = benchmark::Counter(2.0 * u.macs, benchmark::Counter::kIsIterationInvariantRate);
}

void shapes(benchmark::internal::Benchmark* b) {
  b->ArgNames({"n", "c", "d", "side", "kh", "kw"});
  b->Args({10, 3, 32, 32, 3, 3});    // desk-full conv1
  b->Args({10, 32, 64, 16, 3, 3});   // desk-full conv2
  b->Args({10, 64, 128, 8, 3, 3});   // desk-full conv3
  b->Args({10, 32, 32, 16, 1, 3});   // one group of a cross-shaped composite
  b->Unit(benchmark::kMillisecond);
}

BENCHMARK(forward<true>)->Name("conv_forward/reference")->Apply(shapes);
BENCHMARK(forward<false>)->Name("conv_forward/openmp")->Apply(shapes);
BENCHMARK(backward<true>)->Name("conv_backward/reference")->Apply(shapes);
BENCHMARK(backward<false>)->Name("conv_backward/openmp")->Apply(shapes);

}  // namespace

BENCHMARK_MAIN();
