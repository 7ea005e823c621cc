#include <doctest.h>

#include <cmath>
#include <numeric>

#include "lrcnn/gradcheck.hpp"
#include "lrcnn/ops.hpp"
#include "lrcnn/reference.hpp"
#include "lrcnn/rng.hpp"

using namespace lrcnn;

namespace {

Tensor iota_tensor(Shape s, double start = 0.0) {
  Tensor t(s);
  std::iota(t.data().begin(), t.data().end(), start);
  return t;
}

Tensor random_tensor(Shape s, Rng& rng) {
  Tensor t(s);
  for (double& v : t.data()) v = rng.normal();
  return t;
}

// Central difference of sum(g * f(x)) with respect to x[i].
template <class F>
double numeric_grad(Tensor& x, std::size_t i, const Tensor& g, F&& f) {
  const double eps = 1e-5;
  const double saved = x[i];
  auto objective = [&] {
    const Tensor y = f(x);
    double s = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) s += g[k] * y[k];
    return s;
  };
  x[i] = saved + eps;
  const double up = objective();
  x[i] = saved - eps;
  const double down = objective();
  x[i] = saved;
  return (up - down) / (2 * eps);
}

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("size matches the shape product and mismatched data is rejected") {
    Tensor t({2, 3, 4, 5});
    CHECK(t.size() == 120);
    CHECK_THROWS_AS(Tensor(Shape{1, 1, 2, 2}, std::vector<double>(3)), ShapeError);
  }

  TEST_CASE("concat then split is the identity") {
    Rng rng(1);
    const Tensor a = random_tensor({2, 3, 4, 4}, rng);
    const Tensor b = random_tensor({2, 5, 4, 4}, rng);
    const Tensor parts[] = {a, b};
    const Tensor joined = concat_channels(parts);
    CHECK(joined.shape() == Shape{2, 8, 4, 4});
    const std::size_t sizes[] = {3, 5};
    const auto back = split_channels(joined, sizes);
    REQUIRE(back.size() == 2);
    CHECK(bitwise_equal(back[0], a));
    CHECK(bitwise_equal(back[1], b));
  }

  TEST_CASE("concat of a single tensor is the identity") {
    Rng rng(2);
    const Tensor a = random_tensor({1, 2, 3, 3}, rng);
    const Tensor parts[] = {a};
    CHECK(bitwise_equal(concat_channels(parts), a));
  }

  TEST_CASE("concat keeps channel order") {
    const Tensor parts[] = {Tensor({1, 1, 2, 2}, 1.0), Tensor({1, 1, 2, 2}, 2.0)};
    const Tensor t = concat_channels(parts);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(t.at(0, 0, i / 2, i % 2) == 1.0);
      CHECK(t.at(0, 1, i / 2, i % 2) == 2.0);
    }
  }

  TEST_CASE("concat rejects parts that disagree on spatial size") {
    const Tensor parts[] = {Tensor({1, 1, 2, 2}), Tensor({1, 1, 3, 2})};
    CHECK_THROWS_AS(concat_channels(parts), ShapeError);
  }
}

TEST_SUITE("conv") {
  TEST_CASE("2x2 kernel over a 2x2 input is one product-sum") {
    const Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
    ConvWeights w(1, 1, 2, 2);
    w.weights = {1, 0, 0, 1};
    const Tensor y = conv2d_forward(x, w, {1, 1}, {0, 0});
    CHECK(y.shape() == Shape{1, 1, 1, 1});
    CHECK(y[0] == 5.0);
  }

  TEST_CASE("zero weights give a zero output of the right shape") {
    Rng rng(3);
    const Tensor x = random_tensor({2, 3, 7, 5}, rng);
    const ConvWeights w(4, 3, 3, 3);
    const Tensor y = conv2d_forward(x, w, {2, 1}, {1, 1});
    CHECK(y.shape() == Shape{2, 4, 4, 5});
    for (double v : y.data()) CHECK(v == 0.0);
  }

  TEST_CASE("1x1 unit kernel is the identity, forward and backward") {
    Rng rng(4);
    const Tensor x = random_tensor({2, 1, 4, 3}, rng);
    ConvWeights w(1, 1, 1, 1);
    w.weights = {1.0};
    CHECK(bitwise_equal(conv2d_forward(x, w, {1, 1}, {0, 0}), x));
    const Tensor g = random_tensor(x.shape(), rng);
    CHECK(bitwise_equal(conv2d_backward(x, w, g, {1, 1}, {0, 0}).grad_input, g));
  }

  TEST_CASE("zero upstream gradient gives zero gradients") {
    Rng rng(5);
    const Tensor x = random_tensor({1, 2, 5, 5}, rng);
    ConvWeights w(3, 2, 3, 3);
    for (double& v : w.weights) v = rng.normal();
    const GradBundle b = conv2d_backward(x, w, Tensor({1, 3, 5, 5}), {1, 1}, {1, 1});
    for (double v : b.grad_input.data()) CHECK(v == 0.0);
    for (double v : b.grad_weights) CHECK(v == 0.0);
    for (double v : b.grad_bias) CHECK(v == 0.0);
  }

  TEST_CASE("1x2x5x5 input, three 2x3x3 filters, pad 1: gradients match central differences") {
    Rng rng(6);
    Tensor x = random_tensor({1, 2, 5, 5}, rng);
    ConvWeights w(3, 2, 3, 3);
    for (double& v : w.weights) v = rng.normal();
    for (double& v : w.bias) v = rng.normal();
    const Tensor g = random_tensor({1, 3, 5, 5}, rng);
    const GradBundle b = conv2d_backward(x, w, g, {1, 1}, {1, 1});
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double n = numeric_grad(x, i, g, [&](const Tensor& in) { return conv2d_forward(in, w, {1, 1}, {1, 1}); });
      worst = std::max(worst, gradcheck_error(b.grad_input[i], n));
    }
    CHECK(worst < 1e-6);
  }

  TEST_CASE("mismatched input channels name the dimension") {
    const Tensor x({1, 3, 4, 4});
    const ConvWeights w(2, 2, 3, 3);
    try {
      conv2d_forward(x, w, {1, 1}, {1, 1});
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find("(c)") != std::string::npos);
    }
  }

  TEST_CASE("kernel larger than the padded input is rejected") {
    CHECK_THROWS_AS(conv2d_forward(Tensor({1, 1, 2, 2}), ConvWeights(1, 1, 5, 5), {1, 1}, {1, 1}), ShapeError);
  }

  TEST_CASE("matches the serial reference bit for bit, forward and backward") {
    Rng rng(7);
    const Tensor x = random_tensor({2, 3, 9, 8}, rng);
    ConvWeights w(4, 3, 3, 5);
    for (double& v : w.weights) v = rng.normal();
    for (double& v : w.bias) v = rng.normal();
    const Stride2 s{2, 1};
    const Pad2 p{1, 2};
    const Tensor y = conv2d_forward(x, w, s, p);
    CHECK(bitwise_equal(y, reference::conv2d_forward(x, w, s, p)));
    const Tensor g = random_tensor(y.shape(), rng);
    const GradBundle a = conv2d_backward(x, w, g, s, p);
    const GradBundle r = reference::conv2d_backward(x, w, g, s, p);
    CHECK(bitwise_equal(a.grad_input, r.grad_input));
    CHECK(a.grad_weights == r.grad_weights);
    CHECK(a.grad_bias == r.grad_bias);
  }
}

TEST_SUITE("pooling") {
  TEST_CASE("single 2x2 window") {
    const PoolResult r = maxpool_forward(Tensor({1, 1, 2, 2}, {1, 2, 3, 4}));
    CHECK(r.output.shape() == Shape{1, 1, 1, 1});
    CHECK(r.output[0] == 4.0);
  }

  TEST_CASE("constant input routes the gradient to the first element of each window") {
    const Tensor x({1, 1, 4, 4}, 7.0);
    const PoolResult r = maxpool_forward(x);
    for (double v : r.output.data()) CHECK(v == 7.0);
    const Tensor g = maxpool_backward(x.shape(), r.argmax, Tensor({1, 1, 2, 2}, 1.0));
    for (std::size_t y = 0; y < 4; ++y) {
      for (std::size_t xx = 0; xx < 4; ++xx) {
        CHECK(g.at(0, 0, y, xx) == ((y % 2 == 0 && xx % 2 == 0) ? 1.0 : 0.0));
      }
    }
  }

  TEST_CASE("4x4 ramp") {
    const PoolResult r = maxpool_forward(iota_tensor({1, 1, 4, 4}));
    CHECK(r.output.data()[0] == 5.0);
    CHECK(r.output.data()[1] == 7.0);
    CHECK(r.output.data()[2] == 13.0);
    CHECK(r.output.data()[3] == 15.0);
  }

  TEST_CASE("window larger than the input is rejected") {
    CHECK_THROWS_AS(maxpool_forward(Tensor({1, 1, 1, 3})), ShapeError);
  }

  TEST_CASE("global max of one channel") {
    const PoolResult r = global_maxpool_forward(Tensor({1, 1, 2, 2}, {1, 9, 3, 4}));
    CHECK(r.output.shape() == Shape{1, 1, 1, 1});
    CHECK(r.output[0] == 9.0);
  }

  TEST_CASE("global max of a constant channel sends the gradient to (0,0)") {
    const Tensor x({1, 1, 3, 3}, -2.0);
    const PoolResult r = global_maxpool_forward(x);
    CHECK(r.output[0] == -2.0);
    const Tensor g = global_maxpool_backward(x.shape(), r.argmax, Tensor({1, 1, 1, 1}, 1.0));
    CHECK(g[0] == 1.0);
    CHECK(std::accumulate(g.data().begin(), g.data().end(), 0.0) == 1.0);
  }

  TEST_CASE("global max of a random 2x3x7x7 tensor matches a scan") {
    Rng rng(8);
    const Tensor x = random_tensor({2, 3, 7, 7}, rng);
    const PoolResult r = global_maxpool_forward(x);
    for (std::size_t n = 0; n < 2; ++n) {
      for (std::size_t c = 0; c < 3; ++c) {
        double best = -INFINITY;
        for (std::size_t i = 0; i < 49; ++i) best = std::max(best, x.at(n, c, i / 7, i % 7));
        CHECK(r.output.at(n, c, 0, 0) == best);
      }
    }
  }
}

TEST_SUITE("relu") {
  TEST_CASE("clamps negatives") {
    const Tensor y = relu_forward(Tensor({1, 1, 1, 3}, {-1, 0, 2}));
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
    CHECK(y[2] == 2.0);
  }

  TEST_CASE("gradient at zero is zero") {
    const Tensor g = relu_backward(Tensor({1, 1, 1, 3}, {-1, 0, 2}), Tensor({1, 1, 1, 3}, 1.0));
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
    CHECK(g[2] == 1.0);
  }
}

TEST_SUITE("dense") {
  TEST_CASE("identity weights pass the input through") {
    Rng rng(9);
    const Tensor x = random_tensor({2, 4, 1, 1}, rng);
    DenseWeights w(4, 4);
    for (std::size_t i = 0; i < 4; ++i) w.weights[i * 4 + i] = 1.0;
    const Tensor y = dense_forward(x, w);
    CHECK(y.shape() == Shape{2, 4, 1, 1});
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
  }

  TEST_CASE("zero weights broadcast the bias") {
    DenseWeights w(3, 2);
    w.bias = {0.5, -1.5};
    const Tensor y = dense_forward(Tensor({2, 3, 1, 1}, 4.0), w);
    CHECK(y.at(0, 0, 0, 0) == 0.5);
    CHECK(y.at(1, 1, 0, 0) == -1.5);
  }

  TEST_CASE("2x8 input, 8x5 weights: input gradient matches central differences") {
    Rng rng(10);
    Tensor x = random_tensor({2, 8, 1, 1}, rng);
    DenseWeights w(8, 5);
    for (double& v : w.weights) v = rng.normal();
    const Tensor g = random_tensor({2, 5, 1, 1}, rng);
    const GradBundle b = dense_backward(x, w, g);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      worst = std::max(worst, gradcheck_error(b.grad_input[i], numeric_grad(x, i, g, [&](const Tensor& in) {
                                                return dense_forward(in, w);
                                              })));
    }
    CHECK(worst < 1e-6);
  }

  TEST_CASE("fan-in mismatch is rejected") {
    CHECK_THROWS_AS(dense_forward(Tensor({1, 3, 2, 2}), DenseWeights(11, 2)), ShapeError);
  }
}

TEST_SUITE("softmax_xent") {
  TEST_CASE("uniform logits over 10 classes give ln 10") {
    const std::uint8_t labels[] = {3, 7};
    const LossResult r = softmax_xent(Tensor({2, 10, 1, 1}, 0.25), labels);
    CHECK(r.loss == doctest::Approx(std::log(10.0)).epsilon(1e-12));
  }

  TEST_CASE("a large margin on the true class gives near-zero loss") {
    Tensor logits({1, 4, 1, 1});
    logits[2] = 50.0;
    const std::uint8_t labels[] = {2};
    CHECK(softmax_xent(logits, labels).loss < 1e-20);
  }

  TEST_CASE("random 3x4 logits: gradient matches central differences") {
    Rng rng(11);
    Tensor logits = random_tensor({3, 4, 1, 1}, rng);
    const std::uint8_t labels[] = {0, 3, 1};
    const LossResult r = softmax_xent(logits, labels);
    double worst = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      const double saved = logits[i];
      logits[i] = saved + 1e-5;
      const double up = softmax_xent(logits, labels).loss;
      logits[i] = saved - 1e-5;
      const double down = softmax_xent(logits, labels).loss;
      logits[i] = saved;
      worst = std::max(worst, gradcheck_error(r.grad_logits[i], (up - down) / 2e-5));
    }
    CHECK(worst < 1e-6);
  }

  TEST_CASE("label outside the class range is rejected") {
    const std::uint8_t labels[] = {4};
    CHECK_THROWS(softmax_xent(Tensor({1, 4, 1, 1}), labels));
  }
}
