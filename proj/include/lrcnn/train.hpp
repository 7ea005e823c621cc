#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lrcnn/augment.hpp"
#include "lrcnn/cifar.hpp"
#include "lrcnn/init.hpp"
#include "lrcnn/network.hpp"
#include "lrcnn/zca.hpp"

namespace lrcnn {

struct LrDrop {
  std::uint64_t iteration = 0;
  double factor = 1.0;
  friend bool operator==(const LrDrop&, const LrDrop&) = default;
};

/// Text form (same key = value syntax as architecture files):
///   gamma0 = 0.01        lambda = 5e-4      batch = 64      epochs = 5
///   seed = 1             momentum = 0       init = composite-he
///   crop = true          mirror = true      pad = 4
///   zca = false          zca_epsilon = 0.01
///   lr_drop = 20000 0.1  (repeatable: from iteration 20000 on, gamma *= 0.1)
///   max_iterations = 0   (0: no cap)        train_limit = 0  (0: all samples)
///   topk = 5
struct TrainConfig {
  double gamma0 = 0.01;
  double lambda = 5e-4;
  std::size_t batch = 64;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  double momentum = 0.0;
  InitScheme init = InitScheme::kCompositeHe;
  AugmentOptions augment;
  bool zca = false;
  double zca_epsilon = kDefaultZcaEpsilon;
  std::vector<LrDrop> manual_lr_drops;
  std::uint64_t max_iterations = 0;
  std::size_t train_limit = 0;
  std::size_t topk = 5;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Throws std::invalid_argument naming the first violated constraint.
void validate(const TrainConfig& config);
TrainConfig parse_train_config(const std::string& text);
std::string format_train_config(const TrainConfig& config);

struct IterationRecord {
  std::uint64_t t = 0;
  double gamma = 0.0;
  double loss = 0.0;
  friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

/// train_acc is the running top-1 over the epoch's augmented minibatches;
/// val_acc is NaN when no validation set is given.
struct EpochRecord {
  std::size_t epoch = 0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

struct TrainHistory {
  std::vector<IterationRecord> iterations;
  std::vector<EpochRecord> epochs;
};

/// Bit-level equality, so NaN fields compare equal to themselves.
bool identical(const TrainHistory& a, const TrainHistory& b);

/// `t,gamma,loss` and `epoch,train_acc,val_acc`, values in shortest round-trip form.
std::string iterations_csv(const TrainHistory& h);
std::string epochs_csv(const TrainHistory& h);
std::vector<IterationRecord> parse_iterations_csv(const std::string& csv);
std::vector<EpochRecord> parse_epochs_csv(const std::string& csv);

/// gamma0 / (1 + gamma0 * lambda * t), times every drop factor whose iteration <= t.
double lr_schedule(double gamma0, double lambda, std::uint64_t t,
                   std::span<const LrDrop> drops = {});

/// w <- w - gamma * (g + lambda * w); bias tensors get no decay.
void sgd_step(const ArchSpec& arch, ModelParams& params, const ModelParams& grads, double gamma,
              double lambda);

/// Momentum form: v <- mu * v + (g + lambda * w); w <- w - gamma * v.
/// `velocity` starts as zeros shaped like `params`. With mu = 0 this is sgd_step.
void sgd_step(const ArchSpec& arch, ModelParams& params, const ModelParams& grads, double gamma,
              double lambda, double momentum, ModelParams& velocity);

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::uint64_t iteration, double loss);
  std::uint64_t iteration() const { return iteration_; }

 private:
  std::uint64_t iteration_;
};

struct TrainResult {
  ModelParams params;
  TrainHistory history;
  std::optional<ZcaTransform> zca;  // set when config.zca; fit on the training set only
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minibatch SGD. Every random choice comes from streams derived from
/// config.seed (init, shuffle, augmentation, dropout), and all reductions run
/// in a fixed order, so the result is bit-identical across runs and thread
/// counts. The last batch of an epoch may be smaller.
TrainResult train(const ArchSpec& arch, const Dataset& train_set, const Dataset* val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

struct EvalResult {
  double top1 = 0.0;
  double topk = 0.0;
  std::size_t k = 5;
  std::size_t count = 0;
};

/// Single center view, no augmentation or dropout.
EvalResult evaluate(const ArchSpec& arch, const ModelParams& params, const Dataset& data,
                    std::size_t k = 5, std::size_t batch = 100);

/// Samples [begin, begin + count) as an (n, c, h, w) tensor.
Tensor batch_tensor(const Dataset& data, std::size_t begin, std::size_t count);

}  // namespace lrcnn
