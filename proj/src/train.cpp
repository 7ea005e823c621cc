#include "lrcnn/train.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "lrcnn/format.hpp"
#include "lrcnn/keyvalue.hpp"

namespace lrcnn {

namespace {

// Independent random streams of one training run.
enum Stream : std::uint64_t { kInitStream = 0, kShuffleStream = 1, kAugmentStream = 2, kDropoutStream = 3 };

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("expected a boolean, got '" + v + "'");
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

// Rank of the label logit: how many classes score strictly higher.
std::size_t label_rank(const Tensor& logits, std::size_t sample, std::size_t label) {
  const std::size_t classes = logits.shape().c;
  const double* row = logits.data().data() + sample * classes;
  std::size_t rank = 0;
  for (std::size_t j = 0; j < classes; ++j) rank += row[j] > row[label];
  return rank;
}

std::vector<std::string> csv_lines(const std::string& csv, const std::string& header) {
  auto lines = split(csv, '\n');
  if (lines.empty() || lines[0] != header) throw ParseError("csv: expected header '" + header + "'");
  lines.erase(lines.begin());
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

}  // namespace

void validate(const TrainConfig& c) {
  if (!(c.gamma0 > 0.0) || !std::isfinite(c.gamma0)) throw std::invalid_argument("gamma0 must be > 0");
  if (!(c.lambda >= 0.0) || !std::isfinite(c.lambda)) throw std::invalid_argument("lambda must be >= 0");
  if (c.batch < 1) throw std::invalid_argument("batch must be >= 1");
  if (c.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
  if (!(c.zca_epsilon >= 0.0)) throw std::invalid_argument("zca_epsilon must be >= 0");
  if (c.topk < 1) throw std::invalid_argument("topk must be >= 1");
  for (const auto& d : c.manual_lr_drops) {
    if (!(d.factor > 0.0)) throw std::invalid_argument("lr_drop factor must be > 0");
  }
}

TrainConfig parse_train_config(const std::string& text) {
  TrainConfig c;
  for (const auto& e : parse_key_values(text)) {
    const std::string where = "config line " + std::to_string(e.line) + ": ";
    try {
      if (e.key == "gamma0") c.gamma0 = parse_double(e.value);
      else if (e.key == "lambda") c.lambda = parse_double(e.value);
      else if (e.key == "batch") c.batch = parse_unsigned(e.value);
      else if (e.key == "epochs") c.epochs = parse_unsigned(e.value);
      else if (e.key == "seed") c.seed = parse_unsigned(e.value);
      else if (e.key == "momentum") c.momentum = parse_double(e.value);
      else if (e.key == "init") c.init = parse_init_scheme(e.value);
      else if (e.key == "crop") c.augment.crop = parse_bool(e.value);
      else if (e.key == "mirror") c.augment.mirror = parse_bool(e.value);
      else if (e.key == "pad") c.augment.pad = parse_unsigned(e.value);
      else if (e.key == "zca") c.zca = parse_bool(e.value);
      else if (e.key == "zca_epsilon") c.zca_epsilon = parse_double(e.value);
      else if (e.key == "max_iterations") c.max_iterations = parse_unsigned(e.value);
      else if (e.key == "train_limit") c.train_limit = parse_unsigned(e.value);
      else if (e.key == "topk") c.topk = parse_unsigned(e.value);
      else if (e.key == "lr_drop") {
        const auto f = split_fields(e.value);
        if (f.size() != 2) throw std::invalid_argument("lr_drop needs 'ITERATION FACTOR'");
        c.manual_lr_drops.push_back({parse_unsigned(f[0]), parse_double(f[1])});
      } else {
        throw std::invalid_argument("unknown key '" + e.key + "'");
      }
    } catch (const std::invalid_argument& ex) {
      throw ParseError(where + ex.what());
    }
  }
  try {
    validate(c);
  } catch (const std::invalid_argument& ex) {
    throw ParseError(std::string("config: ") + ex.what());
  }
  return c;
}

std::string format_train_config(const TrainConfig& c) {
  std::string s;
  auto kv = [&](const char* k, const std::string& v) { s += std::string(k) + " = " + v + "\n"; };
  kv("gamma0", format_double(c.gamma0));
  kv("lambda", format_double(c.lambda));
  kv("batch", std::to_string(c.batch));
  kv("epochs", std::to_string(c.epochs));
  kv("seed", std::to_string(c.seed));
  kv("momentum", format_double(c.momentum));
  kv("init", to_string(c.init));
  kv("crop", bool_text(c.augment.crop));
  kv("mirror", bool_text(c.augment.mirror));
  kv("pad", std::to_string(c.augment.pad));
  kv("zca", bool_text(c.zca));
  kv("zca_epsilon", format_double(c.zca_epsilon));
  kv("max_iterations", std::to_string(c.max_iterations));
  kv("train_limit", std::to_string(c.train_limit));
  kv("topk", std::to_string(c.topk));
  for (const auto& d : c.manual_lr_drops) {
    kv("lr_drop", std::to_string(d.iteration) + " " + format_double(d.factor));
  }
  return s;
}

bool identical(const TrainHistory& a, const TrainHistory& b) {
  if (a.iterations.size() != b.iterations.size() || a.epochs.size() != b.epochs.size()) return false;
  for (std::size_t i = 0; i < a.iterations.size(); ++i) {
    const auto &x = a.iterations[i], &y = b.iterations[i];
    if (x.t != y.t || !same_bits(x.gamma, y.gamma) || !same_bits(x.loss, y.loss)) return false;
  }
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    const auto &x = a.epochs[i], &y = b.epochs[i];
    if (x.epoch != y.epoch || !same_bits(x.train_acc, y.train_acc) || !same_bits(x.val_acc, y.val_acc)) {
      return false;
    }
  }
  return true;
}

std::string iterations_csv(const TrainHistory& h) {
  std::string s = "t,gamma,loss\n";
  for (const auto& r : h.iterations) {
    s += std::to_string(r.t) + "," + format_double(r.gamma) + "," + format_double(r.loss) + "\n";
  }
  return s;
}

std::string epochs_csv(const TrainHistory& h) {
  std::string s = "epoch,train_acc,val_acc\n";
  for (const auto& r : h.epochs) {
    s += std::to_string(r.epoch) + "," + format_double(r.train_acc) + "," + format_double(r.val_acc) + "\n";
  }
  return s;
}

std::vector<IterationRecord> parse_iterations_csv(const std::string& csv) {
  std::vector<IterationRecord> out;
  for (const auto& line : csv_lines(csv, "t,gamma,loss")) {
    const auto f = split(line, ',');
    if (f.size() != 3) throw ParseError("iterations csv: expected 3 fields in '" + line + "'");
    out.push_back({parse_unsigned(f[0]), parse_double(f[1]), parse_double(f[2])});
  }
  return out;
}

std::vector<EpochRecord> parse_epochs_csv(const std::string& csv) {
  std::vector<EpochRecord> out;
  for (const auto& line : csv_lines(csv, "epoch,train_acc,val_acc")) {
    const auto f = split(line, ',');
    if (f.size() != 3) throw ParseError("epochs csv: expected 3 fields in '" + line + "'");
    out.push_back({parse_unsigned(f[0]), parse_double(f[1]), parse_double(f[2])});
  }
  return out;
}

double lr_schedule(double gamma0, double lambda, std::uint64_t t, std::span<const LrDrop> drops) {
  double g = gamma0 / (1.0 + gamma0 * lambda * static_cast<double>(t));
  for (const auto& d : drops) {
    if (d.iteration <= t) g *= d.factor;
  }
  return g;
}

void sgd_step(const ArchSpec& arch, ModelParams& params, const ModelParams& grads, double gamma,
              double lambda) {
  const auto w = param_refs(arch, params);
  const auto g = param_refs(arch, grads);
  for (std::size_t r = 0; r < w.size(); ++r) {
    const double decay = is_bias(w[r].role) ? 0.0 : lambda;
    auto values = w[r].values;
    const auto grad = g[r].values;
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= gamma * (grad[i] + decay * values[i]);
  }
}

void sgd_step(const ArchSpec& arch, ModelParams& params, const ModelParams& grads, double gamma,
              double lambda, double momentum, ModelParams& velocity) {
  if (momentum == 0.0) {
    sgd_step(arch, params, grads, gamma, lambda);
    return;
  }
  const auto w = param_refs(arch, params);
  const auto g = param_refs(arch, grads);
  const auto v = param_refs(arch, velocity);
  for (std::size_t r = 0; r < w.size(); ++r) {
    const double decay = is_bias(w[r].role) ? 0.0 : lambda;
    auto values = w[r].values;
    auto vel = v[r].values;
    const auto grad = g[r].values;
    for (std::size_t i = 0; i < values.size(); ++i) {
      vel[i] = momentum * vel[i] + (grad[i] + decay * values[i]);
      values[i] -= gamma * vel[i];
    }
  }
}

DivergenceError::DivergenceError(std::uint64_t iteration, double loss)
    : std::runtime_error("training diverged at iteration " + std::to_string(iteration) + " (loss " +
                         format_double(loss) + ")"),
      iteration_(iteration) {}

Tensor batch_tensor(const Dataset& data, std::size_t begin, std::size_t count) {
  const InputShape& s = data.shape;
  Tensor t(Shape{count, s.c, s.h, s.w});
  auto out = t.data();
  const std::size_t n = data.image_size();
  for (std::size_t i = 0; i < count; ++i) {
    const auto img = data.image(begin + i);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = img[j];
  }
  return t;
}

TrainResult train(const ArchSpec& arch, const Dataset& train_set, const Dataset* val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  validate(config);
  validate_or_throw(arch);
  if (!(train_set.shape == arch.input)) {
    throw std::invalid_argument("train: data is " + format_input_shape(train_set.shape) +
                                ", architecture expects " + format_input_shape(arch.input));
  }
  const std::size_t classes = infer_shapes(arch).back().c;
  for (const auto label : train_set.labels) {
    if (label >= classes) {
      throw std::invalid_argument("train: label " + std::to_string(label) + " but the network has " +
                                  std::to_string(classes) + " outputs");
    }
  }

  TrainResult result;
  Dataset data = config.train_limit ? train_set.head(config.train_limit) : train_set;
  if (data.size() == 0) throw std::invalid_argument("train: empty training set");
  std::optional<Dataset> val;
  if (val_set) val = *val_set;
  if (config.zca) {
    result.zca = zca_fit(data, config.zca_epsilon);
    zca_apply(*result.zca, data);
    if (val) zca_apply(*result.zca, *val);
  }

  result.params = init_network(arch, {config.init, Rng::derive(config.seed, kInitStream), 1.0});
  ModelParams velocity = make_params(arch);
  Rng shuffle_rng(Rng::derive(config.seed, kShuffleStream));
  Rng augment_rng(Rng::derive(config.seed, kAugmentStream));
  Rng dropout_rng(Rng::derive(config.seed, kDropoutStream));

  const InputShape& s = data.shape;
  const std::size_t image = data.image_size();
  std::vector<std::size_t> order(data.size());
  std::uint64_t t = 0;
  bool capped = false;
  for (std::size_t epoch = 0; epoch < config.epochs && !capped; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    std::size_t correct = 0, seen = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch) {
      if (config.max_iterations && t >= config.max_iterations) {
        capped = true;
        break;
      }
      const std::size_t n = std::min(config.batch, order.size() - begin);
      Tensor input(Shape{n, s.c, s.h, s.w});
      std::vector<std::uint8_t> labels(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = order[begin + i];
        labels[i] = data.labels[idx];
        crop_and_mirror(data.image(idx), s, config.augment.pad, draw_augment(config.augment, augment_rng),
                        input.data().subspan(i * image, image));
      }
      const ForwardTrace trace = forward(arch, result.params, input, {true, &dropout_rng});
      const LossResult loss = softmax_xent(trace.output, labels);
      if (!std::isfinite(loss.loss)) throw DivergenceError(t, loss.loss);
      for (std::size_t i = 0; i < n; ++i) correct += label_rank(trace.output, i, labels[i]) == 0;
      seen += n;

      const BackwardResult grads = backward(arch, result.params, trace, loss.grad_logits);
      const double gamma = lr_schedule(config.gamma0, config.lambda, t, config.manual_lr_drops);
      sgd_step(arch, result.params, grads.grads, gamma, config.lambda, config.momentum, velocity);
      result.history.iterations.push_back({t, gamma, loss.loss});
      ++t;
    }
    if (seen == 0) break;
    EpochRecord rec{epoch, static_cast<double>(correct) / static_cast<double>(seen),
                    std::numeric_limits<double>::quiet_NaN()};
    if (val) rec.val_acc = evaluate(arch, result.params, *val, config.topk).top1;
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

EvalResult evaluate(const ArchSpec& arch, const ModelParams& params, const Dataset& data,
                    std::size_t k, std::size_t batch) {
  if (k < 1 || batch < 1) throw std::invalid_argument("evaluate: k and batch must be >= 1");
  EvalResult r;
  r.k = k;
  r.count = data.size();
  if (data.size() == 0) return r;
  std::size_t top1 = 0, topk = 0;
  for (std::size_t begin = 0; begin < data.size(); begin += batch) {
    const std::size_t n = std::min(batch, data.size() - begin);
    const Tensor logits = predict(arch, params, batch_tensor(data, begin, n));
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t rank = label_rank(logits, i, data.labels[begin + i]);
      top1 += rank == 0;
      topk += rank < k;
    }
  }
  r.top1 = static_cast<double>(top1) / static_cast<double>(data.size());
  r.topk = static_cast<double>(topk) / static_cast<double>(data.size());
  return r;
}

}  // namespace lrcnn
