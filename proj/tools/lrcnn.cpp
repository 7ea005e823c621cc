// lrcnn: command-line front end. Every command writes CSV to stdout (or to
// --out) and exits nonzero with a single "error: ..." line on failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "lrcnn/checkpoint.hpp"
#include "lrcnn/cifar.hpp"
#include "lrcnn/composite.hpp"
#include "lrcnn/cost.hpp"
#include "lrcnn/format.hpp"
#include "lrcnn/gradcheck.hpp"
#include "lrcnn/init.hpp"
#include "lrcnn/keyvalue.hpp"
#include "lrcnn/train.hpp"
#include "lrcnn/zoo.hpp"

namespace {

using namespace lrcnn;

constexpr double kGradTolerance = 1e-6;

// A built-in model name, or a path to an architecture file.
ArchSpec resolve_model(const std::string& name) {
  if (std::filesystem::is_regular_file(name)) return load_arch_text(read_text_file(name));
  return build_any(name);
}

std::string zca_path(const std::string& ckpt) { return ckpt + ".zca"; }

int cmd_models_list() {
  for (const auto& n : model_names()) std::cout << n << "\n";
  return 0;
}

void print_savings(const std::string& baseline, const CostReport& base, const CostReport& cand) {
  const Savings s = compare(base, cand);
  std::cout << baseline << "," << cand.model << "," << format_double(s.mac_savings) << ","
            << format_double(s.param_savings) << "\n";
}

int cmd_analyze(const std::string& model, const std::string& input, const std::string& compare_to) {
  const InputShape in = parse_input_shape(input);
  const CostReport report = analyze(resolve_model(model), in);
  std::cout << "# report " << report.model << "\n" << report_csv(report);
  std::optional<CostReport> other;
  if (!compare_to.empty()) {
    other = analyze(resolve_model(compare_to), in);
    std::cout << "# report " << other->model << "\n" << report_csv(*other);
  }
  // VGG variants are always compared against both reference baselines, since
  // "the original" and "our baseline" name different networks.
  const auto vgg = vgg_model_names();
  const bool is_variant = std::find(vgg.begin(), vgg.end(), report.model) != vgg.end();
  if (!other && !is_variant) return 0;

  std::cout << "# savings\nbaseline,candidate,mac_savings,param_savings\n";
  if (other) print_savings(other->model, *other, report);
  if (!is_variant) return 0;
  for (const std::string base : {"vgg11", "vgg-gmp"}) {
    if ((other && base == other->model) || base == report.model) continue;
    try {
      print_savings(base, analyze(build(base), in), report);
    } catch (const ArchError&) {
      std::cout << "# " << base << " not defined at " << input << "\n";
    }
  }
  return 0;
}

int cmd_grad_check(std::uint64_t seed, std::size_t cases) {
  const auto rows = run_gradcheck({seed, cases, 1e-5});
  std::cout << gradcheck_csv(rows);
  for (const auto& r : rows) {
    if (!(r.max_error < kGradTolerance)) {
      std::cerr << "error: " << r.op << " max relative error " << format_double(r.max_error)
                << " exceeds " << format_double(kGradTolerance) << "\n";
      return 1;
    }
  }
  return 0;
}

int cmd_init_probe(const std::string& model, std::size_t trials, std::uint64_t seed,
                   const std::string& scheme, double sigma_scale, std::size_t batch) {
  ProbeOptions o;
  o.trials = trials;
  o.seed = seed;
  o.scheme = parse_init_scheme(scheme);
  o.sigma_scale = sigma_scale;
  o.batch = batch;
  const auto rows = variance_probe(resolve_model(model), o);
  std::cout << probe_csv(rows);
  return 0;
}

int cmd_train(const std::string& model, const std::string& data, const std::string& config_path,
              const std::string& out) {
  const ArchSpec arch = resolve_model(model);
  const TrainConfig config = parse_train_config(read_text_file(config_path));
  const CifarSplit split = load_cifar10(data);
  std::cout << "epoch,train_acc,val_acc\n" << std::flush;
  const TrainResult r = train(arch, split.train, &split.test, config, [](const EpochRecord& e) {
    std::cout << e.epoch << "," << format_double(e.train_acc) << "," << format_double(e.val_acc) << "\n"
              << std::flush;
  });
  save_checkpoint(arch, r.params, out);
  write_text_file(out + ".iterations.csv", iterations_csv(r.history));
  write_text_file(out + ".epochs.csv", epochs_csv(r.history));
  if (r.zca) {
    save_zca(*r.zca, zca_path(out));
  } else if (std::filesystem::exists(zca_path(out))) {
    std::filesystem::remove(zca_path(out));
  }
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data, std::size_t k) {
  const Checkpoint c = load_checkpoint(ckpt);
  Dataset test = load_cifar10_file(data + "/test_batch.bin");
  if (std::filesystem::exists(zca_path(ckpt))) zca_apply(load_zca(zca_path(ckpt)), test);
  const EvalResult r = evaluate(c.arch, c.params, test, k);
  std::cout << "top1,topk,k,count\n"
            << format_double(r.top1) << "," << format_double(r.topk) << "," << r.k << "," << r.count << "\n";
  return 0;
}

int cmd_filters_export(const std::string& ckpt, std::size_t layer, const std::string& out) {
  const Checkpoint c = load_checkpoint(ckpt);
  if (layer >= c.arch.layers.size()) {
    throw std::invalid_argument("layer " + std::to_string(layer) + " out of range (model has " +
                                std::to_string(c.arch.layers.size()) + " layers)");
  }
  const auto* comp = std::get_if<CompositeLayer>(&c.arch.layers[layer].kind);
  if (!comp) throw std::invalid_argument("layer " + std::to_string(layer) + " is not a composite layer");
  CompositeConvSpec spec = comp->spec;
  CompositeParams params = c.params.layers[layer].conv;
  if (!spec.join) {
    // A join may also be the following 1x1 conv layer.
    const ConvLayer* next = layer + 1 < c.arch.layers.size()
                                ? std::get_if<ConvLayer>(&c.arch.layers[layer + 1].kind)
                                : nullptr;
    if (!next || next->kh != 1 || next->kw != 1 || !(next->stride == Stride2{1, 1})) {
      throw std::invalid_argument("layer " + std::to_string(layer) +
                                  " has no join (neither embedded nor a following 1x1 conv)");
    }
    spec.join = next->d;
    params.join = c.params.layers[layer + 1].conv.groups.at(0);
  }
  write_text_file(out, effective_filters_csv(effective_filters(spec, params)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank composite CNN toolkit"};
  app.require_subcommand(1);

  auto* models = app.add_subcommand("models", "Model zoo");
  models->require_subcommand(1);
  auto* models_list = models->add_subcommand("list", "Print the built-in model names");

  std::string model, input, compare_to;
  auto* analyze_cmd = app.add_subcommand("analyze", "Per-layer MAC and parameter report");
  analyze_cmd->add_option("--model", model, "Model name or architecture file")->required();
  analyze_cmd->add_option("--input", input, "Input shape CxHxW")->required();
  analyze_cmd->add_option("--compare", compare_to, "Second model to compare against");

  std::uint64_t seed = 0;
  std::size_t cases = 100;
  auto* grad_cmd = app.add_subcommand("grad-check", "Finite-difference gradient suite");
  grad_cmd->add_option("--seed", seed, "Random seed");
  grad_cmd->add_option("--cases", cases, "Random shapes per op")->check(CLI::PositiveNumber);

  std::size_t trials = 20, batch = 1;
  std::string scheme = "composite-he";
  double sigma_scale = 1.0;
  auto* probe_cmd = app.add_subcommand("init-probe", "Backward variance ratio per weighted layer");
  probe_cmd->add_option("--model", model, "Model name or architecture file")->required();
  probe_cmd->add_option("--trials", trials, "Independent initializations")->required()->check(CLI::PositiveNumber);
  probe_cmd->add_option("--seed", seed, "Random seed")->required();
  probe_cmd->add_option("--scheme", scheme, "he-fanin or composite-he");
  probe_cmd->add_option("--sigma-scale", sigma_scale, "Multiplier on every weight std");
  probe_cmd->add_option("--batch", batch, "Samples per trial")->check(CLI::PositiveNumber);

  std::string data, config, out, ckpt;
  auto* train_cmd = app.add_subcommand("train", "Train on CIFAR-10 binary batches");
  train_cmd->add_option("--model", model, "Model name or architecture file")->required();
  train_cmd->add_option("--data", data, "Directory of CIFAR-10 binary batches")->required();
  train_cmd->add_option("--config", config, "Training config file")->required();
  train_cmd->add_option("--out", out, "Checkpoint path")->required();

  std::size_t topk = 5;
  auto* eval_cmd = app.add_subcommand("eval", "Top-1/top-k accuracy on the CIFAR-10 test batch");
  eval_cmd->add_option("--ckpt", ckpt, "Checkpoint path")->required();
  eval_cmd->add_option("--data", data, "Directory of CIFAR-10 binary batches")->required();
  eval_cmd->add_option("--topk", topk, "k for top-k accuracy")->check(CLI::PositiveNumber);

  std::size_t layer = 0;
  auto* filters_cmd = app.add_subcommand("filters-export", "Effective cross-shaped kernels of a composite layer");
  filters_cmd->add_option("--ckpt", ckpt, "Checkpoint path")->required();
  filters_cmd->add_option("--layer", layer, "Layer index")->required();
  filters_cmd->add_option("--out", out, "Output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    if (models_list->parsed()) return cmd_models_list();
    if (analyze_cmd->parsed()) return cmd_analyze(model, input, compare_to);
    if (grad_cmd->parsed()) return cmd_grad_check(seed, cases);
    if (probe_cmd->parsed()) return cmd_init_probe(model, trials, seed, scheme, sigma_scale, batch);
    if (train_cmd->parsed()) return cmd_train(model, data, config, out);
    if (eval_cmd->parsed()) return cmd_eval(ckpt, data, topk);
    if (filters_cmd->parsed()) return cmd_filters_export(ckpt, layer, out);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& ch : msg) {
      if (ch == '\n') ch = ' ';
    }
    std::cerr << "error: " << msg << "\n";
    return 1;
  }
  return 1;
}
