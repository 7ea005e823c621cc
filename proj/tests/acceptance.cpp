// Acceptance criteria 1-15. Run with no arguments for all of them, or pass
// criterion numbers. Prints one PASS/FAIL line per criterion and exits 1 if
// any failed. Tolerances are fixed here, next to each check.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "lrcnn/arch.hpp"
#include "lrcnn/checkpoint.hpp"
#include "lrcnn/cifar.hpp"
#include "lrcnn/cost.hpp"
#include "lrcnn/gradcheck.hpp"
#include "lrcnn/init.hpp"
#include "lrcnn/network.hpp"
#include "lrcnn/reference.hpp"
#include "lrcnn/train.hpp"
#include "lrcnn/zca.hpp"
#include "lrcnn/zoo.hpp"
#include "support/synthetic.hpp"

#ifndef LRCNN_CIFAR_DIR
#define LRCNN_CIFAR_DIR ""
#endif

using namespace lrcnn;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string pct(double fraction) { return fmt("%.1f%%", 100.0 * fraction); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Independent cost oracle for the VGG family at 3x224x224. Each model is
// spelled out from its table column as (side, kernel, c, d) terms; nothing
// here reads the zoo or the analyzer.

struct OracleCost {
  std::uint64_t macs = 0;
  std::uint64_t params = 0;

  void conv(std::uint64_t side, std::uint64_t kh, std::uint64_t kw, std::uint64_t c, std::uint64_t d) {
    macs += side * side * kh * kw * c * d;
    params += kh * kw * c * d + d;
  }
  void dense(std::uint64_t in, std::uint64_t out) {
    macs += in * out;
    params += in * out + out;
  }
};

struct TableRow {
  std::uint64_t width;  // filters of the full-rank row
  std::uint64_t side;   // output side at 224 input, stride 1
};

// conv1, conv2, conv3a, conv3b, conv4a, conv4b, conv5a, conv5b.
constexpr TableRow kRows[] = {{64, 224}, {128, 112}, {256, 56}, {256, 56},
                              {512, 28}, {512, 28},  {512, 14}, {512, 14}};

void classifier(OracleCost& o, std::uint64_t fc6_in) {
  o.dense(fc6_in, 4096);
  o.dense(4096, 4096);
  o.dense(4096, 1000);
}

OracleCost oracle(const std::string& model) {
  OracleCost o;
  std::uint64_t c = 3;
  for (const TableRow& r : kRows) {
    const std::uint64_t w = r.width, s = r.side;
    if (model == "vgg11" || model == "vgg-gmp") {
      o.conv(s, 3, 3, c, w);
      c = w;
    } else if (model == "vgg-gmp-sf") {
      o.conv(s, 1, 3, c, w);
      o.conv(s, 3, 1, w, w);
      c = w;
    } else if (model == "vgg-gmp-lr") {
      o.conv(s, 3, 1, c, w / 2);
      o.conv(s, 1, 3, c, w / 2);
      c = w;
    } else if (model == "vgg-gmp-lr-2x") {
      o.conv(s, 3, 1, c, w);
      o.conv(s, 1, 3, c, w);
      c = 2 * w;
    } else if (model == "vgg-gmp-lr-join") {
      o.conv(s, 3, 1, c, w / 2);
      o.conv(s, 1, 3, c, w / 2);
      o.conv(s, 1, 1, w, w);
      c = w;
    } else if (model == "vgg-gmp-lr-lde") {
      // Stride 2 in conv1 halves every later side; 1x1 embeddings halve width.
      o.conv(s / 2, 3, 1, c, w / 2);
      o.conv(s / 2, 1, 3, c, w / 2);
      o.conv(s / 2, 1, 1, w, w / 2);
      c = w / 2;
    } else if (model == "vgg-gmp-lr-join-wfull") {
      o.conv(s, 3, 1, c, 3 * w / 8);
      o.conv(s, 1, 3, c, 3 * w / 8);
      o.conv(s, 3, 3, c, w / 4);
      o.conv(s, 1, 1, w, w);
      c = w;
    } else {
      throw std::invalid_argument("oracle: no table column for " + model);
    }
  }
  classifier(o, model == "vgg11" ? 7 * 7 * 512 : c);
  return o;
}

// Analyzer report for a model, after checking it against the oracle. A
// mismatch is a failure of its own: the ratio checks are only meaningful when
// the analyzer and the table agree.
struct Costed {
  CostReport report;
  bool matches_oracle = false;
  std::string note;
};

Costed costed(const std::string& model) {
  Costed c;
  c.report = analyze(build(model), InputShape{3, 224, 224});
  const OracleCost o = oracle(model);
  c.matches_oracle = o.macs == c.report.total_macs && o.params == c.report.total_params;
  if (!c.matches_oracle) {
    c.note = model + " analyzer " + std::to_string(c.report.total_macs) + " MACs / " +
             std::to_string(c.report.total_params) + " params vs oracle " + std::to_string(o.macs) + " / " +
             std::to_string(o.params);
  }
  return c;
}

void print_stage_table(const Costed& base, const Costed& cand) {
  std::printf("# stage diff %s -> %s\n%s", base.report.model.c_str(), cand.report.model.c_str(),
              stage_diff_table(base.report, cand.report).c_str());
}

// Savings of `cand` against `base` within `target` +- `tol` (fractions).
Verdict savings_check(const std::string& base_name, const std::string& cand_name, double target, double tol) {
  const Costed base = costed(base_name), cand = costed(cand_name);
  const double s = compare(base.report, cand.report).mac_savings;
  Verdict v;
  v.pass = base.matches_oracle && cand.matches_oracle && std::abs(s - target) <= tol;
  v.detail = cand_name + " vs " + base_name + " MAC savings " + pct(s) + ", target " + pct(target) + " +- " +
             fmt("%.0f pp", 100.0 * tol);
  for (const Costed* c : {&base, &cand}) {
    if (!c->matches_oracle) v.detail += "; ORACLE MISMATCH " + c->note;
  }
  if (!v.pass) print_stage_table(base, cand);
  return v;
}

// ---------------------------------------------------------------------------

Verdict criterion_1() {
  const Costed vgg = costed("vgg11"), gmp = costed("vgg-gmp");
  const double ratio = static_cast<double>(gmp.report.total_params) / static_cast<double>(vgg.report.total_params);
  Verdict v;
  v.pass = vgg.matches_oracle && gmp.matches_oracle && ratio <= 0.25;
  v.detail = "vgg-gmp params " + std::to_string(gmp.report.total_params) + " = " + pct(ratio) + " of vgg11 " +
             std::to_string(vgg.report.total_params) + " (limit 25%)";
  return v;
}

Verdict criterion_2() { return savings_check("vgg11", "vgg-gmp-sf", 0.14, 0.03); }

Verdict criterion_3() {
  const Costed gmp = costed("vgg-gmp"), lr = costed("vgg-gmp-lr");
  const double ratio = static_cast<double>(lr.report.total_macs) / static_cast<double>(gmp.report.total_macs);
  Verdict v;
  v.pass = gmp.matches_oracle && lr.matches_oracle && std::abs(ratio - 1.0 / 3.0) <= 0.05;
  v.detail = "vgg-gmp-lr MACs = " + pct(ratio) + " of vgg-gmp, target 33.3% +- 5 pp";
  if (!v.pass) print_stage_table(gmp, lr);
  return v;
}

Verdict criterion_4() {
  // The referent of "the original" is ambiguous; either baseline may match.
  const Costed vgg = costed("vgg11"), gmp = costed("vgg-gmp"), join = costed("vgg-gmp-lr-join");
  const double s_vgg = compare(vgg.report, join.report).mac_savings;
  const double s_gmp = compare(gmp.report, join.report).mac_savings;
  const bool ok_vgg = std::abs(s_vgg - 0.49) <= 0.05;
  const bool ok_gmp = std::abs(s_gmp - 0.49) <= 0.05;
  Verdict v;
  v.pass = vgg.matches_oracle && gmp.matches_oracle && join.matches_oracle && (ok_vgg || ok_gmp);
  v.detail = "vgg-gmp-lr-join savings vs vgg11 " + pct(s_vgg) + (ok_vgg ? " (matches)" : "") + ", vs vgg-gmp " +
             pct(s_gmp) + (ok_gmp ? " (matches)" : "") + "; target 49% +- 5 pp";
  if (!v.pass) {
    print_stage_table(vgg, join);
    print_stage_table(gmp, join);
  }
  return v;
}

Verdict criterion_5() { return savings_check("vgg-gmp", "vgg-gmp-lr-2x", 0.58, 0.05); }
Verdict criterion_6() { return savings_check("vgg-gmp", "vgg-gmp-lr-join-wfull", 0.16, 0.04); }
Verdict criterion_7() { return savings_check("vgg-gmp", "vgg-gmp-lr-lde", 0.86, 0.04); }

Verdict criterion_8() {
  GradCheckOptions o;
  o.seed = 8;
  o.cases = 100;
  const auto rows = run_gradcheck(o);
  std::printf("%s", gradcheck_csv(rows).c_str());
  Verdict v;
  v.pass = !rows.empty();
  double worst = 0.0;
  std::size_t fewest = o.cases;
  for (const auto& r : rows) {
    worst = std::max(worst, r.max_error);
    fewest = std::min(fewest, r.cases);
    if (!(r.max_error < 1e-6) || r.cases < 100) v.pass = false;
  }
  v.detail = std::to_string(rows.size()) + " ops, >= " + std::to_string(fewest) +
             " cases each, worst relative error " + fmt("%.3g", worst) + " (limit 1e-6)";
  return v;
}

Verdict criterion_9() {
  struct Kernel {
    std::size_t kh, kw;
  };
  const Kernel kernels[] = {{1, 3}, {3, 1}, {1, 7}, {7, 1}, {5, 5}};
  Rng rng(9);
  std::size_t mismatches = 0;
  std::string first_bad;
  for (std::size_t i = 0; i < 50; ++i) {
    const Kernel k = kernels[i % 5];
    const Stride2 s{1 + rng.below(2), 1 + rng.below(2)};
    const Pad2 p{rng.below(k.kh / 2 + 1), rng.below(k.kw / 2 + 1)};
    const std::size_t n = 1 + rng.below(3), c = 1 + rng.below(12), d = 1 + rng.below(20);
    const std::size_t h = k.kh + rng.below(14), w = k.kw + rng.below(14);
    Tensor x({n, c, h, w});
    for (double& v : x.data()) v = rng.normal();
    ConvWeights wt(d, c, k.kh, k.kw);
    for (double& v : wt.weights) v = rng.normal();
    for (double& v : wt.bias) v = rng.normal();
    const Tensor y = conv2d_forward(x, wt, s, p);
    Tensor g(y.shape());
    for (double& v : g.data()) v = rng.normal();
    const GradBundle a = conv2d_backward(x, wt, g, s, p);
    const GradBundle r = reference::conv2d_backward(x, wt, g, s, p);
    const bool same = bitwise_equal(y, reference::conv2d_forward(x, wt, s, p)) &&
                      bitwise_equal(a.grad_input, r.grad_input) &&
                      std::memcmp(a.grad_weights.data(), r.grad_weights.data(), a.grad_weights.size() * 8) == 0 &&
                      std::memcmp(a.grad_bias.data(), r.grad_bias.data(), a.grad_bias.size() * 8) == 0;
    if (!same) {
      ++mismatches;
      if (first_bad.empty()) {
        first_bad = "; first mismatch " + std::to_string(k.kh) + "x" + std::to_string(k.kw) + " stride " +
                    std::to_string(s.y) + "x" + std::to_string(s.x);
      }
    }
  }
  return {mismatches == 0, "50 configurations (1x3, 3x1, 1x7, 7x1, 5x5; strides 1 and 2), forward and backward, " +
                               std::to_string(mismatches) + " differ from the oracle bitwise" + first_bad};
}

ArchSpec composite_stack(std::size_t c, std::size_t depth, std::size_t side) {
  ArchSpec a;
  a.name = "composite-stack";
  a.input = {c, side, side};
  for (std::size_t i = 0; i < depth; ++i) {
    CompositeConvSpec s;
    s.groups = {{1, 3, c / 2, std::nullopt}, {3, 1, c / 2, std::nullopt}};
    a.layers.push_back({"conv" + std::to_string(i + 1), CompositeLayer{s}});
    a.layers.push_back({"relu" + std::to_string(i + 1), ReluLayer{}});
  }
  return a;
}

Verdict criterion_10() {
  const ArchSpec a = composite_stack(64, 10, 16);
  ProbeOptions o;
  o.trials = 20;
  o.seed = 10;
  const auto rows = variance_probe(a, o);
  std::printf("%s", probe_csv(rows).c_str());
  double lo = 1e300, hi = 0.0;
  for (const auto& r : rows) {
    lo = std::min(lo, r.ratio_mean);
    hi = std::max(hi, r.ratio_mean);
  }
  o.sigma_scale = 2.0;
  const double control = geometric_mean_ratio(variance_probe(a, o));
  Verdict v;
  v.pass = rows.size() == 10 && lo >= 0.7 && hi <= 1.4 && control > 1.5;
  v.detail = "10 layers, ratios in [" + fmt("%.3f", lo) + ", " + fmt("%.3f", hi) + "] (band [0.7, 1.4]); 2x sigma " +
             "geometric mean " + fmt("%.2f", control) + " (must exceed 1.5)";
  return v;
}

Verdict criterion_11() {
  const FilterGroup lr[] = {{1, 3, 32, std::nullopt}, {3, 1, 32, std::nullopt}};
  const FilterGroup wf[] = {{1, 3, 24, std::nullopt}, {3, 1, 24, std::nullopt}, {3, 3, 16, std::nullopt}};
  const double a = composite_stddev(lr), b = composite_stddev(wf);
  Verdict v;
  v.pass = std::abs(a - 0.102062) <= 1e-6 && std::abs(b - 0.083333) <= 1e-6;
  v.detail = "[3x1,32 | 1x3,32] -> " + fmt("%.6f", a) + " (0.102062); [3x1,24 | 1x3,24 | 3x3,16] -> " +
             fmt("%.6f", b) + " (0.083333); tolerance 1e-6";
  return v;
}

// ---------------------------------------------------------------------------
// Training.

bool cifar_available() {
  const fs::path dir = LRCNN_CIFAR_DIR;
  if (dir.empty()) return false;
  for (const char* f : {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin", "data_batch_4.bin",
                        "data_batch_5.bin", "test_batch.bin"}) {
    if (!fs::exists(dir / f)) return false;
  }
  return true;
}

struct MemorizeRun {
  TrainResult result;
  double full_loss = 0.0;
  double seconds = 0.0;
  std::string source;
};

// 100 training images, no augmentation, seed pinned. Hyper-parameters are
// fixed for the criterion, not tuned per run.
MemorizeRun memorize() {
  MemorizeRun m;
  Dataset data;
  if (cifar_available()) {
    data = load_cifar10_file((fs::path(LRCNN_CIFAR_DIR) / "data_batch_1.bin").string()).head(100);
    m.source = "first 100 CIFAR-10 training images";
  } else {
    data = testing::synthetic_cifar(100, 12, 1.0);
    m.source = "SYNTHETIC stand-in, CIFAR-10 not found at '" + std::string(LRCNN_CIFAR_DIR) + "'";
  }
  TrainConfig c;
  c.gamma0 = 0.01;
  c.lambda = 0.0;
  c.momentum = 0.9;
  c.batch = 10;
  c.epochs = 50;
  c.max_iterations = 500;
  c.seed = 12;
  c.augment.crop = false;
  c.augment.mirror = false;
  const ArchSpec arch = build_desk("desk-full");
  const auto t0 = std::chrono::steady_clock::now();
  m.result = train(arch, data, nullptr, c);
  const Tensor logits = predict(arch, m.result.params, batch_tensor(data, 0, data.size()));
  m.full_loss = softmax_xent(logits, data.labels).loss;
  m.seconds = seconds_since(t0);
  return m;
}

Verdict criterion_12() {
  const MemorizeRun m = memorize();
  Verdict v;
  v.pass = m.result.history.iterations.size() <= 500 && m.full_loss < 0.05 && m.seconds < 60.0;
  v.detail = "desk-full on " + m.source + ": loss over all 100 images " + fmt("%.4f", m.full_loss) + " after " +
             std::to_string(m.result.history.iterations.size()) + " iterations (limit 0.05 within 500), " +
             fmt("%.1f s", m.seconds) + " (limit 60 s)";
  return v;
}

Verdict criterion_13() {
  const double mac_ratio = static_cast<double>(analyze(build_desk("desk-lr")).total_macs) /
                           static_cast<double>(analyze(build_desk("desk-full")).total_macs);
  if (!cifar_available()) {
    return {false, "CIFAR-10 binaries not found at '" + std::string(LRCNN_CIFAR_DIR) +
                       "' (configure with -DLRCNN_CIFAR_DIR=...); not run. desk-lr MACs are " + pct(mac_ratio) +
                       " of desk-full"};
  }
  const CifarSplit split = load_cifar10(LRCNN_CIFAR_DIR);
  TrainConfig c;
  c.gamma0 = 0.01;
  c.lambda = 5e-4;
  c.momentum = 0.9;
  c.batch = 64;
  c.epochs = 5;
  c.seed = 13;
  c.zca = true;
  const auto t0 = std::chrono::steady_clock::now();
  EvalResult acc[2];
  const char* names[] = {"desk-full", "desk-lr"};
  for (int i = 0; i < 2; ++i) {
    const ArchSpec arch = build_desk(names[i]);
    const TrainResult r = train(arch, split.train, nullptr, c);
    Dataset test = split.test;
    if (r.zca) zca_apply(*r.zca, test);
    acc[i] = evaluate(arch, r.params, test, 5);
    std::printf("# %s top1 %.4f\n", names[i], acc[i].top1);
  }
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = mac_ratio <= 0.6 && acc[0].top1 >= 0.5 && acc[1].top1 >= 0.5 && acc[0].top1 - acc[1].top1 <= 0.04 &&
           secs <= 7200.0;
  v.detail = "top-1 desk-full " + pct(acc[0].top1) + ", desk-lr " + pct(acc[1].top1) + " (each >= 50%, gap <= 4 pp); " +
             "desk-lr MACs " + pct(mac_ratio) + " of desk-full (<= 60%); " + fmt("%.0f s", secs) + " (limit 7200 s)";
  return v;
}

Verdict criterion_14() {
  const MemorizeRun a = memorize(), b = memorize();
  const ArchSpec arch = build_desk("desk-full");
  const bool trace = identical(a.result.history, b.result.history);
  const bool ckpt = encode_checkpoint(arch, a.result.params) == encode_checkpoint(arch, b.result.params);
  return {trace && ckpt, "two seed-pinned runs of the memorization setup: loss traces " +
                             std::string(trace ? "bit-identical" : "DIFFER") + ", checkpoints " +
                             std::string(ckpt ? "byte-identical" : "DIFFER")};
}

Verdict criterion_15() {
  const fs::path dir = fs::temp_directory_path() / "lrcnn_acceptance";
  fs::create_directories(dir);
  std::vector<std::string> problems;

  // Checkpoint: save, load, save.
  {
    const ArchSpec arch = build_desk("desk-lr");
    const ModelParams params = init_network(arch, {InitScheme::kCompositeHe, 15, 1.0});
    const std::string p1 = (dir / "a.lrcf").string(), p2 = (dir / "b.lrcf").string();
    save_checkpoint(arch, params, p1);
    const Checkpoint back = load_checkpoint(p1);
    save_checkpoint(back.arch, back.params, p2);
    if (read_binary_file(p1) != read_binary_file(p2)) problems.push_back("checkpoint bytes differ");
    if (!(back.params == params)) problems.push_back("checkpoint params differ");
  }

  // Architecture files for every built-in model.
  for (const auto& name : model_names()) {
    const ArchSpec a = build_any(name);
    const fs::path p = dir / (name + ".arch");
    std::ofstream(p) << save_arch_text(a);
    std::stringstream text;
    text << std::ifstream(p).rdbuf();
    if (!(load_arch_text(text.str()) == a) || save_arch_text(load_arch_text(text.str())) != text.str()) {
      problems.push_back("arch file round trip failed for " + name);
    }
  }

  // A batch one byte short must fail at the start of its last record.
  {
    auto bytes = encode_cifar10(testing::synthetic_cifar(7, 15));
    bytes.pop_back();
    const fs::path p = dir / "short_batch.bin";
    write_binary_file(p.string(), bytes);
    try {
      load_cifar10_file(p.string());
      problems.push_back("truncated batch accepted");
    } catch (const CifarError& e) {
      if (e.offset() != 6 * kCifarRecordBytes) {
        problems.push_back("truncation reported at offset " + std::to_string(e.offset()));
      }
    }
  }

  std::string detail = "checkpoint save/load/save, arch files for " + std::to_string(model_names().size()) +
                       " models, truncated CIFAR batch";
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

struct Criterion {
  int number;
  const char* name;
  std::function<Verdict()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "vgg-gmp parameter share", criterion_1},
      {2, "vgg-gmp-sf compute vs vgg11", criterion_2},
      {3, "vgg-gmp-lr compute vs vgg-gmp", criterion_3},
      {4, "vgg-gmp-lr-join savings", criterion_4},
      {5, "vgg-gmp-lr-2x savings", criterion_5},
      {6, "vgg-gmp-lr-join-wfull savings", criterion_6},
      {7, "vgg-gmp-lr-lde savings", criterion_7},
      {8, "finite-difference gradients", criterion_8},
      {9, "conv equals nested-loop oracle", criterion_9},
      {10, "initialization variance probe", criterion_10},
      {11, "composite_stddev values", criterion_11},
      {12, "memorization", criterion_12},
      {13, "desk comparison on CIFAR-10", criterion_13},
      {14, "determinism", criterion_14},
      {15, "round trips", criterion_15},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  int failures = 0;
  for (const Criterion& c : criteria()) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.number) == wanted.end()) continue;
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %2d %s: %s: %s\n", c.number, v.pass ? "PASS" : "FAIL", c.name, v.detail.c_str());
    std::fflush(stdout);
    failures += !v.pass;
  }
  return failures == 0 ? 0 : 1;
}
