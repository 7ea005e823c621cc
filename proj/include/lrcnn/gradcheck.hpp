#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lrcnn {

/// |a - n| / max(|a|, |n|, 1): relative for large gradients, absolute below 1,
/// so entries that are zero in exact arithmetic do not divide roundoff by roundoff.
double gradcheck_error(double analytic, double numeric);

struct GradCheckOptions {
  std::uint64_t seed = 0;
  std::size_t cases = 100;  // random shapes per op
  double epsilon = 1e-5;    // central-difference step
};

struct GradCheckRow {
  std::string op;
  std::size_t cases = 0;
  std::size_t entries = 0;  // gradient entries compared
  double max_error = 0.0;
};

/// Compares every analytic gradient (inputs and parameters) of conv,
/// composite, composite_join, maxpool, global_maxpool, relu, dense and
/// softmax_xent against central differences of a random linear functional of
/// the op's output. Inputs within 1e-3 of a ReLU kink are resampled and pooling
/// inputs are drawn with distinct values, so no difference straddles a kink.
std::vector<GradCheckRow> run_gradcheck(const GradCheckOptions& options);

/// Header `op,cases,entries,max_rel_error`.
std::string gradcheck_csv(std::span<const GradCheckRow> rows);

}  // namespace lrcnn
