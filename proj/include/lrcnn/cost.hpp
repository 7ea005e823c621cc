#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lrcnn/arch.hpp"

namespace lrcnn {

/// Per-image forward cost of one layer. Only filter multiply-accumulates count:
/// bias adds, pooling comparisons and activations are 0 MACs.
struct CostRow {
  std::string layer;
  InputShape out_shape;
  std::uint64_t macs = 0;
  std::uint64_t params = 0;
  friend bool operator==(const CostRow&, const CostRow&) = default;
};

struct CostReport {
  std::string model;
  InputShape input;
  std::vector<CostRow> rows;
  std::uint64_t total_macs = 0;
  std::uint64_t total_params = 0;
  friend bool operator==(const CostReport&, const CostReport&) = default;
};

/// MACs of a conv layer: H_out * W_out * d * kh * kw * c.
std::uint64_t conv_macs(std::size_t out_h, std::size_t out_w, std::size_t d, std::size_t kh,
                        std::size_t kw, std::size_t c);

/// Per-output-pixel MACs of the three layer designs (c inputs, d outputs,
/// k x k filters, m intermediate maps).
std::uint64_t full_rank_pixel_macs(std::size_t c, std::size_t d, std::size_t k);
std::uint64_t separable_pixel_macs(std::size_t c, std::size_t d, std::size_t m, std::size_t k);
std::uint64_t composite_join_pixel_macs(std::size_t c, std::size_t d, std::size_t m, std::size_t k);

/// Validates at `input` (defaults to the spec's own input) and counts every layer.
CostReport analyze(const ArchSpec& arch, std::optional<InputShape> input = std::nullopt);

struct Savings {
  double mac_savings = 0.0;    // 1 - b.total_macs / a.total_macs
  double param_savings = 0.0;  // 1 - b.total_params / a.total_params
};

Savings compare(const CostReport& a, const CostReport& b);

/// Header `layer,out_shape,macs,params`, one row per layer, `total` row last.
std::string report_csv(const CostReport& report);
CostReport parse_report_csv(const std::string& csv);

/// Layers grouped by the name prefix before '-' (conv1, conv3a, fc6, ...),
/// with baseline and candidate MACs side by side. Used to attribute a
/// savings figure to individual stages.
std::string stage_diff_table(const CostReport& baseline, const CostReport& candidate);

}  // namespace lrcnn
