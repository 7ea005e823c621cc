#include "lrcnn/cost.hpp"

#include <cstdio>
#include <map>
#include <stdexcept>

#include "lrcnn/format.hpp"
#include "lrcnn/keyvalue.hpp"

namespace lrcnn {

std::uint64_t conv_macs(std::size_t out_h, std::size_t out_w, std::size_t d, std::size_t kh,
                        std::size_t kw, std::size_t c) {
  return std::uint64_t{out_h} * out_w * d * kh * kw * c;
}

std::uint64_t full_rank_pixel_macs(std::size_t c, std::size_t d, std::size_t k) {
  return std::uint64_t{d} * k * k * c;
}

std::uint64_t separable_pixel_macs(std::size_t c, std::size_t d, std::size_t m, std::size_t k) {
  return std::uint64_t{m} * (c * k + d * k);
}

std::uint64_t composite_join_pixel_macs(std::size_t c, std::size_t d, std::size_t m, std::size_t k) {
  // m/2 horizontal k x 1 and m/2 vertical 1 x k filters, then d 1x1 filters over m maps.
  return std::uint64_t{m / 2} * k * c + std::uint64_t{m / 2} * k * c + std::uint64_t{d} * m;
}

CostReport analyze(const ArchSpec& spec, std::optional<InputShape> input) {
  ArchSpec arch = spec;
  if (input) arch.input = *input;
  const std::vector<Shape> shapes = infer_shapes(arch);
  CostReport report;
  report.model = arch.name;
  report.input = arch.input;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerSpec& layer = arch.layers[i];
    const Shape& out = shapes[i];
    const std::size_t in_c = i == 0 ? arch.input.c : shapes[i - 1].c;
    CostRow row{layer.name.empty() ? kind_name(layer.kind) + std::to_string(i) : layer.name,
                {out.c, out.h, out.w}, 0, 0};
    if (const auto* c = std::get_if<ConvLayer>(&layer.kind)) {
      row.macs = conv_macs(out.h, out.w, c->d, c->kh, c->kw, in_c);
      row.params = std::uint64_t{c->d} * c->kh * c->kw * in_c + c->d;
    } else if (const auto* c = std::get_if<CompositeLayer>(&layer.kind)) {
      for (const auto& g : c->spec.groups) {
        row.macs += conv_macs(out.h, out.w, g.d, g.kh, g.kw, in_c);
        row.params += std::uint64_t{g.d} * g.kh * g.kw * in_c + g.d;
      }
      if (c->spec.join) {
        const std::size_t m = c->spec.basis_channels();
        row.macs += conv_macs(out.h, out.w, *c->spec.join, 1, 1, m);
        row.params += std::uint64_t{*c->spec.join} * m + *c->spec.join;
      }
    } else if (const auto* d = std::get_if<DenseLayer>(&layer.kind)) {
      row.macs = std::uint64_t{d->in} * d->out;
      row.params = std::uint64_t{d->in} * d->out + d->out;
    }
    report.total_macs += row.macs;
    report.total_params += row.params;
    report.rows.push_back(std::move(row));
  }
  return report;
}

Savings compare(const CostReport& a, const CostReport& b) {
  auto frac = [](std::uint64_t base, std::uint64_t other) {
    if (base == 0) return 0.0;
    return 1.0 - static_cast<double>(other) / static_cast<double>(base);
  };
  return {frac(a.total_macs, b.total_macs), frac(a.total_params, b.total_params)};
}

std::string report_csv(const CostReport& report) {
  std::string out = "layer,out_shape,macs,params\n";
  for (const auto& r : report.rows) {
    out += r.layer + "," + format_input_shape(r.out_shape) + "," + std::to_string(r.macs) + "," +
           std::to_string(r.params) + "\n";
  }
  out += "total,," + std::to_string(report.total_macs) + "," + std::to_string(report.total_params) +
         "\n";
  return out;
}

CostReport parse_report_csv(const std::string& csv) {
  CostReport report;
  const auto lines = split(csv, '\n');
  if (lines.empty() || lines[0] != "layer,out_shape,macs,params") {
    throw ParseError("cost report: missing header");
  }
  bool have_total = false;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    if (have_total) throw ParseError("cost report: rows after totals");
    const auto f = split(lines[i], ',');
    if (f.size() != 4) throw ParseError("cost report: line " + std::to_string(i + 1) + " needs 4 fields");
    if (f[0] == "total") {
      report.total_macs = parse_unsigned(f[2]);
      report.total_params = parse_unsigned(f[3]);
      have_total = true;
    } else {
      report.rows.push_back({f[0], parse_input_shape(f[1]), parse_unsigned(f[2]), parse_unsigned(f[3])});
    }
  }
  if (!have_total) throw ParseError("cost report: missing totals row");
  return report;
}

std::string stage_diff_table(const CostReport& baseline, const CostReport& candidate) {
  auto stages = [](const CostReport& r) {
    std::vector<std::pair<std::string, std::uint64_t>> out;
    for (const auto& row : r.rows) {
      if (row.macs == 0) continue;
      const std::string stage = row.layer.substr(0, row.layer.find('-'));
      if (out.empty() || out.back().first != stage) out.emplace_back(stage, 0);
      out.back().second += row.macs;
    }
    return out;
  };
  const auto a = stages(baseline);
  const auto b = stages(candidate);
  std::map<std::string, std::uint64_t> bmap(b.begin(), b.end());
  std::map<std::string, std::uint64_t> amap(a.begin(), a.end());
  std::vector<std::string> order;
  for (const auto& [s, _] : a) order.push_back(s);
  for (const auto& [s, _] : b) {
    if (!amap.count(s)) order.push_back(s);
  }
  std::string out = "stage," + baseline.model + "_macs," + candidate.model + "_macs,ratio\n";
  for (const auto& s : order) {
    const std::uint64_t ma = amap.count(s) ? amap[s] : 0;
    const std::uint64_t mb = bmap.count(s) ? bmap[s] : 0;
    char ratio[32];
    std::snprintf(ratio, sizeof ratio, "%.4f", ma ? static_cast<double>(mb) / ma : 0.0);
    out += s + "," + std::to_string(ma) + "," + std::to_string(mb) + "," + ratio + "\n";
  }
  char ratio[32];
  std::snprintf(ratio, sizeof ratio, "%.4f",
                static_cast<double>(candidate.total_macs) / static_cast<double>(baseline.total_macs));
  out += "total," + std::to_string(baseline.total_macs) + "," + std::to_string(candidate.total_macs) +
         "," + ratio + "\n";
  return out;
}

}  // namespace lrcnn
