#include "lrcnn/composite.hpp"

#include "lrcnn/format.hpp"
#include "lrcnn/keyvalue.hpp"

namespace lrcnn {

std::size_t CompositeConvSpec::basis_channels() const {
  std::size_t total = 0;
  for (const auto& g : groups) total += g.d;
  return total;
}

CompositeParams make_composite_params(const CompositeConvSpec& spec, std::size_t in_channels) {
  CompositeParams p;
  for (const auto& g : spec.groups) p.groups.emplace_back(g.d, in_channels, g.kh, g.kw);
  if (spec.join) p.join = ConvWeights(*spec.join, spec.basis_channels(), 1, 1);
  return p;
}

Shape composite_output_shape(const Shape& in, const CompositeConvSpec& spec,
                             const CompositeParams& params) {
  if (spec.groups.empty()) throw ShapeError("composite: no filter groups");
  if (params.groups.size() != spec.groups.size()) {
    throw ShapeError("composite: " + std::to_string(params.groups.size()) +
                     " weight groups for " + std::to_string(spec.groups.size()) + " spec groups");
  }
  Shape out{};
  for (std::size_t i = 0; i < spec.groups.size(); ++i) {
    const FilterGroup& g = spec.groups[i];
    const ConvWeights& w = params.groups[i];
    if (w.d != g.d || w.kh != g.kh || w.kw != g.kw) {
      throw ShapeError("composite: group " + std::to_string(i) + " weights do not match spec");
    }
    if (g.stride && !(*g.stride == spec.stride)) {
      throw ShapeError("composite: group " + std::to_string(i) + " stride " + std::to_string(g.stride->y) +
                       "x" + std::to_string(g.stride->x) + " differs from layer stride " +
                       std::to_string(spec.stride.y) + "x" + std::to_string(spec.stride.x));
    }
    const Shape s = conv_output_shape(in, w, spec.stride, same_padding(g.kh, g.kw));
    if (i == 0) {
      out = s;
    } else if (s.h != out.h || s.w != out.w) {
      throw ShapeError("composite: group " + std::to_string(i) + " produces " +
                       std::to_string(s.h) + "x" + std::to_string(s.w) + " maps but group 0 produces " +
                       std::to_string(out.h) + "x" + std::to_string(out.w));
    }
  }
  out.c = spec.basis_channels();
  if (spec.join.has_value() != params.join.has_value()) {
    throw ShapeError("composite: join weights present/absent mismatch with spec");
  }
  if (spec.join) {
    const ConvWeights& j = *params.join;
    if (j.c != out.c || j.d != *spec.join || j.kh != 1 || j.kw != 1) {
      throw ShapeError("composite: join must be 1x1 with input channels (c) " +
                       std::to_string(out.c));
    }
    out.c = j.d;
  }
  return out;
}

Tensor composite_basis(const Tensor& input, const CompositeConvSpec& spec,
                       const CompositeParams& params) {
  composite_output_shape(input.shape(), spec, params);
  std::vector<Tensor> parts;
  parts.reserve(spec.groups.size());
  for (std::size_t i = 0; i < spec.groups.size(); ++i) {
    const FilterGroup& g = spec.groups[i];
    parts.push_back(conv2d_forward(input, params.groups[i], spec.stride, same_padding(g.kh, g.kw)));
  }
  if (parts.size() == 1) return std::move(parts.front());
  return concat_channels(parts);
}

Tensor composite_forward(const Tensor& input, const CompositeConvSpec& spec,
                         const CompositeParams& params) {
  Tensor basis = composite_basis(input, spec, params);
  if (!spec.join) return basis;
  return conv2d_forward(basis, *params.join, {1, 1}, {0, 0});
}

CompositeGrads composite_backward(const Tensor& input, const CompositeConvSpec& spec,
                                  const CompositeParams& params, const Tensor& grad_out,
                                  const Tensor* basis) {
  const Shape os = composite_output_shape(input.shape(), spec, params);
  if (grad_out.shape() != os) {
    throw ShapeError("composite_backward: grad_out shape " + to_string(grad_out.shape()) +
                     " does not match forward output " + to_string(os));
  }
  CompositeGrads out;
  Tensor grad_basis;
  if (spec.join) {
    Tensor computed;
    if (basis == nullptr) {
      computed = composite_basis(input, spec, params);
      basis = &computed;
    }
    GradBundle j = conv2d_backward(*basis, *params.join, grad_out, {1, 1}, {0, 0});
    grad_basis = std::move(j.grad_input);
    j.grad_input = Tensor();
    out.join = std::move(j);
  } else {
    grad_basis = grad_out;
  }

  std::vector<std::size_t> sizes;
  for (const auto& g : spec.groups) sizes.push_back(g.d);
  std::vector<Tensor> grad_parts;
  if (sizes.size() == 1) {
    grad_parts.push_back(std::move(grad_basis));
  } else {
    grad_parts = split_channels(grad_basis, sizes);
  }

  out.grad_input = Tensor(input.shape());
  for (std::size_t i = 0; i < spec.groups.size(); ++i) {
    const FilterGroup& g = spec.groups[i];
    GradBundle b = conv2d_backward(input, params.groups[i], grad_parts[i], spec.stride,
                                   same_padding(g.kh, g.kw));
    if (i == 0) {
      out.grad_input = std::move(b.grad_input);
    } else {
      auto dst = out.grad_input.data();
      auto src = b.grad_input.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
    b.grad_input = Tensor();
    out.groups.push_back(std::move(b));
  }
  return out;
}

std::vector<EffectiveFilter> effective_filters(const CompositeConvSpec& spec,
                                               const CompositeParams& params) {
  if (spec.groups.size() != 2 || !spec.join || !params.join) {
    throw UnsupportedError(
        "effective_filters: needs exactly one horizontal and one vertical group plus a join");
  }
  int horizontal = -1;
  int vertical = -1;
  for (int i = 0; i < 2; ++i) {
    const FilterGroup& g = spec.groups[i];
    if (g.kh == 1 && g.kw > 1) horizontal = i;
    if (g.kw == 1 && g.kh > 1) vertical = i;
  }
  if (horizontal < 0 || vertical < 0 || horizontal == vertical) {
    throw UnsupportedError("effective_filters: group pattern is not {1xk horizontal, kx1 vertical}");
  }
  const ConvWeights& hw = params.groups[horizontal];
  const ConvWeights& vw = params.groups[vertical];
  const ConvWeights& join = *params.join;
  const std::size_t rows = vw.kh;
  const std::size_t cols = hw.kw;
  const std::size_t mid_row = rows / 2;
  const std::size_t mid_col = cols / 2;
  // Join input channels follow group order.
  const std::size_t h_offset = horizontal == 0 ? 0 : spec.groups[0].d;
  const std::size_t v_offset = vertical == 0 ? 0 : spec.groups[0].d;

  std::vector<EffectiveFilter> out;
  for (std::size_t j = 0; j < join.d; ++j) {
    for (std::size_t c = 0; c < hw.c; ++c) {
      EffectiveFilter f{j, c, rows, cols, std::vector<double>(rows * cols, 0.0)};
      for (std::size_t b = 0; b < hw.d; ++b) {
        const double a = join.w(j, h_offset + b, 0, 0);
        for (std::size_t x = 0; x < cols; ++x) f.values[mid_row * cols + x] += a * hw.w(b, c, 0, x);
      }
      for (std::size_t b = 0; b < vw.d; ++b) {
        const double a = join.w(j, v_offset + b, 0, 0);
        for (std::size_t y = 0; y < rows; ++y) f.values[y * cols + mid_col] += a * vw.w(b, c, y, 0);
      }
      out.push_back(std::move(f));
    }
  }
  return out;
}

std::string effective_filters_csv(std::span<const EffectiveFilter> filters) {
  std::string out;
  for (std::size_t k = 0; k < filters.size(); ++k) {
    const auto& f = filters[k];
    if (k > 0) out += '\n';
    out += "kernel," + std::to_string(f.out_channel) + "," + std::to_string(f.in_channel) + "," +
           std::to_string(f.rows) + "," + std::to_string(f.cols) + "\n";
    for (std::size_t y = 0; y < f.rows; ++y) {
      for (std::size_t x = 0; x < f.cols; ++x) {
        if (x > 0) out += ',';
        out += format_double(f.values[y * f.cols + x]);
      }
      out += '\n';
    }
  }
  return out;
}

std::vector<EffectiveFilter> parse_effective_filters_csv(const std::string& csv) {
  const auto lines = split(csv, '\n');
  std::vector<EffectiveFilter> out;
  std::size_t i = 0;
  auto fail = [&](const std::string& msg) { throw ParseError("filters csv: line " + std::to_string(i + 1) + ": " + msg); };
  while (i < lines.size()) {
    if (lines[i].empty()) {
      ++i;
      continue;
    }
    const auto head = split(lines[i], ',');
    if (head.size() != 5 || head[0] != "kernel") fail("expected 'kernel,out,in,rows,cols'");
    EffectiveFilter f{parse_unsigned(head[1]), parse_unsigned(head[2]), parse_unsigned(head[3]),
                      parse_unsigned(head[4]), {}};
    ++i;
    for (std::size_t y = 0; y < f.rows; ++y, ++i) {
      if (i >= lines.size()) fail("kernel ends early");
      const auto row = split(lines[i], ',');
      if (row.size() != f.cols) fail("expected " + std::to_string(f.cols) + " values");
      for (const auto& v : row) f.values.push_back(parse_double(v));
    }
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace lrcnn
