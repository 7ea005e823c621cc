#include "lrcnn/arch.hpp"

#include <sstream>
#include <tuple>

#include "lrcnn/format.hpp"
#include "lrcnn/keyvalue.hpp"

namespace lrcnn {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string layer_label(const ArchSpec& arch, std::size_t i) {
  const LayerSpec& l = arch.layers[i];
  std::string label = "layer " + std::to_string(i);
  if (!l.name.empty()) label += " (" + l.name + ")";
  return label + ": ";
}

std::pair<std::size_t, std::size_t> parse_pair(const std::string& s, const std::string& what) {
  const auto parts = split(s, 'x');
  if (parts.size() != 2) throw ParseError("expected AxB for " + what + ", got '" + s + "'");
  try {
    return {parse_unsigned(parts[0]), parse_unsigned(parts[1])};
  } catch (const std::invalid_argument&) {
    throw ParseError("expected AxB for " + what + ", got '" + s + "'");
  }
}

std::size_t parse_count(const std::string& s, const std::string& what) {
  try {
    return parse_unsigned(s);
  } catch (const std::invalid_argument&) {
    throw ParseError("expected a non-negative integer for " + what + ", got '" + s + "'");
  }
}

std::string pair_text(std::size_t a, std::size_t b) {
  return std::to_string(a) + "x" + std::to_string(b);
}

}  // namespace

ArchError::ArchError(std::vector<std::string> problems)
    : std::invalid_argument([&] {
        std::string msg = "invalid architecture";
        for (const auto& p : problems) msg += "\n  " + p;
        return msg;
      }()),
      problems_(std::move(problems)) {}

std::string kind_name(const LayerKind& kind) {
  return std::visit(Overloaded{[](const ConvLayer&) { return "conv"; },
                               [](const CompositeLayer&) { return "composite"; },
                               [](const MaxPoolLayer&) { return "maxpool"; },
                               [](const GlobalMaxPoolLayer&) { return "gmp"; },
                               [](const ReluLayer&) { return "relu"; },
                               [](const DenseLayer&) { return "dense"; },
                               [](const DropoutLayer&) { return "dropout"; },
                               [](const SoftmaxLayer&) { return "softmax"; }},
                    kind);
}

bool has_weights(const LayerSpec& layer) {
  return std::holds_alternative<ConvLayer>(layer.kind) ||
         std::holds_alternative<CompositeLayer>(layer.kind) ||
         std::holds_alternative<DenseLayer>(layer.kind);
}

namespace {

// Walks the spec, appending problems; returns per-layer shapes (valid only if
// no problems were found).
std::vector<Shape> walk(const ArchSpec& arch, std::vector<std::string>& problems) {
  std::vector<Shape> shapes;
  Shape cur{1, arch.input.c, arch.input.h, arch.input.w};
  if (cur.c == 0 || cur.h == 0 || cur.w == 0) {
    problems.push_back("input shape " + format_input_shape(arch.input) + " has a zero dimension");
    return shapes;
  }
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const std::string label = layer_label(arch, i);
    const std::size_t before = problems.size();
    auto conv_extent = [&](std::size_t in, std::size_t k, std::size_t s, std::size_t p,
                           const char* axis) -> std::size_t {
      if (k == 0 || s == 0) {
        problems.push_back(label + "kernel and stride must be >= 1");
        return 0;
      }
      if (in + 2 * p < k) {
        problems.push_back(label + "kernel " + axis + " " + std::to_string(k) +
                           " exceeds padded input " + std::to_string(in + 2 * p));
        return 0;
      }
      return conv_out_extent(in, k, s, p);
    };
    Shape next = cur;
    std::visit(
        Overloaded{
            [&](const ConvLayer& c) {
              if (c.d == 0) problems.push_back(label + "filter count must be >= 1");
              next = {1, c.d, conv_extent(cur.h, c.kh, c.stride.y, c.pad.y, "height"),
                      conv_extent(cur.w, c.kw, c.stride.x, c.pad.x, "width")};
            },
            [&](const CompositeLayer& c) {
              const auto& spec = c.spec;
              if (spec.groups.empty()) {
                problems.push_back(label + "composite layer has no filter groups");
                return;
              }
              std::size_t h = 0, w = 0;
              for (std::size_t g = 0; g < spec.groups.size(); ++g) {
                const FilterGroup& fg = spec.groups[g];
                if (fg.d == 0 || fg.kh == 0 || fg.kw == 0) {
                  problems.push_back(label + "group " + std::to_string(g) +
                                     " needs kw, kh, d >= 1");
                  continue;
                }
                if (fg.stride && *fg.stride != spec.stride) {
                  problems.push_back(label + "group " + std::to_string(g) + " stride " +
                                     pair_text(fg.stride->y, fg.stride->x) +
                                     " differs from layer stride " +
                                     pair_text(spec.stride.y, spec.stride.x));
                }
                const Pad2 p = same_padding(fg.kh, fg.kw);
                const std::size_t gh = conv_extent(cur.h, fg.kh, spec.stride.y, p.y, "height");
                const std::size_t gw = conv_extent(cur.w, fg.kw, spec.stride.x, p.x, "width");
                if (g == 0) {
                  h = gh;
                  w = gw;
                } else if (gh != h || gw != w) {
                  problems.push_back(label + "group " + std::to_string(g) + " output " +
                                     pair_text(gh, gw) + " does not match group 0 output " +
                                     pair_text(h, w));
                }
              }
              if (spec.join && *spec.join == 0) {
                problems.push_back(label + "join must have >= 1 output channel");
              }
              next = {1, spec.output_channels(), h, w};
            },
            [&](const MaxPoolLayer& p) {
              if (p.k == 0 || p.stride == 0) {
                problems.push_back(label + "pool window and stride must be >= 1");
                return;
              }
              if (cur.h < p.k || cur.w < p.k) {
                problems.push_back(label + "pool window " + std::to_string(p.k) +
                                   " larger than input " + pair_text(cur.h, cur.w));
                return;
              }
              next = {1, cur.c, (cur.h - p.k) / p.stride + 1, (cur.w - p.k) / p.stride + 1};
            },
            [&](const GlobalMaxPoolLayer&) { next = {1, cur.c, 1, 1}; },
            [&](const ReluLayer&) {},
            [&](const DenseLayer& d) {
              if (d.in != cur.image()) {
                problems.push_back(label + "dense fan-in " + std::to_string(d.in) +
                                   " does not match flattened input " + std::to_string(cur.c) +
                                   "x" + pair_text(cur.h, cur.w) + " = " +
                                   std::to_string(cur.image()));
              }
              if (d.out == 0) problems.push_back(label + "dense output must be >= 1");
              next = {1, d.out, 1, 1};
            },
            [&](const DropoutLayer& d) {
              if (!(d.rate >= 0.0 && d.rate < 1.0)) {
                problems.push_back(label + "dropout rate must lie in [0, 1)");
              }
            },
            [&](const SoftmaxLayer&) {
              if (i + 1 != arch.layers.size()) {
                problems.push_back(label + "softmax must be the last layer");
              }
            },
        },
        arch.layers[i].kind);
    if (problems.size() > before) return shapes;
    if (next.h == 0 || next.w == 0 || next.c == 0) {
      problems.push_back(label + "output has a zero dimension");
      return shapes;
    }
    shapes.push_back(next);
    cur = next;
  }
  return shapes;
}

}  // namespace

std::vector<std::string> validate(const ArchSpec& arch) {
  std::vector<std::string> problems;
  walk(arch, problems);
  return problems;
}

void validate_or_throw(const ArchSpec& arch) {
  auto problems = validate(arch);
  if (!problems.empty()) throw ArchError(std::move(problems));
}

std::vector<Shape> infer_shapes(const ArchSpec& arch) {
  std::vector<std::string> problems;
  auto shapes = walk(arch, problems);
  if (!problems.empty()) throw ArchError(std::move(problems));
  return shapes;
}

InputShape parse_input_shape(const std::string& text) {
  const auto parts = split(text, 'x');
  if (parts.size() != 3) throw ParseError("expected CxHxW, got '" + text + "'");
  try {
    return {parse_unsigned(parts[0]), parse_unsigned(parts[1]), parse_unsigned(parts[2])};
  } catch (const std::invalid_argument&) {
    throw ParseError("expected CxHxW, got '" + text + "'");
  }
}

std::string format_input_shape(const InputShape& s) {
  return std::to_string(s.c) + "x" + std::to_string(s.h) + "x" + std::to_string(s.w);
}

std::string format_layer(const LayerSpec& layer) {
  std::string out = kind_name(layer.kind);
  std::visit(Overloaded{
                 [&](const ConvLayer& c) {
                   out += " " + std::to_string(c.d) + " " + pair_text(c.kh, c.kw) + " stride=" +
                          pair_text(c.stride.y, c.stride.x) + " pad=" + pair_text(c.pad.y, c.pad.x);
                 },
                 [&](const CompositeLayer& c) {
                   out += " ";
                   for (std::size_t g = 0; g < c.spec.groups.size(); ++g) {
                     const auto& fg = c.spec.groups[g];
                     if (g > 0) out += ",";
                     out += pair_text(fg.kh, fg.kw) + ":" + std::to_string(fg.d);
                     if (fg.stride) out += "/" + pair_text(fg.stride->y, fg.stride->x);
                   }
                   out += " stride=" + pair_text(c.spec.stride.y, c.spec.stride.x);
                   if (c.spec.join) out += " join=" + std::to_string(*c.spec.join);
                 },
                 [&](const MaxPoolLayer& p) {
                   out += " " + std::to_string(p.k) + " stride=" + std::to_string(p.stride);
                 },
                 [&](const GlobalMaxPoolLayer&) {},
                 [&](const ReluLayer&) {},
                 [&](const DenseLayer& d) {
                   out += " " + std::to_string(d.in) + " " + std::to_string(d.out);
                 },
                 [&](const DropoutLayer& d) { out += " " + format_double(d.rate); },
                 [&](const SoftmaxLayer&) {},
             },
             layer.kind);
  if (!layer.name.empty()) out += " name=" + layer.name;
  return out;
}

LayerSpec parse_layer(const std::string& text) {
  auto fields = split_fields(text);
  if (fields.empty()) throw ParseError("empty layer description");
  LayerSpec layer;
  std::vector<std::string> positional;
  std::vector<std::pair<std::string, std::string>> options;
  for (std::size_t i = 1; i < fields.size(); ++i) {
    const auto eq = fields[i].find('=');
    if (eq == std::string::npos) {
      positional.push_back(fields[i]);
    } else {
      options.emplace_back(fields[i].substr(0, eq), fields[i].substr(eq + 1));
    }
  }
  const std::string& kind = fields[0];
  auto expect_positional = [&](std::size_t n) {
    if (positional.size() != n) {
      throw ParseError(kind + ": expected " + std::to_string(n) + " positional fields, got " +
                       std::to_string(positional.size()));
    }
  };
  auto take = [&](const std::string& key, auto&& apply) {
    for (auto it = options.begin(); it != options.end(); ++it) {
      if (it->first == key) {
        apply(it->second);
        options.erase(it);
        return;
      }
    }
  };
  take("name", [&](const std::string& v) { layer.name = v; });

  if (kind == "conv") {
    expect_positional(2);
    ConvLayer c;
    c.d = parse_count(positional[0], "conv filters");
    std::tie(c.kh, c.kw) = parse_pair(positional[1], "conv kernel");
    c.pad = same_padding(c.kh, c.kw);
    take("stride", [&](const std::string& v) { std::tie(c.stride.y, c.stride.x) = parse_pair(v, "stride"); });
    take("pad", [&](const std::string& v) { std::tie(c.pad.y, c.pad.x) = parse_pair(v, "pad"); });
    layer.kind = c;
  } else if (kind == "composite") {
    expect_positional(1);
    CompositeConvSpec spec;
    for (const auto& g : split(positional[0], ',')) {
      const auto colon = g.find(':');
      if (colon == std::string::npos) throw ParseError("composite group '" + g + "' needs HxW:D");
      FilterGroup fg;
      std::tie(fg.kh, fg.kw) = parse_pair(g.substr(0, colon), "group kernel");
      std::string count = g.substr(colon + 1);
      if (const auto slash = count.find('/'); slash != std::string::npos) {
        Stride2 s;
        std::tie(s.y, s.x) = parse_pair(count.substr(slash + 1), "group stride");
        fg.stride = s;
        count = count.substr(0, slash);
      }
      fg.d = parse_count(count, "group filters");
      spec.groups.push_back(fg);
    }
    take("stride", [&](const std::string& v) { std::tie(spec.stride.y, spec.stride.x) = parse_pair(v, "stride"); });
    take("join", [&](const std::string& v) { spec.join = parse_count(v, "join"); });
    layer.kind = CompositeLayer{spec};
  } else if (kind == "maxpool") {
    expect_positional(1);
    MaxPoolLayer p;
    p.k = parse_count(positional[0], "pool window");
    p.stride = p.k;
    take("stride", [&](const std::string& v) { p.stride = parse_count(v, "pool stride"); });
    layer.kind = p;
  } else if (kind == "gmp") {
    expect_positional(0);
    layer.kind = GlobalMaxPoolLayer{};
  } else if (kind == "relu") {
    expect_positional(0);
    layer.kind = ReluLayer{};
  } else if (kind == "dense") {
    expect_positional(2);
    layer.kind = DenseLayer{parse_count(positional[0], "dense in"), parse_count(positional[1], "dense out")};
  } else if (kind == "dropout") {
    expect_positional(1);
    try {
      layer.kind = DropoutLayer{parse_double(positional[0])};
    } catch (const std::invalid_argument& e) {
      throw ParseError(std::string("dropout: ") + e.what());
    }
  } else if (kind == "softmax") {
    expect_positional(0);
    layer.kind = SoftmaxLayer{};
  } else {
    throw ParseError("unknown layer kind '" + kind + "'");
  }
  if (!options.empty()) {
    throw ParseError(kind + ": unknown option '" + options.front().first + "'");
  }
  return layer;
}

std::string save_arch_text(const ArchSpec& arch) {
  std::string out = "name = " + arch.name + "\n";
  out += "input = " + format_input_shape(arch.input) + "\n";
  for (const auto& l : arch.layers) out += "layer = " + format_layer(l) + "\n";
  return out;
}

ArchSpec load_arch_text(const std::string& text) {
  ArchSpec arch;
  bool have_input = false;
  for (const auto& e : parse_key_values(text)) {
    try {
      if (e.key == "name") {
        arch.name = e.value;
      } else if (e.key == "input") {
        arch.input = parse_input_shape(e.value);
        have_input = true;
      } else if (e.key == "layer") {
        arch.layers.push_back(parse_layer(e.value));
      } else {
        throw ParseError("unknown key '" + e.key + "'");
      }
    } catch (const ParseError& err) {
      throw ParseError("line " + std::to_string(e.line) + ": " + err.what());
    }
  }
  if (!have_input) throw ParseError("architecture has no 'input' line");
  return arch;
}

}  // namespace lrcnn
