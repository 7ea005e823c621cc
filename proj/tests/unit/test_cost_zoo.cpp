#include <doctest.h>

#include "lrcnn/cost.hpp"
#include "lrcnn/zoo.hpp"

using namespace lrcnn;

namespace {

ArchSpec one_conv() {
  ArchSpec a;
  a.name = "one";
  a.input = {3, 32, 32};
  a.layers = {{"conv1", ConvLayer{16, 3, 3, {1, 1}, {1, 1}}}};
  return a;
}

const LayerSpec* find_layer(const ArchSpec& a, const std::string& name) {
  for (const auto& l : a.layers) {
    if (l.name == name) return &l;
  }
  return nullptr;
}

}  // namespace

TEST_SUITE("analyze") {
  TEST_CASE("one 3x3 conv, 16 filters on 3x32x32") {
    const CostReport r = analyze(one_conv());
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].macs == 32u * 32 * 16 * 3 * 3 * 3);
    CHECK(r.rows[0].macs == 442368u);
    CHECK(r.rows[0].params == 448u);
    CHECK(r.total_macs == 442368u);
  }

  TEST_CASE("global max pooling is free") {
    ArchSpec a = one_conv();
    a.layers.push_back({"gmp", GlobalMaxPoolLayer{}});
    const CostReport r = analyze(a);
    CHECK(r.rows[1].macs == 0);
    CHECK(r.rows[1].params == 0);
  }

  TEST_CASE("per-pixel formulas at c = d = 64, 3x3") {
    CHECK(full_rank_pixel_macs(64, 64, 3) == 36864u);
    CHECK(separable_pixel_macs(64, 64, 64, 3) == 24576u);
    CHECK(composite_join_pixel_macs(64, 64, 64, 3) == 16384u);
  }

  TEST_CASE("composite cost is the sum of its groups as standalone convs plus the join") {
    ArchSpec a;
    a.input = {8, 10, 10};
    CompositeConvSpec s;
    s.groups = {{1, 3, 4, std::nullopt}, {3, 1, 4, std::nullopt}, {3, 3, 2, std::nullopt}};
    s.join = 5;
    a.layers = {{"c", CompositeLayer{s}}};
    const std::uint64_t expected = conv_macs(10, 10, 4, 3, 1, 8) + conv_macs(10, 10, 4, 1, 3, 8) +
                                   conv_macs(10, 10, 2, 3, 3, 8) + conv_macs(10, 10, 5, 1, 1, 10);
    CHECK(analyze(a).total_macs == expected);
  }

  TEST_CASE("doubling the input side quadruples conv MACs; params do not change") {
    const ArchSpec a = build("vgg-gmp-lr");
    const CostReport small = analyze(a, InputShape{3, 112, 112});
    const CostReport big = analyze(a, InputShape{3, 224, 224});
    for (std::size_t i = 0; i < small.rows.size(); ++i) {
      const auto& k = a.layers[i].kind;
      if (std::holds_alternative<ConvLayer>(k) || std::holds_alternative<CompositeLayer>(k)) {
        CHECK(big.rows[i].macs == 4 * small.rows[i].macs);
      }
      CHECK(big.rows[i].params == small.rows[i].params);
    }
  }

  TEST_CASE("totals equal the row sums") {
    const CostReport r = analyze(build("vgg-gmp-lr-join-wfull"));
    std::uint64_t macs = 0, params = 0;
    for (const auto& row : r.rows) {
      macs += row.macs;
      params += row.params;
    }
    CHECK(r.total_macs == macs);
    CHECK(r.total_params == params);
  }

  TEST_CASE("invalid architecture propagates the validation error") {
    ArchSpec a = one_conv();
    a.layers.push_back({"fc", DenseLayer{100, 10}});
    CHECK_THROWS_AS(analyze(a), ArchError);
  }
}

TEST_SUITE("compare and CSV") {
  TEST_CASE("compare with itself is zero; half the MACs is one half") {
    const CostReport r = analyze(one_conv());
    CHECK(compare(r, r).mac_savings == 0.0);
    CostReport half = r;
    half.total_macs /= 2;
    CHECK(compare(r, half).mac_savings == 0.5);
  }

  TEST_CASE("empty architecture gives header and zero totals") {
    ArchSpec a;
    a.name = "empty";
    CHECK(report_csv(analyze(a)) == "layer,out_shape,macs,params\ntotal,,0,0\n");
  }

  TEST_CASE("single conv report row") {
    CHECK(report_csv(analyze(one_conv())) == "layer,out_shape,macs,params\nconv1,16x32x32,442368,448\ntotal,,442368,448\n");
  }

  TEST_CASE("CSV is deterministic and parses back losslessly") {
    const CostReport r = analyze(build("vgg-gmp-lr-lde"));
    const std::string csv = report_csv(r);
    CHECK(csv == report_csv(analyze(build("vgg-gmp-lr-lde"))));
    CostReport back = parse_report_csv(csv);
    back.model = r.model;
    back.input = r.input;
    CHECK(back == r);
  }

  TEST_CASE("stage table lists every stage once and the totals last") {
    const std::string t = stage_diff_table(analyze(build("vgg-gmp")), analyze(build("vgg-gmp-lr-join")));
    CHECK(t.find("conv3a,") != std::string::npos);
    CHECK(t.find("fc6,") != std::string::npos);
    CHECK(t.find("\ntotal,") != std::string::npos);
  }
}

TEST_SUITE("model zoo") {
  TEST_CASE("lists the eight VGG columns and two desk models, sorted") {
    const auto names = model_names();
    CHECK(names.size() == 10);
    CHECK(std::is_sorted(names.begin(), names.end()));
    CHECK(vgg_model_names().size() == 8);
  }

  TEST_CASE("every VGG model validates at 3x224x224") {
    for (const auto& n : vgg_model_names()) {
      INFO(n);
      CHECK(validate(build(n)).empty());
    }
  }

  TEST_CASE("global-pooling variants also validate at 3x32x32 and 3x64x48") {
    for (const auto& n : vgg_model_names()) {
      if (n == "vgg11") continue;
      for (InputShape in : {InputShape{3, 32, 32}, InputShape{3, 64, 48}}) {
        ArchSpec a = build(n);
        a.input = in;
        INFO(n);
        CHECK(validate(a).empty());
      }
    }
  }

  TEST_CASE("vgg-gmp-lr conv1 is [3x1,32 | 1x3,32] without join") {
    const ArchSpec a = build("vgg-gmp-lr");
    const auto* c = std::get_if<CompositeLayer>(&a.layers[0].kind);
    REQUIRE(c != nullptr);
    REQUIRE(c->spec.groups.size() == 2);
    CHECK(c->spec.groups[0].kh == 3);
    CHECK(c->spec.groups[0].kw == 1);
    CHECK(c->spec.groups[0].d == 32);
    CHECK(c->spec.groups[1].kh == 1);
    CHECK(c->spec.groups[1].kw == 3);
    CHECK(c->spec.groups[1].d == 32);
    CHECK_FALSE(c->spec.join.has_value());
  }

  TEST_CASE("vgg-gmp-lr-join starts with composite, 1x1 64 join, ReLU") {
    const ArchSpec a = build("vgg-gmp-lr-join");
    CHECK(std::holds_alternative<CompositeLayer>(a.layers[0].kind));
    const auto* j = std::get_if<ConvLayer>(&a.layers[1].kind);
    REQUIRE(j != nullptr);
    CHECK(j->kh == 1);
    CHECK(j->kw == 1);
    CHECK(j->d == 64);
    CHECK(std::holds_alternative<ReluLayer>(a.layers[2].kind));
  }

  TEST_CASE("vgg11 fc6 takes 7*7*512 inputs; gmp variants take the channel count") {
    const auto* fc6 = std::get_if<DenseLayer>(&find_layer(build("vgg11"), "fc6")->kind);
    REQUIRE(fc6 != nullptr);
    CHECK(fc6->in == 7 * 7 * 512);
    CHECK(std::get<DenseLayer>(find_layer(build("vgg-gmp"), "fc6")->kind).in == 512);
  }

  TEST_CASE("lde uses stride 2 in conv1 and halves channels with 1x1 embeddings") {
    const ArchSpec a = build("vgg-gmp-lr-lde");
    CHECK(std::get<CompositeLayer>(a.layers[0].kind).spec.stride == Stride2{2, 2});
    const auto& e = std::get<ConvLayer>(find_layer(a, "conv1-embed")->kind);
    CHECK(e.d == 32);
    CHECK(e.kh == 1);
  }

  TEST_CASE("wfull rows have three groups: 3d/8, 3d/8 and a 3x3 d/4") {
    const auto& s = std::get<CompositeLayer>(build("vgg-gmp-lr-join-wfull").layers[0].kind).spec;
    REQUIRE(s.groups.size() == 3);
    CHECK(s.groups[0].d == 24);
    CHECK(s.groups[1].d == 24);
    CHECK(s.groups[2].d == 16);
    CHECK(s.groups[2].kh == 3);
    CHECK(s.groups[2].kw == 3);
  }

  TEST_CASE("every low-rank variant costs fewer MACs than vgg-gmp except the 2x width") {
    const std::uint64_t base = analyze(build("vgg-gmp")).total_macs;
    for (const char* n : {"vgg-gmp-lr", "vgg-gmp-lr-join", "vgg-gmp-lr-lde", "vgg-gmp-lr-join-wfull"}) {
      INFO(n);
      CHECK(analyze(build(n)).total_macs < base);
    }
  }

  TEST_CASE("unknown name lists the available models") {
    try {
      build("vgg-19");
      FAIL("expected an error");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("vgg-gmp-lr") != std::string::npos);
    }
    CHECK_THROWS_AS(build_desk("desk-huge"), std::invalid_argument);
  }

  TEST_CASE("vgg-11 is accepted as an alias") { CHECK(build("vgg-11") == build("vgg11")); }

  TEST_CASE("desk models validate at 3x32x32 and desk-lr costs at most 0.6 of desk-full") {
    const ArchSpec full = build_desk("desk-full");
    const ArchSpec lr = build_desk("desk-lr");
    CHECK(validate(full).empty());
    CHECK(validate(lr).empty());
    CHECK(full.input == InputShape{3, 32, 32});
    const double ratio = static_cast<double>(analyze(lr).total_macs) / static_cast<double>(analyze(full).total_macs);
    CHECK(ratio <= 0.6);
  }

  TEST_CASE("two stacked 3x3 convs see a 5x5 window") {
    ArchSpec a;
    a.input = {1, 16, 16};
    a.layers = {{"a", ConvLayer{4, 3, 3, {1, 1}, {1, 1}}}, {"r", ReluLayer{}}, {"b", ConvLayer{4, 3, 3, {1, 1}, {1, 1}}}};
    CHECK(receptive_field(a, 2) == std::pair<std::size_t, std::size_t>{5, 5});
    ArchSpec five;
    five.input = {1, 16, 16};
    five.layers = {{"a", ConvLayer{4, 5, 5, {1, 1}, {2, 2}}}};
    CHECK(receptive_field(five, 0) == receptive_field(a, 2));
  }
}
