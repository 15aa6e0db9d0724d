#include <cmath>

#include "doctest.h"
#include "scrawl/generator.hpp"

using namespace scrawl;

namespace {

const GlyphTable& test_font() {
  static const GlyphTable font =
      load_hex_font(SCRAWL_SOURCE_DIR "/data/fonts/scrawl8x16.hex");
  return font;
}

GenConfig tiny_gen(int n_scales = 2) {
  GenConfig cfg;
  cfg.block.d_model = 8;
  cfg.block.n_heads = 2;
  cfg.block.d_ff = 16;
  cfg.block.n_layers = 1;
  cfg.n_scales = n_scales;
  cfg.fuse_layers = 1;
  cfg.layers_per_scale = 1;
  cfg.decoder_channels = {};
  return cfg;
}

WriterIdConfig tiny_wid() {
  WriterIdConfig cfg;
  cfg.block.d_model = 8;
  cfg.block.n_heads = 2;
  cfg.block.d_ff = 16;
  cfg.block.n_layers = 1;
  cfg.n_writers = 2;
  return cfg;
}

StyleEmbedding<double> random_style(Graph<double>& g, const WriterId<double>& w,
                                    Rng& rng, int width = 32) {
  Tensor<double> img = Tensor<double>::randn({1, 32, width}, rng, 0.3);
  return w.embed_style(g, {Var<double>::constant(img)});
}

}  // namespace

TEST_SUITE_BEGIN("generator");

TEST_CASE("fuse length contract in both wirings") {
  Rng rng(1);
  WriterId<double> wid;
  wid.init(tiny_wid(), rng);

  Generator<double> gen;
  gen.init(tiny_gen(), rng);
  Graph<double> g(false);
  StyleEmbedding<double> style = random_style(g, wid, rng, 80);  // S = 80
  ContentSequence seq = render_text(test_font(), "hello", 8);    // L = 5

  Var<double> conventional = gen.fuse(g, gen.content_tokens(g, seq), style);
  CHECK(conventional.shape() == std::vector<int>{5, 8});

  Generator<double> gen_pl;
  GenConfig cfg = tiny_gen();
  cfg.wiring = Wiring::kPaperLiteral;
  Rng rng2(1);
  gen_pl.init(cfg, rng2);
  Var<double> literal = gen_pl.fuse(g, gen_pl.content_tokens(g, seq), style);
  CHECK(literal.shape() == std::vector<int>{5, 8});
}

TEST_CASE("multi-scale grid shapes follow the doubling law") {
  Rng rng(2);
  WriterId<double> wid;
  wid.init(tiny_wid(), rng);
  Graph<double> g(false);
  ContentSequence seq = render_text(test_font(), "abc", 8);  // L = 3

  for (int k : {1, 2, 3}) {
    Generator<double> gen;
    Rng r(7);
    gen.init(tiny_gen(k), r);
    StyleEmbedding<double> style = random_style(g, wid, rng);
    Var<double> fused = gen.fuse(g, gen.content_tokens(g, seq), style);
    int h = 0, w = 0;
    Var<double> grid = gen.multi_scale_refine(g, fused, &h, &w);
    CHECK(h == 2 * (1 << (k - 1)));
    CHECK(w == 6 * (1 << (k - 1)));
    CHECK(grid.shape() == std::vector<int>{h * w, 8});
    // and the decoder lands exactly on 32 x 16L
    Var<double> img = gen.conv_decode(g, grid, h, w);
    CHECK(img.shape() == std::vector<int>{1, 32, 48});
  }
}

TEST_CASE("width law: output width is 16L for L in 1..20") {
  Rng rng(3);
  WriterId<double> wid;
  wid.init(tiny_wid(), rng);
  Generator<double> gen;
  gen.init(tiny_gen(), rng);
  Graph<double> g(false);
  StyleEmbedding<double> style = random_style(g, wid, rng);
  std::string text;
  for (int l = 1; l <= 20; ++l) {
    text.push_back(char('a' + (l - 1) % 26));
    ContentSequence seq = render_text(test_font(), text, 8);
    REQUIRE(seq.length() == l);
    Var<double> img = gen.synthesize(g, seq, style);
    CHECK(img.shape() == std::vector<int>{1, 32, 16 * l});
    for (size_t i = 0; i < img.value().size(); ++i) {
      CHECK(img.value()[i] <= 1.0);
      CHECK(img.value()[i] >= -1.0);
    }
  }
}

TEST_CASE("ablation flags change outputs but keep geometry") {
  Rng rng(4);
  WriterId<double> wid;
  wid.init(tiny_wid(), rng);
  ContentSequence seq = render_text(test_font(), "ab", 8);

  auto render_with = [&](bool use_cpe, int n_scales, bool use_vit) {
    Graph<double> g(false);
    GenConfig cfg = tiny_gen(n_scales);
    cfg.use_cpe = use_cpe;
    cfg.use_vit = use_vit;
    Generator<double> gen;
    Rng r(55);  // same parameter draw for every variant
    gen.init(cfg, r);
    Rng sr(66);
    StyleEmbedding<double> style = random_style(g, wid, sr);
    return gen.synthesize(g, seq, style).value().clone();
  };

  Tensor<double> full = render_with(true, 2, true);
  Tensor<double> no_cpe = render_with(false, 2, true);
  Tensor<double> single_scale = render_with(true, 1, true);
  Tensor<double> conv_only = render_with(true, 2, false);
  CHECK(full.shape() == std::vector<int>{1, 32, 32});
  CHECK(no_cpe.shape() == full.shape());
  CHECK(single_scale.shape() == full.shape());
  CHECK(conv_only.shape() == full.shape());
  CHECK(max_abs_diff(full, no_cpe) > 1e-9);
  CHECK(max_abs_diff(full, conv_only) > 1e-9);
}

TEST_CASE("generation is a pure function of parameters, style, and text") {
  Rng rng(5);
  WriterId<float> wid;
  WriterIdConfig wc;
  wc.block = tiny_gen().block;
  wc.n_writers = 2;
  wid.init(wc, rng);
  Generator<float> gen;
  GenConfig gc = tiny_gen();
  gen.init(gc, rng);

  Tensor<float> style_img = Tensor<float>::randn({1, 32, 32}, rng, 0.3);
  GeneratedBatch<float> a =
      generate(gen, wid, {style_img}, 0, {"ab", "cd"}, test_font());
  GeneratedBatch<float> b =
      generate(gen, wid, {style_img}, 0, {"ab", "cd"}, test_font());
  REQUIRE(a.images.size() == 2);
  CHECK(bit_equal(a.images[0], b.images[0]));
  CHECK(bit_equal(a.images[1], b.images[1]));
  CHECK(a.images[0].shape() == std::vector<int>{1, 32, 32});
  CHECK(a.texts[0] == "ab");
}

TEST_CASE("texts of lengths 2 and 7 give widths 32 and 112") {
  Rng rng(6);
  WriterId<float> wid;
  WriterIdConfig wc;
  wc.block = tiny_gen().block;
  wc.n_writers = 2;
  wid.init(wc, rng);
  Generator<float> gen;
  gen.init(tiny_gen(), rng);
  Tensor<float> style_img = Tensor<float>::randn({1, 32, 48}, rng, 0.3);
  GeneratedBatch<float> out =
      generate(gen, wid, {style_img}, 0, {"ab", "abcdefg"}, test_font());
  CHECK(out.images[0].dim(2) == 32);
  CHECK(out.images[1].dim(2) == 112);
}

TEST_CASE("end-to-end generate gradient reaches sampled generator parameters") {
  Rng rng(7);
  WriterId<double> wid;
  wid.init(tiny_wid(), rng);
  Generator<double> gen;
  gen.init(tiny_gen(), rng);
  ContentSequence seq = render_text(test_font(), "ab", 8);
  Tensor<double> style_img = Tensor<double>::randn({1, 32, 32}, rng, 0.3);

  auto forward_sum = [&]() {
    Graph<double> g(false);
    StyleEmbedding<double> style =
        wid.embed_style(g, {Var<double>::constant(style_img)});
    return sum(gen.synthesize(g, seq, style)).scalar();
  };

  Graph<double> g;
  StyleEmbedding<double> style = wid.embed_style(g, {g.constant(style_img)});
  Var<double> loss = sum(gen.synthesize(g, seq, style));
  backward_scalar(loss);

  // a parameter from each stage of the pipeline
  Tensor<double>* checked[] = {&gen.content_proj.w, &gen.expand.w,
                               &gen.scales[1].cpe.w, &gen.dec_stages[0].w, &gen.out_w};
  for (Tensor<double>* param : checked) {
    const Tensor<double>* analytic = g.grad_for(*param);
    REQUIRE(analytic != nullptr);
    std::vector<size_t> coords;
    for (size_t i = 0; i < param->size() && coords.size() < 8; i += 11)
      coords.push_back(i);
    CHECK(finite_diff_check_param(forward_sum, *param, *analytic, coords, 1e-4) < 1e-3);
  }
}

TEST_CASE("paper-literal wiring is differentiable end to end") {
  Rng rng(9);
  WriterId<double> wid;
  wid.init(tiny_wid(), rng);
  GenConfig cfg = tiny_gen();
  cfg.wiring = Wiring::kPaperLiteral;
  Generator<double> gen;
  gen.init(cfg, rng);
  ContentSequence seq = render_text(test_font(), "ab", 8);
  Tensor<double> style_img = Tensor<double>::randn({1, 32, 32}, rng, 0.3);

  auto forward_sum = [&]() {
    Graph<double> g(false);
    StyleEmbedding<double> style =
        wid.embed_style(g, {Var<double>::constant(style_img)});
    return sum(gen.synthesize(g, seq, style)).scalar();
  };
  Graph<double> g;
  StyleEmbedding<double> style = wid.embed_style(g, {g.constant(style_img)});
  backward_scalar(sum(gen.synthesize(g, seq, style)));
  const Tensor<double>* analytic = g.grad_for(gen.fuse_blocks[0].cross_mha.wq.w);
  REQUIRE(analytic != nullptr);
  std::vector<size_t> coords;
  for (size_t i = 0; i < gen.fuse_blocks[0].cross_mha.wq.w.size() && coords.size() < 8;
       i += 9)
    coords.push_back(i);
  CHECK(finite_diff_check_param(forward_sum, gen.fuse_blocks[0].cross_mha.wq.w,
                                *analytic, coords, 1e-4) < 1e-3);
}

TEST_CASE("decoder channel list must match the stage count") {
  GenConfig cfg = tiny_gen(2);
  cfg.decoder_channels = {8, 8};  // needs 3 stages
  Generator<double> gen;
  Rng rng(8);
  CHECK_THROWS_AS(gen.init(cfg, rng), ConfigError);
  cfg.n_scales = 7;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_SUITE_END();
