// Generator: fuses content tokens (glyph embeddings + sinusoidal positions)
// with style tokens through decoder cross-attention, refines over a
// multi-scale token grid with CPE, and decodes to a 32 x 16L image with a
// small upsampling conv stack ending in tanh.
#pragma once

#include <string>
#include <vector>

#include "scrawl/errors.hpp"
#include "scrawl/glyphs.hpp"
#include "scrawl/nn.hpp"
#include "scrawl/writerid.hpp"

namespace scrawl {

enum class Wiring { kConventional, kPaperLiteral };

inline Wiring wiring_from_string(const std::string& s) {
  if (s == "conventional") return Wiring::kConventional;
  if (s == "paper-literal") return Wiring::kPaperLiteral;
  throw ConfigError("wiring must be 'conventional' or 'paper-literal', got '" + s + "'");
}

inline const char* wiring_to_string(Wiring w) {
  return w == Wiring::kConventional ? "conventional" : "paper-literal";
}

struct GenConfig {
  BlockConfig block;
  Wiring wiring = Wiring::kConventional;
  int n_scales = 2;
  int fuse_layers = 2;       // decoder blocks in the fusion stage
  int layers_per_scale = 1;  // encoder blocks per refinement scale
  bool use_cpe = true;
  bool use_vit = true;  // ablation: false = conv-only fusion/refinement
  std::vector<int> decoder_channels;  // one entry per upsampling stage

  // grid after refinement: (2*2^(k-1), 2L*2^(k-1)); the decoder upsamples
  // (2,2) stages then one final (2,1) stage to land exactly on 32 x 16L
  int grid_h() const { return 2 << (n_scales - 1); }
  int n_decoder_stages() const { return (4 - n_scales) + 1; }

  void validate() const {
    block.validate();
    if (n_scales < 1 || n_scales > 4)
      throw ConfigError("GenConfig: n_scales must be in 1..4");
    if (fuse_layers < 1 || layers_per_scale < 0)
      throw ConfigError("GenConfig: bad layer counts");
    if (!decoder_channels.empty() &&
        int(decoder_channels.size()) != n_decoder_stages())
      throw ConfigError("GenConfig: decoder_channels must have " +
                        std::to_string(n_decoder_stages()) + " entries");
  }
};

template <class T>
struct Generator {
  GenConfig cfg;
  Linear<T> content_proj;  // 256 -> d
  std::vector<DecoderBlock<T>> fuse_blocks;
  Linear<T> style_pool_proj;  // non-ViT fusion path
  Linear<T> expand;           // d -> 4d coarse-grid expansion
  struct Scale {
    Linear<T> mix;  // post-upsample token mixing (absent at scale 0)
    Cpe<T> cpe;
    std::vector<EncoderBlock<T>> blocks;
    Tensor<T> cw1, cb1, cw2, cb2;  // conv refinement (use_vit = false)
  };
  std::vector<Scale> scales;
  struct DecStage {
    Tensor<T> w, b;
    int up_h = 2, up_w = 2;
  };
  std::vector<DecStage> dec_stages;
  Tensor<T> out_w, out_b;  // final 3x3 conv to 1 channel

  void init(const GenConfig& c, Rng& rng) {
    cfg = c;
    cfg.validate();
    const int d = cfg.block.d_model;
    if (cfg.decoder_channels.empty()) {
      cfg.decoder_channels.resize(size_t(cfg.n_decoder_stages()));
      int ch = std::max(8, d / 2);
      for (auto& e : cfg.decoder_channels) {
        e = ch;
        ch = std::max(8, ch / 2);
      }
    }
    content_proj.init(256, d, rng);
    fuse_blocks.assign(size_t(cfg.fuse_layers), {});
    for (auto& b : fuse_blocks) b.init(cfg.block, rng);
    style_pool_proj.init(d, d, rng);
    expand.init(d, 4 * d, rng);
    scales.clear();
    scales.resize(size_t(cfg.n_scales));
    for (int s = 0; s < cfg.n_scales; ++s) {
      Scale& sc = scales[size_t(s)];
      if (s > 0) sc.mix.init(d, d, rng);
      sc.cpe.init(d, rng);
      if (cfg.use_vit) {
        sc.blocks.assign(size_t(cfg.layers_per_scale), {});
        for (auto& b : sc.blocks) b.init(cfg.block, rng);
      } else {
        sc.cw1 = init_fan_in<T>({d, d, 3, 3}, d * 9, rng);
        sc.cb1 = Tensor<T>::zeros({1, d});
        sc.cw2 = init_fan_in<T>({d, d, 3, 3}, d * 9, rng);
        sc.cb2 = Tensor<T>::zeros({1, d});
      }
    }
    dec_stages.clear();
    int ci = d;
    for (int s = 0; s < cfg.n_decoder_stages(); ++s) {
      DecStage st;
      st.up_h = 2;
      st.up_w = (s == cfg.n_decoder_stages() - 1) ? 1 : 2;
      const int co = cfg.decoder_channels[size_t(s)];
      st.w = init_fan_in<T>({co, ci, 3, 3}, ci * 9, rng);
      st.b = Tensor<T>::zeros({1, co});
      dec_stages.push_back(std::move(st));
      ci = co;
    }
    out_w = init_fan_in<T>({1, ci, 3, 3}, ci * 9, rng);
    out_b = Tensor<T>::zeros({1, 1});
  }

  // content tokens [L, d]: glyph rows projected plus sinusoidal positions
  Var<T> content_tokens(Graph<T>& g, const ContentSequence& seq) const {
    if (seq.d_model != cfg.block.d_model)
      throw ConfigError("content sequence d_model mismatch");
    Var<T> tok = content_proj.apply(g, g.constant(seq.tokens<T>()));
    return add(tok, g.constant(seq.positions<T>()));
  }

  // cross-attention fusion; output has exactly L rows
  Var<T> fuse(Graph<T>& g, const Var<T>& content, const StyleEmbedding<T>& style) const {
    if (content.shape()[1] != cfg.block.d_model ||
        style.tokens.shape()[1] != cfg.block.d_model)
      throw ConfigError("fuse: d_model mismatch");
    const int l = content.shape()[0];
    if (!cfg.use_vit) {
      // conv-baseline fusion: pooled style broadcast onto content tokens
      return add_rowvec(content, style_pool_proj.apply(g, style.pooled));
    }
    if (cfg.wiring == Wiring::kConventional) {
      Var<T> x = content;  // queries; style tokens serve as keys/values
      for (const auto& b : fuse_blocks) x = b.apply(g, x, style.tokens);
      return x;
    }
    // paper-literal: the style stream carries queries and the residual values,
    // content tokens serve as keys; S outputs are resampled back to length L
    Var<T> x = style.tokens;
    for (const auto& b : fuse_blocks) x = b.apply(g, x, content);
    return resample_rows(g, x, l);
  }

  // tokens [L,d] -> refined grid tokens; grid is (2,2L) doubled per scale
  Var<T> multi_scale_refine(Graph<T>& g, const Var<T>& tokens, int* out_h,
                            int* out_w_cells) const {
    const int l = tokens.shape()[0];
    const int d = cfg.block.d_model;
    // learned expansion: each token becomes a 2x2 cell block
    Var<T> ex = expand.apply(g, tokens);  // [L, 4d]
    auto map = std::make_shared<std::vector<size_t>>(size_t(l) * 4 * size_t(d));
    size_t o = 0;
    for (int r = 0; r < 2; ++r)
      for (int col = 0; col < 2 * l; ++col) {
        const int ch = col / 2, cc = col % 2;
        for (int k = 0; k < d; ++k)
          (*map)[o++] = size_t(ch) * size_t(4 * d) + size_t((r * 2 + cc) * d + k);
      }
    Var<T> grid = permute_elements(ex, std::move(map), {2 * 2 * l, d});
    int h = 2, w = 2 * l;
    for (int s = 0; s < cfg.n_scales; ++s) {
      const Scale& sc = scales[size_t(s)];
      if (s > 0) {
        grid = upsample_tokens(grid, h, w, 2, 2);
        h *= 2;
        w *= 2;
        grid = sc.mix.apply(g, grid);
      }
      if (cfg.use_cpe) grid = sc.cpe.apply(g, grid, h, w);
      if (cfg.use_vit) {
        for (const auto& b : sc.blocks) grid = b.apply(g, grid);
      } else {
        Var<T> m = tokens_to_chw(grid, h, w);
        Var<T> y = gelu(conv2d(m, g.param(sc.cw1), g.param(sc.cb1), 1, 1, 1, 1));
        y = conv2d(y, g.param(sc.cw2), g.param(sc.cb2), 1, 1, 1, 1);
        grid = chw_to_tokens(add(m, y));
      }
    }
    *out_h = h;
    *out_w_cells = w;
    return grid;
  }

  // grid tokens -> image [1, 32, 16L] in [-1,1]
  Var<T> conv_decode(Graph<T>& g, const Var<T>& grid, int h, int w) const {
    Var<T> x = tokens_to_chw(grid, h, w);
    for (const auto& st : dec_stages) {
      x = upsample_chw(x, st.up_h, st.up_w);
      x = gelu(conv2d(x, g.param(st.w), g.param(st.b), 1, 1, 1, 1));
    }
    x = conv2d(x, g.param(out_w), g.param(out_b), 1, 1, 1, 1);
    return tanh_op(x);
  }

  // full composition for one text
  Var<T> synthesize(Graph<T>& g, const ContentSequence& seq,
                    const StyleEmbedding<T>& style) const {
    Var<T> fused = fuse(g, content_tokens(g, seq), style);
    int h = 0, w = 0;
    Var<T> grid = multi_scale_refine(g, fused, &h, &w);
    Var<T> img = conv_decode(g, grid, h, w);
    if (img.shape()[1] != 32 || img.shape()[2] != 16 * seq.length())
      throw NumericError("generator produced wrong geometry " +
                         img.value().shape_str());
    return img;
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    content_proj.visit(prefix + ".content_proj", fn);
    for (size_t i = 0; i < fuse_blocks.size(); ++i)
      fuse_blocks[i].visit(prefix + ".fuse" + std::to_string(i), fn);
    if (!cfg.use_vit) style_pool_proj.visit(prefix + ".style_pool_proj", fn);
    expand.visit(prefix + ".expand", fn);
    for (size_t s = 0; s < scales.size(); ++s) {
      const std::string p = prefix + ".scale" + std::to_string(s);
      if (s > 0) scales[s].mix.visit(p + ".mix", fn);
      scales[s].cpe.visit(p + ".cpe", fn);
      if (cfg.use_vit) {
        for (size_t i = 0; i < scales[s].blocks.size(); ++i)
          scales[s].blocks[i].visit(p + ".block" + std::to_string(i), fn);
      } else {
        fn(p + ".conv1.w", scales[s].cw1);
        fn(p + ".conv1.b", scales[s].cb1);
        fn(p + ".conv2.w", scales[s].cw2);
        fn(p + ".conv2.b", scales[s].cb2);
      }
    }
    for (size_t s = 0; s < dec_stages.size(); ++s) {
      fn(prefix + ".dec" + std::to_string(s) + ".w", dec_stages[s].w);
      fn(prefix + ".dec" + std::to_string(s) + ".b", dec_stages[s].b);
    }
    fn(prefix + ".out.w", out_w);
    fn(prefix + ".out.b", out_b);
  }
};

template <class T>
struct GeneratedBatch {
  std::vector<Tensor<T>> images;  // [1, 32, 16L] each
  std::vector<std::string> texts;
  int writer_id = 0;
};

// pure function of (parameters, style images, texts): embed the style once,
// then render/fuse/refine/decode each text
template <class T>
GeneratedBatch<T> generate(const Generator<T>& gen, const WriterId<T>& writer,
                           const std::vector<Tensor<T>>& style_images, int writer_id,
                           const std::vector<std::string>& texts,
                           const GlyphTable& font) {
  Graph<T> g(false);
  std::vector<Var<T>> style_vars;
  style_vars.reserve(style_images.size());
  for (const auto& img : style_images) style_vars.push_back(g.constant(img));
  const StyleEmbedding<T> style = writer.embed_style(g, style_vars);

  GeneratedBatch<T> out;
  out.writer_id = writer_id;
  for (const auto& text : texts) {
    const ContentSequence seq = render_text(font, text, gen.cfg.block.d_model);
    out.images.push_back(gen.synthesize(g, seq, style).value().clone());
    out.texts.push_back(seq.text);
  }
  return out;
}

}  // namespace scrawl
