// Writer identifier: encodes style images into style tokens for the
// generator and classifies writer identity. ViT backbone (4x8 patches + CPE +
// encoder stack) or, for the ablation baseline, a small conv encoder.
#pragma once

#include <string>
#include <vector>

#include "scrawl/errors.hpp"
#include "scrawl/nn.hpp"

namespace scrawl {

struct WriterIdConfig {
  BlockConfig block;
  int n_writers = 2;
  bool use_vit = true;
  int patch_h = 4, patch_w = 8;
};

template <class T>
struct StyleEmbedding {
  Var<T> tokens;  // [S, d]
  Var<T> pooled;  // [1, d], arithmetic mean of token rows
};

template <class T>
struct WriterId {
  WriterIdConfig cfg;
  // ViT path
  Linear<T> patch_embed;
  Cpe<T> cpe;
  std::vector<EncoderBlock<T>> blocks;
  // conv path (use_vit = false)
  Tensor<T> cw1, cb1, cw2, cb2, cw3, cb3;
  // shared classification head
  Linear<T> head;

  void init(const WriterIdConfig& c, Rng& rng) {
    cfg = c;
    cfg.block.validate();
    if (cfg.n_writers < 1) throw ConfigError("WriterId: n_writers must be >= 1");
    const int d = cfg.block.d_model;
    if (cfg.use_vit) {
      patch_embed.init(cfg.patch_h * cfg.patch_w, d, rng);
      cpe.init(d, rng);
      blocks.resize(size_t(cfg.block.n_layers));
      for (auto& b : blocks) b.init(cfg.block, rng);
    } else {
      cw1 = init_fan_in<T>({16, 1, 4, 4}, 16, rng);
      cb1 = Tensor<T>::zeros({1, 16});
      cw2 = init_fan_in<T>({32, 16, 4, 4}, 16 * 16, rng);
      cb2 = Tensor<T>::zeros({1, 32});
      cw3 = init_fan_in<T>({d, 32, 4, 4}, 32 * 16, rng);
      cb3 = Tensor<T>::zeros({1, d});
    }
    head.init(d, cfg.n_writers, rng);
  }

  // per-image token block; image [1,32,W]
  Var<T> encode_image(Graph<T>& g, const Var<T>& image) const {
    if (image.shape().size() != 3 || image.shape()[0] != 1 || image.shape()[1] != 32)
      throw DataError("WriterId: style image must be [1,32,W], got " +
                      image.value().shape_str());
    if (cfg.use_vit) {
      const int gh = 32 / cfg.patch_h;
      const int gw = image.shape()[2] / cfg.patch_w;
      if (image.shape()[2] % cfg.patch_w != 0)
        throw DataError("WriterId: image width not divisible by patch width");
      Var<T> patches = extract_patches(image, cfg.patch_h, cfg.patch_w);
      Var<T> tok = patch_embed.apply(g, patches);
      tok = cpe.apply(g, tok, gh, gw);
      for (const auto& b : blocks) tok = b.apply(g, tok);
      return tok;
    }
    Var<T> y = gelu(conv2d(image, g.param(cw1), g.param(cb1), 2, 2, 1, 1));
    y = gelu(conv2d(y, g.param(cw2), g.param(cb2), 2, 2, 1, 1));
    y = gelu(conv2d(y, g.param(cw3), g.param(cb3), 2, 2, 1, 1));
    return chw_to_tokens(y);
  }

  // tokens from all P images concatenated; pooled = mean over tokens
  StyleEmbedding<T> embed_style(Graph<T>& g, const std::vector<Var<T>>& images) const {
    if (images.empty()) throw DataError("WriterId: empty style set");
    std::vector<Var<T>> parts;
    parts.reserve(images.size());
    for (const auto& img : images) parts.push_back(encode_image(g, img));
    Var<T> tokens = parts.size() == 1 ? parts[0] : concat_rows(parts);
    return {tokens, mean_rows(tokens)};
  }

  Var<T> classify(Graph<T>& g, const StyleEmbedding<T>& e) const {
    return head.apply(g, e.pooled);  // unnormalized logits [1, n_writers]
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    if (cfg.use_vit) {
      patch_embed.visit(prefix + ".patch_embed", fn);
      cpe.visit(prefix + ".cpe", fn);
      for (size_t i = 0; i < blocks.size(); ++i)
        blocks[i].visit(prefix + ".block" + std::to_string(i), fn);
    } else {
      fn(prefix + ".conv1.w", cw1);
      fn(prefix + ".conv1.b", cb1);
      fn(prefix + ".conv2.w", cw2);
      fn(prefix + ".conv2.b", cb2);
      fn(prefix + ".conv3.w", cw3);
      fn(prefix + ".conv3.b", cb3);
    }
    head.visit(prefix + ".head", fn);
  }
};

// negative log softmax probability of the true writer
template <class T>
Var<T> writer_loss(const Var<T>& logits, int true_writer) {
  if (logits.shape().size() != 2 || logits.shape()[0] != 1)
    throw DataError("writer_loss: want logits [1,n]");
  if (true_writer < 0 || true_writer >= logits.shape()[1])
    throw DataError("writer_loss: writer index out of range");
  return scale(pick(log_softmax_rows(logits), 0, true_writer), T(-1));
}

}  // namespace scrawl
