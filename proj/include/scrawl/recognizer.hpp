// Recognizer: trimmed residual conv stem (x8 vertical, x4 horizontal
// downsampling) feeding a ViT with CPE, with per-timestep character logits.
// The recognition loss is alignment-free: the forward dynamic program over
// blank-interleaved labels, built on the tape so gradients come for free.
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "scrawl/errors.hpp"
#include "scrawl/nn.hpp"
#include "scrawl/unicode.hpp"

namespace scrawl {

// ordered symbol list; class 0 is the reserved blank, symbol i maps to i+1
struct Charset {
  std::vector<char32_t> symbols;
  std::map<char32_t, int> index;  // symbol -> class (1-based)

  static Charset from_texts(const std::vector<std::string>& texts) {
    std::set<char32_t> seen;
    for (const auto& t : texts)
      for (char32_t cp : nfc_normalize(utf8_decode(t))) seen.insert(cp);
    Charset cs;
    for (char32_t cp : seen) {
      cs.index[cp] = int(cs.symbols.size()) + 1;
      cs.symbols.push_back(cp);
    }
    return cs;
  }

  static Charset from_symbols(const std::vector<char32_t>& symbols) {
    Charset cs;
    for (char32_t cp : symbols) {
      if (!cs.index.emplace(cp, int(cs.symbols.size()) + 1).second)
        throw ConfigError("Charset: duplicate symbol");
      cs.symbols.push_back(cp);
    }
    return cs;
  }

  int n_classes() const { return int(symbols.size()) + 1; }

  std::vector<int> encode(const std::string& text) const {
    std::vector<int> out;
    for (char32_t cp : nfc_normalize(utf8_decode(text))) {
      auto it = index.find(cp);
      if (it == index.end()) throw DataError("Charset: unknown character in transcript");
      out.push_back(it->second);
    }
    return out;
  }
};

struct RecognizerConfig {
  BlockConfig block;
  int n_classes = 2;  // charset size + blank
  bool use_vit = true;
  int stem_c1 = 32, stem_c2 = 64;
};

template <class T>
struct Recognizer {
  RecognizerConfig cfg;
  // stem
  Tensor<T> w0, b0;                    // 3x3 s1 entry conv
  Tensor<T> wa1, ba1, pa1, pab1;       // stage A block 1: 4x4 s(2,2) + proj
  Tensor<T> wa2, ba2;                  // stage A block 2: 3x3 s1 residual
  Tensor<T> wb1, bb1, pb1, pbb1;       // stage B block 1: 4x4 s(2,2) + proj
  Tensor<T> wb2, bb2, pb2, pbb2;       // stage B block 2: (4,3) s(2,1) + proj
  Linear<T> token_proj;                // stacked column -> d_model
  Cpe<T> cpe;
  std::vector<EncoderBlock<T>> blocks;
  Tensor<T> tw1, tb1, tw2, tb2;        // temporal conv path (use_vit = false)
  Linear<T> head;                      // d_model -> n_classes

  void init(const RecognizerConfig& c, Rng& rng) {
    cfg = c;
    cfg.block.validate();
    if (cfg.n_classes < 2) throw ConfigError("Recognizer: need at least one symbol");
    const int c1 = cfg.stem_c1, c2 = cfg.stem_c2, d = cfg.block.d_model;
    w0 = init_fan_in<T>({c1, 1, 3, 3}, 9, rng);
    b0 = Tensor<T>::zeros({1, c1});
    wa1 = init_fan_in<T>({c1, c1, 4, 4}, c1 * 16, rng);
    ba1 = Tensor<T>::zeros({1, c1});
    pa1 = init_fan_in<T>({c1, c1, 2, 2}, c1 * 4, rng);
    pab1 = Tensor<T>::zeros({1, c1});
    wa2 = init_fan_in<T>({c1, c1, 3, 3}, c1 * 9, rng);
    ba2 = Tensor<T>::zeros({1, c1});
    wb1 = init_fan_in<T>({c2, c1, 4, 4}, c1 * 16, rng);
    bb1 = Tensor<T>::zeros({1, c2});
    pb1 = init_fan_in<T>({c2, c1, 2, 2}, c1 * 4, rng);
    pbb1 = Tensor<T>::zeros({1, c2});
    wb2 = init_fan_in<T>({c2, c2, 4, 3}, c2 * 12, rng);
    bb2 = Tensor<T>::zeros({1, c2});
    pb2 = init_fan_in<T>({c2, c2, 2, 1}, c2 * 2, rng);
    pbb2 = Tensor<T>::zeros({1, c2});
    token_proj.init(c2 * 4, d, rng);
    if (cfg.use_vit) {
      cpe.init(d, rng);
      blocks.resize(size_t(cfg.block.n_layers));
      for (auto& b : blocks) b.init(cfg.block, rng);
    } else {
      tw1 = init_fan_in<T>({d, d, 1, 3}, d * 3, rng);
      tb1 = Tensor<T>::zeros({1, d});
      tw2 = init_fan_in<T>({d, d, 1, 3}, d * 3, rng);
      tb2 = Tensor<T>::zeros({1, d});
    }
    head.init(d, cfg.n_classes, rng);
  }

  // image [1,32,W] -> logits [floor(W/4), n_classes]
  Var<T> recognize(Graph<T>& g, const Var<T>& image) const {
    if (image.shape().size() != 3 || image.shape()[0] != 1 || image.shape()[1] != 32)
      throw DataError("recognize: want image [1,32,W], got " +
                      image.value().shape_str());
    Var<T> x = gelu(conv2d(image, g.param(w0), g.param(b0), 1, 1, 1, 1));
    // stage A: 32xW -> 16xW/2
    x = gelu(add(conv2d(x, g.param(wa1), g.param(ba1), 2, 2, 1, 1),
                 conv2d(x, g.param(pa1), g.param(pab1), 2, 2, 0, 0)));
    x = gelu(add(conv2d(x, g.param(wa2), g.param(ba2), 1, 1, 1, 1), x));
    // stage B: 16xW/2 -> 8xW/4 -> 4xW/4
    x = gelu(add(conv2d(x, g.param(wb1), g.param(bb1), 2, 2, 1, 1),
                 conv2d(x, g.param(pb1), g.param(pbb1), 2, 2, 0, 0)));
    x = gelu(add(conv2d(x, g.param(wb2), g.param(bb2), 2, 1, 1, 1),
                 conv2d(x, g.param(pb2), g.param(pbb2), 2, 1, 0, 0)));
    // [c2, 4, T] -> [T, 4*c2] -> d_model
    Var<T> tok = token_proj.apply(g, columns_to_tokens(x));
    const int t_len = tok.shape()[0];
    if (cfg.use_vit) {
      tok = cpe.apply(g, tok, 1, t_len);
      for (const auto& b : blocks) tok = b.apply(g, tok);
    } else {
      Var<T> map = tokens_to_chw(tok, 1, t_len);
      map = gelu(add(conv2d(map, g.param(tw1), g.param(tb1), 1, 1, 0, 1), map));
      map = gelu(add(conv2d(map, g.param(tw2), g.param(tb2), 1, 1, 0, 1), map));
      tok = chw_to_tokens(map);
    }
    return head.apply(g, tok);
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    fn(prefix + ".stem.w0", w0);
    fn(prefix + ".stem.b0", b0);
    fn(prefix + ".stem.a1.w", wa1);
    fn(prefix + ".stem.a1.b", ba1);
    fn(prefix + ".stem.a1.proj.w", pa1);
    fn(prefix + ".stem.a1.proj.b", pab1);
    fn(prefix + ".stem.a2.w", wa2);
    fn(prefix + ".stem.a2.b", ba2);
    fn(prefix + ".stem.b1.w", wb1);
    fn(prefix + ".stem.b1.b", bb1);
    fn(prefix + ".stem.b1.proj.w", pb1);
    fn(prefix + ".stem.b1.proj.b", pbb1);
    fn(prefix + ".stem.b2.w", wb2);
    fn(prefix + ".stem.b2.b", bb2);
    fn(prefix + ".stem.b2.proj.w", pb2);
    fn(prefix + ".stem.b2.proj.b", pbb2);
    token_proj.visit(prefix + ".token_proj", fn);
    if (cfg.use_vit) {
      cpe.visit(prefix + ".cpe", fn);
      for (size_t i = 0; i < blocks.size(); ++i)
        blocks[i].visit(prefix + ".block" + std::to_string(i), fn);
    } else {
      fn(prefix + ".tconv1.w", tw1);
      fn(prefix + ".tconv1.b", tb1);
      fn(prefix + ".tconv2.w", tw2);
      fn(prefix + ".tconv2.b", tb2);
    }
    head.visit(prefix + ".head", fn);
  }
};

// minimum number of timesteps a label sequence needs (repeats force a blank)
inline int min_timesteps(const std::vector<int>& labels) {
  int t = int(labels.size());
  for (size_t i = 1; i < labels.size(); ++i)
    if (labels[i] == labels[i - 1]) ++t;
  return t;
}

// alignment-free negative log-likelihood over all blank-augmented monotone
// alignments; logits [T, n_classes], blank = class 0
template <class T>
Var<T> recognition_loss(const Var<T>& logits, const std::vector<int>& labels) {
  if (logits.shape().size() != 2)
    throw DataError("recognition_loss: want logits [T,C]");
  const int t_len = logits.shape()[0];
  const int n_classes = logits.shape()[1];
  if (labels.empty()) throw DataError("recognition_loss: empty transcript");
  for (int l : labels)
    if (l < 1 || l >= n_classes)
      throw DataError("recognition_loss: label class out of range");
  if (min_timesteps(labels) > t_len)
    throw DataError("recognition_loss: transcript too long for " +
                    std::to_string(t_len) + " timesteps");

  Var<T> logp = log_softmax_rows(logits);
  const int s_len = 2 * int(labels.size()) + 1;
  auto label_at = [&](int s) { return s % 2 == 0 ? 0 : labels[size_t(s / 2)]; };

  // alpha[s] holds log-probability Vars; unreachable states stay empty
  std::vector<std::optional<Var<T>>> alpha(static_cast<size_t>(s_len));
  alpha[0] = pick(logp, 0, 0);
  if (s_len > 1) alpha[1] = pick(logp, 0, label_at(1));

  for (int t = 1; t < t_len; ++t) {
    std::vector<std::optional<Var<T>>> next(static_cast<size_t>(s_len));
    // reachability window: must still be able to finish, cannot be ahead of time
    const int s_min = std::max(0, s_len - 2 * (t_len - t));
    const int s_max = std::min(2 * t + 1, s_len - 1);
    for (int s = s_min; s <= s_max; ++s) {
      std::optional<Var<T>> acc = alpha[size_t(s)];
      if (s >= 1 && alpha[size_t(s - 1)])
        acc = acc ? logadd(*acc, *alpha[size_t(s - 1)]) : alpha[size_t(s - 1)];
      const int lab = label_at(s);
      if (lab != 0 && s >= 2 && label_at(s - 2) != lab && alpha[size_t(s - 2)])
        acc = acc ? logadd(*acc, *alpha[size_t(s - 2)]) : alpha[size_t(s - 2)];
      if (acc) next[size_t(s)] = add(*acc, pick(logp, t, lab));
    }
    alpha.swap(next);
  }

  std::optional<Var<T>> total = alpha[size_t(s_len - 1)];
  if (s_len > 1 && alpha[size_t(s_len - 2)])
    total = total ? logadd(*total, *alpha[size_t(s_len - 2)]) : alpha[size_t(s_len - 2)];
  if (!total)
    throw NumericError("recognition_loss: no feasible alignment");
  return scale(*total, T(-1));
}

template <class T>
Var<T> recognition_loss(const Var<T>& logits, const std::string& transcript,
                        const Charset& charset) {
  return recognition_loss(logits, charset.encode(transcript));
}

// per-timestep argmax, collapse adjacent repeats, drop blanks
template <class T>
std::string greedy_decode(const Tensor<T>& logits, const Charset& charset) {
  if (logits.rank() != 2) throw DataError("greedy_decode: want logits [T,C]");
  std::vector<char32_t> out;
  int prev = 0;
  for (int t = 0; t < logits.rows(); ++t) {
    int best = 0;
    for (int c = 1; c < logits.cols(); ++c)
      if (logits.at(t, c) > logits.at(t, best)) best = c;
    if (best != 0 && best != prev) out.push_back(charset.symbols[size_t(best - 1)]);
    prev = best;
  }
  return utf8_encode(out);
}

}  // namespace scrawl
