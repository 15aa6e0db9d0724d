// Shared differentiable building blocks: parameter registry, linear layers,
// multi-head attention, pre-norm transformer encoder/decoder blocks,
// conditional positional encoding, token/grid rearrangement, and the
// finite-difference gradient-check harness.
#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "scrawl/autograd.hpp"
#include "scrawl/rng.hpp"
#include "scrawl/tensor.hpp"

namespace scrawl {

struct BlockConfig {
  int d_model = 128;
  int n_heads = 4;
  int d_ff = 256;
  int n_layers = 2;
  double dropout = 0.0;

  void validate() const {
    if (d_model <= 0 || n_heads <= 0 || d_ff <= 0 || n_layers <= 0)
      throw std::invalid_argument("BlockConfig: nonpositive field");
    if (d_model % n_heads != 0)
      throw std::invalid_argument("BlockConfig: d_model not divisible by n_heads");
    if (dropout < 0.0 || dropout >= 1.0)
      throw std::invalid_argument("BlockConfig: dropout must be in [0,1)");
  }
};

// One tape-building context. Parameter leaves are cached by buffer address so
// repeated uses of the same tensor share a node and gradients accumulate.
template <class T>
class Graph {
 public:
  explicit Graph(bool trainable = true) : trainable_(trainable) {}

  Var<T> param(const Tensor<T>& t) {
    const void* key = t.data();
    auto it = leaves_.find(key);
    if (it != leaves_.end()) return it->second;
    Var<T> v = Var<T>::leaf(t, trainable_);  // shares the buffer
    leaves_.emplace(key, v);
    return v;
  }

  Var<T> constant(Tensor<T> t) const { return Var<T>::constant(std::move(t)); }

  void set_trainable(bool v) { trainable_ = v; }
  bool trainable() const { return trainable_; }

  // dropout is active only when an rng is attached (training mode)
  void attach_dropout_rng(Rng* rng) { rng_ = rng; }
  Rng* dropout_rng() const { return rng_; }

  // gradient of the leaf bound to this tensor, if any flowed into it
  const Tensor<T>* grad_for(const Tensor<T>& t) const {
    auto it = leaves_.find(t.data());
    if (it == leaves_.end()) return nullptr;
    const Tensor<T>& g = it->second.node()->grad;
    return g.defined() ? &g : nullptr;
  }

 private:
  bool trainable_;
  Rng* rng_ = nullptr;
  std::unordered_map<const void*, Var<T>> leaves_;
};

template <class T>
using ParamVisitor = std::function<void(const std::string&, Tensor<T>&)>;

// fan-in scaled uniform init, biases zero
template <class T>
Tensor<T> init_fan_in(std::vector<int> shape, int fan_in, Rng& rng) {
  const T limit = T(std::sqrt(3.0 / double(fan_in)));
  return Tensor<T>::uniform(std::move(shape), rng, -limit, limit);
}

template <class T>
Var<T> dropout(Graph<T>& g, const Var<T>& x, double rate) {
  if (rate <= 0.0 || g.dropout_rng() == nullptr) return x;
  Tensor<T> mask(x.shape());
  const T keep = T(1.0 - rate);
  for (size_t i = 0; i < mask.size(); ++i)
    mask[i] = (g.dropout_rng()->next_double() < rate) ? T(0) : T(1) / keep;
  return mul(x, g.constant(std::move(mask)));
}

// ---------------------------------------------------------------------------
// layers

template <class T>
struct Linear {
  Tensor<T> w;  // [in, out]
  Tensor<T> b;  // [1, out]

  void init(int in, int out, Rng& rng) {
    w = init_fan_in<T>({in, out}, in, rng);
    b = Tensor<T>::zeros({1, out});
  }

  Var<T> apply(Graph<T>& g, const Var<T>& x) const {
    return add_rowvec(matmul(x, g.param(w)), g.param(b));
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    fn(prefix + ".w", w);
    fn(prefix + ".b", b);
  }
};

template <class T>
struct LayerNorm {
  Tensor<T> gamma, beta;  // [1, d]

  void init(int d) {
    gamma = Tensor<T>::full({1, d}, T(1));
    beta = Tensor<T>::zeros({1, d});
  }

  Var<T> apply(Graph<T>& g, const Var<T>& x) const {
    return layer_norm_rows(x, g.param(gamma), g.param(beta));
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    fn(prefix + ".gamma", gamma);
    fn(prefix + ".beta", beta);
  }
};

template <class T>
struct MultiHeadAttention {
  int d = 0;
  int heads = 1;
  Linear<T> wq, wk, wv, wo;

  void init(int d_model, int n_heads, Rng& rng) {
    if (d_model % n_heads != 0)
      throw std::invalid_argument("MultiHeadAttention: d % heads != 0");
    d = d_model;
    heads = n_heads;
    wq.init(d, d, rng);
    wk.init(d, d, rng);
    wv.init(d, d, rng);
    wo.init(d, d, rng);
  }

  // q[Lq,d], k[Lk,d], v[Lk,d] -> [Lq,d]
  Var<T> apply(Graph<T>& g, const Var<T>& q, const Var<T>& k, const Var<T>& v) const {
    if (q.shape()[1] != d || k.shape()[1] != d || v.shape()[1] != d)
      throw std::invalid_argument("MultiHeadAttention: d_model mismatch");
    if (k.shape()[0] != v.shape()[0])
      throw std::invalid_argument("MultiHeadAttention: key/value length mismatch");
    const int dh = d / heads;
    const T inv_sqrt = T(1) / T(std::sqrt(double(dh)));
    Var<T> qp = wq.apply(g, q), kp = wk.apply(g, k), vp = wv.apply(g, v);
    std::vector<Var<T>> outs;
    outs.reserve(size_t(heads));
    for (int h = 0; h < heads; ++h) {
      Var<T> qh = slice_cols(qp, h * dh, (h + 1) * dh);
      Var<T> kh = slice_cols(kp, h * dh, (h + 1) * dh);
      Var<T> vh = slice_cols(vp, h * dh, (h + 1) * dh);
      Var<T> scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
      outs.push_back(matmul(softmax_rows(scores), vh));
    }
    return wo.apply(g, concat_cols(outs));
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    wq.visit(prefix + ".wq", fn);
    wk.visit(prefix + ".wk", fn);
    wv.visit(prefix + ".wv", fn);
    wo.visit(prefix + ".wo", fn);
  }
};

// ---------------------------------------------------------------------------
// token/grid rearrangement

namespace gridmap {

inline std::shared_ptr<const std::vector<size_t>> tokens_to_chw_map(int h, int w, int d) {
  auto m = std::make_shared<std::vector<size_t>>(size_t(h) * w * d);
  size_t o = 0;
  for (int c = 0; c < d; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        (*m)[o++] = size_t(y * w + x) * size_t(d) + size_t(c);
  return m;
}

inline std::shared_ptr<const std::vector<size_t>> chw_to_tokens_map(int c, int h, int w) {
  auto m = std::make_shared<std::vector<size_t>>(size_t(c) * h * w);
  size_t o = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch)
        (*m)[o++] = (size_t(ch) * h + size_t(y)) * size_t(w) + size_t(x);
  return m;
}

}  // namespace gridmap

// tokens [h*w, d] laid out row-major over the grid -> feature map [d, h, w]
template <class T>
Var<T> tokens_to_chw(const Var<T>& tokens, int h, int w) {
  if (tokens.shape().size() != 2 || tokens.shape()[0] != h * w)
    throw std::invalid_argument("tokens_to_chw: token count != h*w");
  const int d = tokens.shape()[1];
  return permute_elements(tokens, gridmap::tokens_to_chw_map(h, w, d), {d, h, w});
}

template <class T>
Var<T> chw_to_tokens(const Var<T>& x) {
  if (x.shape().size() != 3) throw std::invalid_argument("chw_to_tokens: rank != 3");
  const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  return permute_elements(x, gridmap::chw_to_tokens_map(c, h, w), {h * w, c});
}

// feature map [C,H,W] -> [W, C*H] (one token per column, rows stacked)
template <class T>
Var<T> columns_to_tokens(const Var<T>& x) {
  if (x.shape().size() != 3) throw std::invalid_argument("columns_to_tokens: rank != 3");
  const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  auto m = std::make_shared<std::vector<size_t>>(size_t(c) * h * w);
  size_t o = 0;
  for (int x0 = 0; x0 < w; ++x0)
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        (*m)[o++] = (size_t(ch) * h + size_t(y)) * size_t(w) + size_t(x0);
  return permute_elements(x, std::move(m), {w, c * h});
}

// non-overlapping ph x pw patches of [C,H,W], row-major over the patch grid;
// each token is the flattened [C,ph,pw] block
template <class T>
Var<T> extract_patches(const Var<T>& x, int ph, int pw) {
  if (x.shape().size() != 3) throw std::invalid_argument("extract_patches: rank != 3");
  const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  if (h % ph != 0 || w % pw != 0)
    throw std::invalid_argument("extract_patches: size not divisible by patch");
  const int gh = h / ph, gw = w / pw;
  auto m = std::make_shared<std::vector<size_t>>(size_t(c) * h * w);
  size_t o = 0;
  for (int gy = 0; gy < gh; ++gy)
    for (int gx = 0; gx < gw; ++gx)
      for (int ch = 0; ch < c; ++ch)
        for (int py = 0; py < ph; ++py)
          for (int px = 0; px < pw; ++px)
            (*m)[o++] = (size_t(ch) * h + size_t(gy * ph + py)) * size_t(w) +
                        size_t(gx * pw + px);
  return permute_elements(x, std::move(m), {gh * gw, c * ph * pw});
}

// nearest-neighbor upsample of grid tokens: (h,w) -> (h*fh, w*fw)
template <class T>
Var<T> upsample_tokens(const Var<T>& tokens, int h, int w, int fh, int fw) {
  if (tokens.shape().size() != 2 || tokens.shape()[0] != h * w)
    throw std::invalid_argument("upsample_tokens: token count != h*w");
  const int d = tokens.shape()[1];
  const int h2 = h * fh, w2 = w * fw;
  auto m = std::make_shared<std::vector<size_t>>(size_t(h2) * w2 * d);
  size_t o = 0;
  for (int y = 0; y < h2; ++y)
    for (int x = 0; x < w2; ++x) {
      const size_t src = size_t((y / fh) * w + (x / fw)) * size_t(d);
      for (int ch = 0; ch < d; ++ch) (*m)[o++] = src + size_t(ch);
    }
  return permute_elements(tokens, std::move(m), {h2 * w2, d});
}

// nearest-neighbor upsample of a feature map [C,H,W] -> [C,H*fh,W*fw]
template <class T>
Var<T> upsample_chw(const Var<T>& x, int fh, int fw) {
  if (x.shape().size() != 3) throw std::invalid_argument("upsample_chw: rank != 3");
  const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  const int h2 = h * fh, w2 = w * fw;
  auto m = std::make_shared<std::vector<size_t>>(size_t(c) * h2 * w2);
  size_t o = 0;
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h2; ++y)
      for (int x0 = 0; x0 < w2; ++x0)
        (*m)[o++] = (size_t(ch) * h + size_t(y / fh)) * size_t(w) + size_t(x0 / fw);
  return permute_elements(x, std::move(m), {c, h2, w2});
}

// linear resampling along the row (sequence) axis to a new length
template <class T>
Var<T> resample_rows(Graph<T>& g, const Var<T>& tokens, int out_len) {
  const int in_len = tokens.shape()[0];
  if (out_len < 1) throw std::invalid_argument("resample_rows: out_len < 1");
  Tensor<T> r({out_len, in_len});
  for (int i = 0; i < out_len; ++i) {
    const double src = (double(i) + 0.5) * double(in_len) / double(out_len) - 0.5;
    const double lo = std::floor(src);
    const double frac = src - lo;
    int i0 = int(lo), i1 = i0 + 1;
    i0 = std::max(0, std::min(in_len - 1, i0));
    i1 = std::max(0, std::min(in_len - 1, i1));
    r.at(i, i0) += T(1.0 - frac);
    r.at(i, i1) += T(frac);
  }
  return matmul(g.constant(std::move(r)), tokens);
}

// ---------------------------------------------------------------------------
// transformer blocks (pre-norm residual layout)

template <class T>
struct EncoderBlock {
  MultiHeadAttention<T> mha;
  LayerNorm<T> ln1, ln2;
  Linear<T> ff1, ff2;
  double drop = 0.0;

  void init(const BlockConfig& cfg, Rng& rng) {
    cfg.validate();
    mha.init(cfg.d_model, cfg.n_heads, rng);
    ln1.init(cfg.d_model);
    ln2.init(cfg.d_model);
    ff1.init(cfg.d_model, cfg.d_ff, rng);
    ff2.init(cfg.d_ff, cfg.d_model, rng);
    drop = cfg.dropout;
  }

  Var<T> apply(Graph<T>& g, const Var<T>& x) const {
    Var<T> xn = ln1.apply(g, x);
    Var<T> a = add(x, dropout(g, mha.apply(g, xn, xn, xn), drop));
    Var<T> f = ff2.apply(g, dropout(g, gelu(ff1.apply(g, ln2.apply(g, a))), drop));
    return add(a, f);
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    mha.visit(prefix + ".mha", fn);
    ln1.visit(prefix + ".ln1", fn);
    ln2.visit(prefix + ".ln2", fn);
    ff1.visit(prefix + ".ff1", fn);
    ff2.visit(prefix + ".ff2", fn);
  }
};

template <class T>
struct DecoderBlock {
  MultiHeadAttention<T> self_mha, cross_mha;
  LayerNorm<T> ln1, ln2, ln3;
  Linear<T> ff1, ff2;
  double drop = 0.0;

  void init(const BlockConfig& cfg, Rng& rng) {
    cfg.validate();
    self_mha.init(cfg.d_model, cfg.n_heads, rng);
    cross_mha.init(cfg.d_model, cfg.n_heads, rng);
    ln1.init(cfg.d_model);
    ln2.init(cfg.d_model);
    ln3.init(cfg.d_model);
    ff1.init(cfg.d_model, cfg.d_ff, rng);
    ff2.init(cfg.d_ff, cfg.d_model, rng);
    drop = cfg.dropout;
  }

  // self-attention over tgt, cross-attention with mem as keys/values
  Var<T> apply(Graph<T>& g, const Var<T>& tgt, const Var<T>& mem) const {
    Var<T> tn = ln1.apply(g, tgt);
    Var<T> a = add(tgt, dropout(g, self_mha.apply(g, tn, tn, tn), drop));
    Var<T> b = add(a, dropout(g, cross_mha.apply(g, ln2.apply(g, a), mem, mem), drop));
    Var<T> f = ff2.apply(g, dropout(g, gelu(ff1.apply(g, ln3.apply(g, b))), drop));
    return add(b, f);
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    self_mha.visit(prefix + ".self", fn);
    cross_mha.visit(prefix + ".cross", fn);
    ln1.visit(prefix + ".ln1", fn);
    ln2.visit(prefix + ".ln2", fn);
    ln3.visit(prefix + ".ln3", fn);
    ff1.visit(prefix + ".ff1", fn);
    ff2.visit(prefix + ".ff2", fn);
  }
};

// Conditional positional encoding: residual depthwise 3x3 aggregation over the
// 2-D token grid; zero padding makes border tokens position-dependent.
template <class T>
struct Cpe {
  Tensor<T> w;  // [d,3,3]
  Tensor<T> b;  // [1,d]

  void init(int d, Rng& rng) {
    w = init_fan_in<T>({d, 3, 3}, 9, rng);
    b = Tensor<T>::zeros({1, d});
  }

  Var<T> apply(Graph<T>& g, const Var<T>& tokens, int h, int ww) const {
    if (h <= 0 || ww <= 0) throw std::invalid_argument("Cpe: grid shape required");
    Var<T> img = tokens_to_chw(tokens, h, ww);
    Var<T> agg = dwconv3x3(img, g.param(w), g.param(b));
    return add(tokens, chw_to_tokens(agg));
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    fn(prefix + ".w", w);
    fn(prefix + ".b", b);
  }
};

// sinusoidal positional encoding: (p, 2k) -> sin(p / 10000^(2k/d)),
// (p, 2k+1) -> cos(p / 10000^(2k/d))
template <class T>
Tensor<T> sinusoidal_pe(int len, int d) {
  if (len < 1) throw std::invalid_argument("sinusoidal_pe: L must be >= 1");
  if (d < 2 || d % 2 != 0)
    throw std::invalid_argument("sinusoidal_pe: d must be even and >= 2");
  Tensor<T> pe({len, d});
  for (int p = 0; p < len; ++p)
    for (int k = 0; 2 * k < d; ++k) {
      const double arg = double(p) / std::pow(10000.0, double(2 * k) / double(d));
      pe.at(p, 2 * k) = T(std::sin(arg));
      pe.at(p, 2 * k + 1) = T(std::cos(arg));
    }
  return pe;
}

// ---------------------------------------------------------------------------
// finite-difference gradient checking

// Max relative error between the tape gradient of a scalar-valued function and
// central differences at `point`. f maps a Var (same shape as point) to a
// scalar Var; it must not capture state across calls.
template <class T, class F>
T finite_diff_check(F&& f, const Tensor<T>& point, T eps) {
  if (eps <= T(0)) throw std::invalid_argument("finite_diff_check: eps <= 0");
  Var<T> x = Var<T>::leaf(point.clone(), true);
  Var<T> y = f(x);
  backward_scalar(y);
  Tensor<T> analytic = x.grad().defined() ? x.grad().clone()
                                          : Tensor<T>::zeros(point.shape());
  Tensor<T> p = point.clone();
  T worst = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    const T saved = p[i];
    p[i] = saved + eps;
    const T fp = f(Var<T>::constant(p.clone())).scalar();
    p[i] = saved - eps;
    const T fm = f(Var<T>::constant(p.clone())).scalar();
    p[i] = saved;
    const T numeric = (fp - fm) / (2 * eps);
    const T denom = std::max({std::abs(analytic[i]), std::abs(numeric), T(1e-8)});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

// Same comparison for selected coordinates of a parameter tensor that the
// evaluation closure reads in place. `analytic` is the tape gradient for
// `param` obtained from a prior backward pass.
template <class T, class FEval>
T finite_diff_check_param(FEval&& eval, Tensor<T>& param, const Tensor<T>& analytic,
                          const std::vector<size_t>& coords, T eps) {
  if (eps <= T(0)) throw std::invalid_argument("finite_diff_check_param: eps <= 0");
  T worst = 0;
  for (size_t i : coords) {
    const T saved = param[i];
    param[i] = saved + eps;
    const T fp = eval();
    param[i] = saved - eps;
    const T fm = eval();
    param[i] = saved;
    const T numeric = (fp - fm) / (2 * eps);
    const T a = analytic.defined() ? analytic[i] : T(0);
    const T denom = std::max({std::abs(a), std::abs(numeric), T(1e-8)});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace scrawl
