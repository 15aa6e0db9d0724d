// Reverse-mode autodiff on a dynamically built tape. Every op allocates a
// fresh output tensor, so value buffers are never aliased by the tape.
// Templated on the scalar type: double for gradient-check tests, float for
// training.
#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "scrawl/tensor.hpp"

namespace scrawl {

template <class T>
struct VarNode {
  Tensor<T> val;
  Tensor<T> grad;  // allocated on demand during backward
  bool needs_grad = false;
  std::vector<std::shared_ptr<VarNode>> parents;
  std::function<void(VarNode&)> backfn;

  Tensor<T>& grad_buf() {
    if (!grad.defined()) grad = Tensor<T>::zeros(val.shape());
    return grad;
  }
};

template <class T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<VarNode<T>> n) : n_(std::move(n)) {}

  static Var leaf(Tensor<T> t, bool needs_grad) {
    auto n = std::make_shared<VarNode<T>>();
    n->val = std::move(t);
    n->needs_grad = needs_grad;
    return Var(std::move(n));
  }

  static Var constant(Tensor<T> t) { return leaf(std::move(t), false); }

  bool defined() const { return n_ != nullptr; }
  const Tensor<T>& value() const { return n_->val; }
  const Tensor<T>& grad() const { return n_->grad; }
  bool needs_grad() const { return n_->needs_grad; }
  const std::vector<int>& shape() const { return n_->val.shape(); }
  T scalar() const {
    if (n_->val.size() != 1) throw std::logic_error("Var::scalar: not a scalar");
    return n_->val[0];
  }
  std::shared_ptr<VarNode<T>> node() const { return n_; }

 private:
  std::shared_ptr<VarNode<T>> n_;
};

namespace detail {

template <class T>
Var<T> make_op(Tensor<T> val, std::vector<Var<T>> parents,
               std::function<void(VarNode<T>&)> backfn) {
  auto n = std::make_shared<VarNode<T>>();
  n->val = std::move(val);
  for (auto& p : parents) {
    if (p.node()->needs_grad) n->needs_grad = true;
    n->parents.push_back(p.node());
  }
  if (n->needs_grad) n->backfn = std::move(backfn);
  return Var<T>(std::move(n));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// backward pass

template <class T>
void backward(const Var<T>& root, const Tensor<T>& seed) {
  if (!root.node()->needs_grad) return;
  if (!seed.same_shape(root.value()))
    throw std::invalid_argument("backward: seed shape mismatch");

  // iterative post-order topological sort over nodes that need grads
  std::vector<VarNode<T>*> order;
  std::unordered_map<VarNode<T>*, int> state;  // 0 unseen, 1 open, 2 done
  std::vector<std::pair<VarNode<T>*, size_t>> stack;
  stack.push_back({root.node().get(), 0});
  state[root.node().get()] = 1;
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      VarNode<T>* p = node->parents[idx++].get();
      if (p->needs_grad && state[p] == 0) {
        state[p] = 1;
        stack.push_back({p, 0});
      }
    } else {
      state[node] = 2;
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (VarNode<T>* n : order) n->grad = Tensor<T>();
  root.node()->grad = seed.clone();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    VarNode<T>* n = *it;
    if (n->backfn && n->grad.defined()) n->backfn(*n);
  }
}

template <class T>
void backward_scalar(const Var<T>& root) {
  backward(root, Tensor<T>::full(root.value().shape(), T(1)));
}

// ---------------------------------------------------------------------------
// elementwise / arithmetic ops

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  if (!a.value().same_shape(b.value()))
    throw std::invalid_argument("add: shape mismatch " + a.value().shape_str() +
                                " vs " + b.value().shape_str());
  Tensor<T> out(a.shape());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return detail::make_op<T>(std::move(out), {a, b}, [](VarNode<T>& n) {
    for (int k = 0; k < 2; ++k) {
      auto& p = *n.parents[size_t(k)];
      if (!p.needs_grad) continue;
      auto& g = p.grad_buf();
      for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
  });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  if (!a.value().same_shape(b.value()))
    throw std::invalid_argument("sub: shape mismatch");
  Tensor<T> out(a.shape());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return detail::make_op<T>(std::move(out), {a, b}, [](VarNode<T>& n) {
    if (n.parents[0]->needs_grad) {
      auto& g = n.parents[0]->grad_buf();
      for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
    if (n.parents[1]->needs_grad) {
      auto& g = n.parents[1]->grad_buf();
      for (size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  if (!a.value().same_shape(b.value()))
    throw std::invalid_argument("mul: shape mismatch");
  Tensor<T> out(a.shape());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return detail::make_op<T>(std::move(out), {a, b}, [](VarNode<T>& n) {
    const auto& av = n.parents[0]->val;
    const auto& bv = n.parents[1]->val;
    if (n.parents[0]->needs_grad) {
      auto& g = n.parents[0]->grad_buf();
      for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * bv[i];
    }
    if (n.parents[1]->needs_grad) {
      auto& g = n.parents[1]->grad_buf();
      for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * av[i];
    }
  });
}

template <class T>
Var<T> scale(const Var<T>& a, T c) {
  Tensor<T> out(a.shape());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * c;
  return detail::make_op<T>(std::move(out), {a}, [c](VarNode<T>& n) {
    auto& g = n.parents[0]->grad_buf();
    for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * c;
  });
}

// A[m,n] + row vector b[1,n] broadcast over rows
template <class T>
Var<T> add_rowvec(const Var<T>& a, const Var<T>& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || b.shape()[0] != 1 ||
      b.shape()[1] != a.shape()[1])
    throw std::invalid_argument("add_rowvec: want A[m,n], b[1,n]");
  const int m = a.shape()[0], nn = a.shape()[1];
  Tensor<T> out(a.shape());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < nn; ++j) out.at(i, j) = a.value().at(i, j) + b.value().at(0, j);
  return detail::make_op<T>(std::move(out), {a, b}, [m, nn](VarNode<T>& n) {
    if (n.parents[0]->needs_grad) {
      auto& g = n.parents[0]->grad_buf();
      for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
    if (n.parents[1]->needs_grad) {
      auto& g = n.parents[1]->grad_buf();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < nn; ++j) g.at(0, j) += n.grad.at(i, j);
    }
  });
}

// ---------------------------------------------------------------------------
// linear algebra

template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
    throw std::invalid_argument("matmul: incompatible shapes " +
                                a.value().shape_str() + " x " + b.value().shape_str());
  const int m = a.shape()[0], k = a.shape()[1], nn = b.shape()[1];
  Tensor<T> out({m, nn});
  {
    const T* A = a.value().data();
    const T* B = b.value().data();
    T* C = out.data();
    for (int i = 0; i < m; ++i)
      for (int p = 0; p < k; ++p) {
        const T av = A[size_t(i) * k + p];
        const T* brow = B + size_t(p) * nn;
        T* crow = C + size_t(i) * nn;
        for (int j = 0; j < nn; ++j) crow[j] += av * brow[j];
      }
  }
  return detail::make_op<T>(std::move(out), {a, b}, [m, k, nn](VarNode<T>& n) {
    const T* A = n.parents[0]->val.data();
    const T* B = n.parents[1]->val.data();
    const T* G = n.grad.data();
    if (n.parents[0]->needs_grad) {
      T* dA = n.parents[0]->grad_buf().data();
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          const T* brow = B + size_t(p) * nn;
          const T* grow = G + size_t(i) * nn;
          T s = 0;
          for (int j = 0; j < nn; ++j) s += grow[j] * brow[j];
          dA[size_t(i) * k + p] += s;
        }
    }
    if (n.parents[1]->needs_grad) {
      T* dB = n.parents[1]->grad_buf().data();
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          const T av = A[size_t(i) * k + p];
          const T* grow = G + size_t(i) * nn;
          T* brow = dB + size_t(p) * nn;
          for (int j = 0; j < nn; ++j) brow[j] += av * grow[j];
        }
    }
  });
}

template <class T>
Var<T> transpose(const Var<T>& a) {
  if (a.shape().size() != 2) throw std::invalid_argument("transpose: rank != 2");
  const int m = a.shape()[0], nn = a.shape()[1];
  Tensor<T> out({nn, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < nn; ++j) out.at(j, i) = a.value().at(i, j);
  return detail::make_op<T>(std::move(out), {a}, [m, nn](VarNode<T>& n) {
    auto& g = n.parents[0]->grad_buf();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < nn; ++j) g.at(i, j) += n.grad.at(j, i);
  });
}

template <class T>
Var<T> reshape(const Var<T>& a, std::vector<int> shape) {
  Tensor<T> out = a.value().clone().reshaped(shape);
  return detail::make_op<T>(std::move(out), {a}, [](VarNode<T>& n) {
    auto& g = n.parents[0]->grad_buf();
    for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  });
}

// out[i] = in[index_map[i]]; backward scatter-adds. Covers nearest-neighbor
// upsampling, patch extraction, grid <-> token rearrangement.
template <class T>
Var<T> permute_elements(const Var<T>& a, std::shared_ptr<const std::vector<size_t>> map,
                        std::vector<int> out_shape) {
  Tensor<T> out(out_shape);
  if (out.size() != map->size())
    throw std::invalid_argument("permute_elements: map size mismatch");
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[(*map)[i]];
  return detail::make_op<T>(std::move(out), {a}, [map](VarNode<T>& n) {
    auto& g = n.parents[0]->grad_buf();
    for (size_t i = 0; i < map->size(); ++i) g[(*map)[i]] += n.grad[i];
  });
}

template <class T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  const int nn = parts[0].shape()[1];
  int m = 0;
  for (const auto& p : parts) {
    if (p.shape().size() != 2 || p.shape()[1] != nn)
      throw std::invalid_argument("concat_rows: column mismatch");
    m += p.shape()[0];
  }
  Tensor<T> out({m, nn});
  size_t off = 0;
  for (const auto& p : parts) {
    for (size_t i = 0; i < p.value().size(); ++i) out[off + i] = p.value()[i];
    off += p.value().size();
  }
  return detail::make_op<T>(std::move(out), parts, [](VarNode<T>& n) {
    size_t off = 0;
    for (auto& pp : n.parents) {
      if (pp->needs_grad) {
        auto& g = pp->grad_buf();
        for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[off + i];
      }
      off += pp->val.size();
    }
  });
}

template <class T>
Var<T> slice_rows(const Var<T>& a, int r0, int r1) {
  if (a.shape().size() != 2 || r0 < 0 || r1 > a.shape()[0] || r0 >= r1)
    throw std::invalid_argument("slice_rows: bad range");
  const int nn = a.shape()[1];
  Tensor<T> out({r1 - r0, nn});
  for (int i = r0; i < r1; ++i)
    for (int j = 0; j < nn; ++j) out.at(i - r0, j) = a.value().at(i, j);
  return detail::make_op<T>(std::move(out), {a}, [r0, r1, nn](VarNode<T>& n) {
    auto& g = n.parents[0]->grad_buf();
    for (int i = r0; i < r1; ++i)
      for (int j = 0; j < nn; ++j) g.at(i, j) += n.grad.at(i - r0, j);
  });
}

template <class T>
Var<T> slice_cols(const Var<T>& a, int c0, int c1) {
  if (a.shape().size() != 2 || c0 < 0 || c1 > a.shape()[1] || c0 >= c1)
    throw std::invalid_argument("slice_cols: bad range");
  const int m = a.shape()[0];
  Tensor<T> out({m, c1 - c0});
  for (int i = 0; i < m; ++i)
    for (int j = c0; j < c1; ++j) out.at(i, j - c0) = a.value().at(i, j);
  return detail::make_op<T>(std::move(out), {a}, [m, c0, c1](VarNode<T>& n) {
    auto& g = n.parents[0]->grad_buf();
    for (int i = 0; i < m; ++i)
      for (int j = c0; j < c1; ++j) g.at(i, j) += n.grad.at(i, j - c0);
  });
}

template <class T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  const int m = parts[0].shape()[0];
  int nn = 0;
  for (const auto& p : parts) {
    if (p.shape().size() != 2 || p.shape()[0] != m)
      throw std::invalid_argument("concat_cols: row mismatch");
    nn += p.shape()[1];
  }
  Tensor<T> out({m, nn});
  int coff = 0;
  for (const auto& p : parts) {
    const int pc = p.shape()[1];
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < pc; ++j) out.at(i, coff + j) = p.value().at(i, j);
    coff += pc;
  }
  return detail::make_op<T>(std::move(out), parts, [m](VarNode<T>& n) {
    int coff = 0;
    for (auto& pp : n.parents) {
      const int pc = pp->val.cols();
      if (pp->needs_grad) {
        auto& g = pp->grad_buf();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < pc; ++j) g.at(i, j) += n.grad.at(i, coff + j);
      }
      coff += pc;
    }
  });
}

// ---------------------------------------------------------------------------
// reductions and scalar plumbing

template <class T>
Var<T> sum(const Var<T>& a) {
  T s = 0;
  for (size_t i = 0; i < a.value().size(); ++i) s += a.value()[i];
  return detail::make_op<T>(Tensor<T>::from({1, 1}, {s}), {a}, [](VarNode<T>& n) {
    auto& g = n.parents[0]->grad_buf();
    const T gv = n.grad[0];
    for (size_t i = 0; i < g.size(); ++i) g[i] += gv;
  });
}

template <class T>
Var<T> mean(const Var<T>& a) {
  const T inv = T(1) / T(a.value().size());
  T s = 0;
  for (size_t i = 0; i < a.value().size(); ++i) s += a.value()[i];
  return detail::make_op<T>(Tensor<T>::from({1, 1}, {s * inv}), {a},
                            [inv](VarNode<T>& n) {
                              auto& g = n.parents[0]->grad_buf();
                              const T gv = n.grad[0] * inv;
                              for (size_t i = 0; i < g.size(); ++i) g[i] += gv;
                            });
}

// column means of A[m,n] -> [1,n]
template <class T>
Var<T> mean_rows(const Var<T>& a) {
  if (a.shape().size() != 2) throw std::invalid_argument("mean_rows: rank != 2");
  const int m = a.shape()[0], nn = a.shape()[1];
  Tensor<T> out({1, nn});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < nn; ++j) out.at(0, j) += a.value().at(i, j);
  for (int j = 0; j < nn; ++j) out.at(0, j) /= T(m);
  return detail::make_op<T>(std::move(out), {a}, [m, nn](VarNode<T>& n) {
    auto& g = n.parents[0]->grad_buf();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < nn; ++j) g.at(i, j) += n.grad.at(0, j) / T(m);
  });
}

template <class T>
Var<T> pick(const Var<T>& a, int r, int c) {
  if (a.shape().size() != 2) throw std::invalid_argument("pick: rank != 2");
  if (r < 0 || r >= a.shape()[0] || c < 0 || c >= a.shape()[1])
    throw std::out_of_range("pick: index out of range");
  return detail::make_op<T>(Tensor<T>::from({1, 1}, {a.value().at(r, c)}), {a},
                            [r, c](VarNode<T>& n) {
                              n.parents[0]->grad_buf().at(r, c) += n.grad[0];
                            });
}

// log(exp(a) + exp(b)) for scalar Vars, stable
template <class T>
Var<T> logadd(const Var<T>& a, const Var<T>& b) {
  const T av = a.scalar(), bv = b.scalar();
  const T m = std::max(av, bv);
  T v;
  if (!std::isfinite(double(m)) && m < 0)
    v = m;  // both -inf
  else
    v = m + std::log(std::exp(av - m) + std::exp(bv - m));
  return detail::make_op<T>(Tensor<T>::from({1, 1}, {v}), {a, b}, [v](VarNode<T>& n) {
    if (!std::isfinite(double(v)) && v < 0) return;
    const T g = n.grad[0];
    if (n.parents[0]->needs_grad)
      n.parents[0]->grad_buf()[0] += g * std::exp(n.parents[0]->val[0] - v);
    if (n.parents[1]->needs_grad)
      n.parents[1]->grad_buf()[0] += g * std::exp(n.parents[1]->val[0] - v);
  });
}

// ---------------------------------------------------------------------------
// nonlinearities and normalization

template <class T>
Var<T> tanh_op(const Var<T>& a) {
  Tensor<T> out(a.shape());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.value()[i]);
  return detail::make_op<T>(std::move(out), {a}, [](VarNode<T>& n) {
    auto& g = n.parents[0]->grad_buf();
    for (size_t i = 0; i < g.size(); ++i) {
      const T y = n.val[i];
      g[i] += n.grad[i] * (T(1) - y * y);
    }
  });
}

template <class T>
Var<T> relu(const Var<T>& a) {
  Tensor<T> out(a.shape());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] > T(0) ? a.value()[i] : T(0);
  return detail::make_op<T>(std::move(out), {a}, [](VarNode<T>& n) {
    auto& g = n.parents[0]->grad_buf();
    for (size_t i = 0; i < g.size(); ++i)
      if (n.parents[0]->val[i] > T(0)) g[i] += n.grad[i];
  });
}

// exact (erf) GELU; smooth, so finite-difference checks stay clean
template <class T>
Var<T> gelu(const Var<T>& a) {
  constexpr T kInvSqrt2 = T(0.70710678118654752440);
  constexpr T kInvSqrt2Pi = T(0.39894228040143267794);
  Tensor<T> out(a.shape());
  for (size_t i = 0; i < out.size(); ++i) {
    const T x = a.value()[i];
    out[i] = T(0.5) * x * (T(1) + std::erf(x * kInvSqrt2));
  }
  return detail::make_op<T>(std::move(out), {a}, [=](VarNode<T>& n) {
    auto& g = n.parents[0]->grad_buf();
    for (size_t i = 0; i < g.size(); ++i) {
      const T x = n.parents[0]->val[i];
      const T cdf = T(0.5) * (T(1) + std::erf(x * kInvSqrt2));
      const T pdf = kInvSqrt2Pi * std::exp(T(-0.5) * x * x);
      g[i] += n.grad[i] * (cdf + x * pdf);
    }
  });
}

template <class T>
Var<T> softmax_rows(const Var<T>& a) {
  if (a.shape().size() != 2) throw std::invalid_argument("softmax_rows: rank != 2");
  const int m = a.shape()[0], nn = a.shape()[1];
  Tensor<T> out(a.shape());
  for (int i = 0; i < m; ++i) {
    T mx = a.value().at(i, 0);
    for (int j = 1; j < nn; ++j) mx = std::max(mx, a.value().at(i, j));
    T z = 0;
    for (int j = 0; j < nn; ++j) {
      const T e = std::exp(a.value().at(i, j) - mx);
      out.at(i, j) = e;
      z += e;
    }
    for (int j = 0; j < nn; ++j) out.at(i, j) /= z;
  }
  return detail::make_op<T>(std::move(out), {a}, [m, nn](VarNode<T>& n) {
    auto& g = n.parents[0]->grad_buf();
    for (int i = 0; i < m; ++i) {
      T dot = 0;
      for (int j = 0; j < nn; ++j) dot += n.grad.at(i, j) * n.val.at(i, j);
      for (int j = 0; j < nn; ++j)
        g.at(i, j) += n.val.at(i, j) * (n.grad.at(i, j) - dot);
    }
  });
}

template <class T>
Var<T> log_softmax_rows(const Var<T>& a) {
  if (a.shape().size() != 2) throw std::invalid_argument("log_softmax_rows: rank != 2");
  const int m = a.shape()[0], nn = a.shape()[1];
  Tensor<T> out(a.shape());
  for (int i = 0; i < m; ++i) {
    T mx = a.value().at(i, 0);
    for (int j = 1; j < nn; ++j) mx = std::max(mx, a.value().at(i, j));
    T z = 0;
    for (int j = 0; j < nn; ++j) z += std::exp(a.value().at(i, j) - mx);
    const T lz = mx + std::log(z);
    for (int j = 0; j < nn; ++j) out.at(i, j) = a.value().at(i, j) - lz;
  }
  return detail::make_op<T>(std::move(out), {a}, [m, nn](VarNode<T>& n) {
    auto& g = n.parents[0]->grad_buf();
    for (int i = 0; i < m; ++i) {
      T gsum = 0;
      for (int j = 0; j < nn; ++j) gsum += n.grad.at(i, j);
      for (int j = 0; j < nn; ++j)
        g.at(i, j) += n.grad.at(i, j) - std::exp(n.val.at(i, j)) * gsum;
    }
  });
}

template <class T>
Var<T> layer_norm_rows(const Var<T>& a, const Var<T>& gamma, const Var<T>& beta,
                       T eps = T(1e-5)) {
  if (a.shape().size() != 2) throw std::invalid_argument("layer_norm_rows: rank != 2");
  const int m = a.shape()[0], nn = a.shape()[1];
  if (gamma.shape() != std::vector<int>{1, nn} || beta.shape() != std::vector<int>{1, nn})
    throw std::invalid_argument("layer_norm_rows: gamma/beta must be [1,n]");
  Tensor<T> out(a.shape());
  auto xhat = std::make_shared<Tensor<T>>(Tensor<T>({m, nn}));
  auto rstd = std::make_shared<std::vector<T>>(size_t(m));
  for (int i = 0; i < m; ++i) {
    T mu = 0;
    for (int j = 0; j < nn; ++j) mu += a.value().at(i, j);
    mu /= T(nn);
    T var = 0;
    for (int j = 0; j < nn; ++j) {
      const T d = a.value().at(i, j) - mu;
      var += d * d;
    }
    var /= T(nn);
    const T rs = T(1) / std::sqrt(var + eps);
    (*rstd)[size_t(i)] = rs;
    for (int j = 0; j < nn; ++j) {
      const T xh = (a.value().at(i, j) - mu) * rs;
      xhat->at(i, j) = xh;
      out.at(i, j) = gamma.value().at(0, j) * xh + beta.value().at(0, j);
    }
  }
  return detail::make_op<T>(
      std::move(out), {a, gamma, beta}, [m, nn, xhat, rstd](VarNode<T>& n) {
        const auto& gam = n.parents[1]->val;
        if (n.parents[0]->needs_grad) {
          auto& gx = n.parents[0]->grad_buf();
          for (int i = 0; i < m; ++i) {
            T s1 = 0, s2 = 0;
            for (int j = 0; j < nn; ++j) {
              const T dy = n.grad.at(i, j) * gam.at(0, j);
              s1 += dy;
              s2 += dy * xhat->at(i, j);
            }
            s1 /= T(nn);
            s2 /= T(nn);
            for (int j = 0; j < nn; ++j) {
              const T dy = n.grad.at(i, j) * gam.at(0, j);
              gx.at(i, j) += (dy - s1 - xhat->at(i, j) * s2) * (*rstd)[size_t(i)];
            }
          }
        }
        if (n.parents[1]->needs_grad) {
          auto& gg = n.parents[1]->grad_buf();
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < nn; ++j) gg.at(0, j) += n.grad.at(i, j) * xhat->at(i, j);
        }
        if (n.parents[2]->needs_grad) {
          auto& gb = n.parents[2]->grad_buf();
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < nn; ++j) gb.at(0, j) += n.grad.at(i, j);
        }
      });
}

// ---------------------------------------------------------------------------
// convolutions (rank-3 tensors [C,H,W], batch handled by the caller)

template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int sh, int sw,
              int ph, int pw) {
  if (x.shape().size() != 3 || w.shape().size() != 4)
    throw std::invalid_argument("conv2d: want x[C,H,W], w[O,C,kh,kw]");
  const int ci = x.shape()[0], h = x.shape()[1], ww = x.shape()[2];
  const int co = w.shape()[0], kh = w.shape()[2], kw = w.shape()[3];
  if (w.shape()[1] != ci) throw std::invalid_argument("conv2d: channel mismatch");
  if (b.shape() != std::vector<int>{1, co})
    throw std::invalid_argument("conv2d: bias must be [1,O]");
  const int ho = (h + 2 * ph - kh) / sh + 1;
  const int wo = (ww + 2 * pw - kw) / sw + 1;
  if (ho <= 0 || wo <= 0) throw std::invalid_argument("conv2d: empty output");

  Tensor<T> out({co, ho, wo});
  for (int o = 0; o < co; ++o)
    for (int y = 0; y < ho; ++y)
      for (int xx = 0; xx < wo; ++xx) out.at3(o, y, xx) = b.value().at(0, o);
  for (int o = 0; o < co; ++o)
    for (int c = 0; c < ci; ++c)
      for (int u = 0; u < kh; ++u)
        for (int v = 0; v < kw; ++v) {
          const T wv = w.value()[((size_t(o) * ci + c) * kh + u) * kw + size_t(v)];
          if (wv == T(0)) continue;
          for (int y = 0; y < ho; ++y) {
            const int iy = y * sh + u - ph;
            if (iy < 0 || iy >= h) continue;
            for (int xx = 0; xx < wo; ++xx) {
              const int ix = xx * sw + v - pw;
              if (ix < 0 || ix >= ww) continue;
              out.at3(o, y, xx) += wv * x.value().at3(c, iy, ix);
            }
          }
        }

  return detail::make_op<T>(
      std::move(out), {x, w, b},
      [ci, h, ww, co, kh, kw, sh, sw, ph, pw, ho, wo](VarNode<T>& n) {
        const auto& xv = n.parents[0]->val;
        const auto& wv = n.parents[1]->val;
        const bool need_x = n.parents[0]->needs_grad;
        const bool need_w = n.parents[1]->needs_grad;
        const bool need_b = n.parents[2]->needs_grad;
        if (need_b) {
          auto& gb = n.parents[2]->grad_buf();
          for (int o = 0; o < co; ++o) {
            T s = 0;
            for (int y = 0; y < ho; ++y)
              for (int xx = 0; xx < wo; ++xx) s += n.grad.at3(o, y, xx);
            gb.at(0, o) += s;
          }
        }
        if (!need_x && !need_w) return;
        Tensor<T>* gx = need_x ? &n.parents[0]->grad_buf() : nullptr;
        Tensor<T>* gw = need_w ? &n.parents[1]->grad_buf() : nullptr;
        for (int o = 0; o < co; ++o)
          for (int c = 0; c < ci; ++c)
            for (int u = 0; u < kh; ++u)
              for (int v = 0; v < kw; ++v) {
                const size_t widx = ((size_t(o) * ci + c) * kh + u) * kw + size_t(v);
                const T wval = wv[widx];
                T wgrad = 0;
                for (int y = 0; y < ho; ++y) {
                  const int iy = y * sh + u - ph;
                  if (iy < 0 || iy >= h) continue;
                  for (int xx = 0; xx < wo; ++xx) {
                    const int ix = xx * sw + v - pw;
                    if (ix < 0 || ix >= ww) continue;
                    const T g = n.grad.at3(o, y, xx);
                    if (gx) gx->at3(c, iy, ix) += g * wval;
                    wgrad += g * xv.at3(c, iy, ix);
                  }
                }
                if (gw) (*gw)[widx] += wgrad;
              }
      });
}

// depthwise 3x3, stride 1, zero padding 1; w[C,3,3], b[1,C]
template <class T>
Var<T> dwconv3x3(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  if (x.shape().size() != 3 || w.shape().size() != 3 || w.shape()[1] != 3 ||
      w.shape()[2] != 3 || w.shape()[0] != x.shape()[0])
    throw std::invalid_argument("dwconv3x3: want x[C,H,W], w[C,3,3]");
  if (b.shape() != std::vector<int>{1, x.shape()[0]})
    throw std::invalid_argument("dwconv3x3: bias must be [1,C]");
  const int cc = x.shape()[0], h = x.shape()[1], ww = x.shape()[2];
  Tensor<T> out({cc, h, ww});
  for (int c = 0; c < cc; ++c)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < ww; ++xx) {
        T s = b.value().at(0, c);
        for (int u = -1; u <= 1; ++u) {
          const int iy = y + u;
          if (iy < 0 || iy >= h) continue;
          for (int v = -1; v <= 1; ++v) {
            const int ix = xx + v;
            if (ix < 0 || ix >= ww) continue;
            s += w.value().at3(c, u + 1, v + 1) * x.value().at3(c, iy, ix);
          }
        }
        out.at3(c, y, xx) = s;
      }
  return detail::make_op<T>(std::move(out), {x, w, b}, [cc, h, ww](VarNode<T>& n) {
    const auto& xv = n.parents[0]->val;
    const auto& wv = n.parents[1]->val;
    Tensor<T>* gx = n.parents[0]->needs_grad ? &n.parents[0]->grad_buf() : nullptr;
    Tensor<T>* gw = n.parents[1]->needs_grad ? &n.parents[1]->grad_buf() : nullptr;
    Tensor<T>* gb = n.parents[2]->needs_grad ? &n.parents[2]->grad_buf() : nullptr;
    for (int c = 0; c < cc; ++c)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < ww; ++xx) {
          const T g = n.grad.at3(c, y, xx);
          if (gb) gb->at(0, c) += g;
          for (int u = -1; u <= 1; ++u) {
            const int iy = y + u;
            if (iy < 0 || iy >= h) continue;
            for (int v = -1; v <= 1; ++v) {
              const int ix = xx + v;
              if (ix < 0 || ix >= ww) continue;
              if (gx) gx->at3(c, iy, ix) += g * wv.at3(c, u + 1, v + 1);
              if (gw) gw->at3(c, u + 1, v + 1) += g * xv.at3(c, iy, ix);
            }
          }
        }
  });
}

// ---------------------------------------------------------------------------
// operator sugar

template <class T>
Var<T> operator+(const Var<T>& a, const Var<T>& b) {
  return add(a, b);
}
template <class T>
Var<T> operator-(const Var<T>& a, const Var<T>& b) {
  return sub(a, b);
}
template <class T>
Var<T> operator*(const Var<T>& a, const Var<T>& b) {
  return mul(a, b);
}

}  // namespace scrawl
