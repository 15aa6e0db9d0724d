// Patch critic: four stride-2 residual conv stages ending in a 1-channel
// score map over a 2 x floor(W/16) grid, plus the hinge-loss heads.
#pragma once

#include <string>
#include <vector>

#include "scrawl/errors.hpp"
#include "scrawl/nn.hpp"

namespace scrawl {

struct DiscConfig {
  int base_channels = 32;  // doubled at each stage
};

template <class T>
struct Discriminator {
  DiscConfig cfg;
  struct Stage {
    Tensor<T> w, b;        // 4x4 stride-2 conv
    Tensor<T> pw, pb;      // 2x2 stride-2 projection shortcut
  };
  std::vector<Stage> stages;
  Tensor<T> head_w, head_b;  // 3x3 conv to 1 channel

  void init(const DiscConfig& c, Rng& rng) {
    cfg = c;
    if (cfg.base_channels < 1) throw ConfigError("Discriminator: bad base_channels");
    stages.clear();
    int ci = 1;
    int co = cfg.base_channels;
    for (int s = 0; s < 4; ++s) {
      Stage st;
      st.w = init_fan_in<T>({co, ci, 4, 4}, ci * 16, rng);
      st.b = Tensor<T>::zeros({1, co});
      st.pw = init_fan_in<T>({co, ci, 2, 2}, ci * 4, rng);
      st.pb = Tensor<T>::zeros({1, co});
      stages.push_back(std::move(st));
      ci = co;
      co *= 2;
    }
    head_w = init_fan_in<T>({1, ci, 3, 3}, ci * 9, rng);
    head_b = Tensor<T>::zeros({1, 1});
  }

  // image [1,32,W] in [-1,1] -> patch scores [1, 2*floor(W/16)]
  Var<T> discriminate(Graph<T>& g, const Var<T>& image) const {
    if (image.shape().size() != 3 || image.shape()[0] != 1 || image.shape()[1] != 32)
      throw DataError("discriminate: want image [1,32,W], got " +
                      image.value().shape_str());
    Var<T> x = image;
    for (const auto& st : stages) {
      Var<T> main = conv2d(x, g.param(st.w), g.param(st.b), 2, 2, 1, 1);
      Var<T> skip = conv2d(x, g.param(st.pw), g.param(st.pb), 2, 2, 0, 0);
      x = gelu(add(main, skip));
    }
    Var<T> score_map = conv2d(x, g.param(head_w), g.param(head_b), 1, 1, 1, 1);
    const int np = score_map.shape()[1] * score_map.shape()[2];
    return reshape(score_map, {1, np});
  }

  void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    for (size_t i = 0; i < stages.size(); ++i) {
      const std::string p = prefix + ".stage" + std::to_string(i);
      fn(p + ".w", stages[i].w);
      fn(p + ".b", stages[i].b);
      fn(p + ".proj.w", stages[i].pw);
      fn(p + ".proj.b", stages[i].pb);
    }
    fn(prefix + ".head.w", head_w);
    fn(prefix + ".head.b", head_b);
  }
};

namespace detail {

template <class T>
Var<T> flatten_scores(const std::vector<Var<T>>& scores) {
  if (scores.empty()) throw DataError("hinge loss: empty score list");
  std::vector<Var<T>> cols;
  cols.reserve(scores.size());
  for (const auto& s : scores)
    cols.push_back(reshape(s, {int(s.value().size()), 1}));
  return cols.size() == 1 ? cols[0] : concat_rows(cols);
}

}  // namespace detail

// mean(max(1 - real, 0)) + mean(max(1 + fake, 0))
template <class T>
Var<T> d_hinge_loss(const std::vector<Var<T>>& real_scores,
                    const std::vector<Var<T>>& fake_scores) {
  Var<T> real = detail::flatten_scores(real_scores);
  Var<T> fake = detail::flatten_scores(fake_scores);
  Var<T> ones_r = Var<T>::constant(Tensor<T>::full(real.value().shape(), T(1)));
  Var<T> ones_f = Var<T>::constant(Tensor<T>::full(fake.value().shape(), T(1)));
  return add(mean(relu(sub(ones_r, real))), mean(relu(add(ones_f, fake))));
}

// -mean(fake)
template <class T>
Var<T> g_hinge_loss(const std::vector<Var<T>>& fake_scores) {
  return scale(mean(detail::flatten_scores(fake_scores)), T(-1));
}

}  // namespace scrawl
