#include <cmath>

#include "doctest.h"
#include "scrawl/writerid.hpp"

using namespace scrawl;

namespace {

WriterIdConfig tiny_writerid(int n_writers, bool vit = true) {
  WriterIdConfig cfg;
  cfg.block.d_model = 8;
  cfg.block.n_heads = 2;
  cfg.block.d_ff = 16;
  cfg.block.n_layers = 1;
  cfg.n_writers = n_writers;
  cfg.use_vit = vit;
  return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("writerid");

TEST_CASE("token count: one 32x80 image yields an 8x10 patch grid, 80 tokens") {
  Rng rng(1);
  WriterId<double> w;
  w.init(tiny_writerid(3), rng);
  Graph<double> g(false);
  Tensor<double> img = Tensor<double>::randn({1, 32, 80}, rng, 0.3);
  StyleEmbedding<double> e = w.embed_style(g, {Var<double>::constant(img)});
  CHECK(e.tokens.shape() == std::vector<int>{80, 8});
  CHECK(e.pooled.shape() == std::vector<int>{1, 8});
}

TEST_CASE("identical style images produce identical per-image token blocks") {
  Rng rng(2);
  WriterId<double> w;
  w.init(tiny_writerid(2), rng);
  Graph<double> g(false);
  Tensor<double> img = Tensor<double>::randn({1, 32, 32}, rng, 0.3);
  std::vector<Var<double>> three(3, Var<double>::constant(img));
  StyleEmbedding<double> e = w.embed_style(g, three);
  const int per = 32;  // 8x4 grid
  REQUIRE(e.tokens.shape() == std::vector<int>{3 * per, 8});
  for (int i = 0; i < per; ++i)
    for (int j = 0; j < 8; ++j) {
      CHECK(e.tokens.value().at(i, j) == e.tokens.value().at(per + i, j));
      CHECK(e.tokens.value().at(i, j) == e.tokens.value().at(2 * per + i, j));
    }
}

TEST_CASE("pooled vector equals the mean of token rows") {
  Rng rng(3);
  WriterId<double> w;
  w.init(tiny_writerid(2), rng);
  Graph<double> g(false);
  Tensor<double> img = Tensor<double>::randn({1, 32, 48}, rng, 0.3);
  StyleEmbedding<double> e = w.embed_style(g, {Var<double>::constant(img)});
  for (int j = 0; j < 8; ++j) {
    double mean = 0;
    for (int i = 0; i < e.tokens.shape()[0]; ++i) mean += e.tokens.value().at(i, j);
    mean /= e.tokens.shape()[0];
    CHECK(e.pooled.value().at(0, j) == doctest::Approx(mean).epsilon(1e-9));
  }
}

TEST_CASE("zero classification head gives uniform (all-zero) logits") {
  Rng rng(4);
  WriterId<double> w;
  w.init(tiny_writerid(5), rng);
  for (size_t i = 0; i < w.head.w.size(); ++i) w.head.w[i] = 0.0;
  Graph<double> g(false);
  Tensor<double> img = Tensor<double>::randn({1, 32, 16}, rng, 0.3);
  Var<double> logits = w.classify(g, w.embed_style(g, {Var<double>::constant(img)}));
  CHECK(logits.shape() == std::vector<int>{1, 5});
  for (int j = 0; j < 5; ++j) CHECK(logits.value().at(0, j) == 0.0);

  Var<double> probs = softmax_rows(logits);
  double sum = 0;
  for (int j = 0; j < 5; ++j) sum += probs.value().at(0, j);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("writer loss: one-hot, uniform, nonnegative, bad index") {
  Var<double> sharp = Var<double>::constant(Tensor<double>::from({1, 2}, {10.0, -10.0}));
  CHECK(writer_loss(sharp, 0).scalar() < 1e-6);
  CHECK(writer_loss(sharp, 0).scalar() == doctest::Approx(std::log1p(std::exp(-20.0))));

  Var<double> uniform = Var<double>::constant(Tensor<double>::zeros({1, 7}));
  CHECK(writer_loss(uniform, 3).scalar() == doctest::Approx(std::log(7.0)));

  Rng rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    Var<double> l = Var<double>::constant(Tensor<double>::randn({1, 4}, rng, 3.0));
    CHECK(writer_loss(l, int(rng.next_index(4))).scalar() >= 0.0);
  }
  CHECK_THROWS_AS(writer_loss(uniform, 7), DataError);
  CHECK_THROWS_AS(writer_loss(uniform, -1), DataError);
}

TEST_CASE("different style images give different pooled embeddings") {
  Rng rng(6);
  WriterId<double> w;
  w.init(tiny_writerid(2), rng);
  Graph<double> g(false);
  int distinct = 0;
  for (int rep = 0; rep < 8; ++rep) {
    Tensor<double> a = Tensor<double>::randn({1, 32, 32}, rng, 0.5);
    Tensor<double> b = Tensor<double>::randn({1, 32, 32}, rng, 0.5);
    StyleEmbedding<double> ea = w.embed_style(g, {Var<double>::constant(a)});
    StyleEmbedding<double> eb = w.embed_style(g, {Var<double>::constant(b)});
    if (max_abs_diff(ea.pooled.value(), eb.pooled.value()) > 1e-8) ++distinct;
  }
  CHECK(distinct == 8);
}

TEST_CASE("conv backbone variant obeys the same contracts") {
  Rng rng(7);
  WriterId<double> w;
  w.init(tiny_writerid(3, false), rng);
  Graph<double> g(false);
  Tensor<double> img = Tensor<double>::randn({1, 32, 64}, rng, 0.3);
  StyleEmbedding<double> e = w.embed_style(g, {Var<double>::constant(img)});
  CHECK(e.tokens.shape()[1] == 8);
  CHECK(e.tokens.shape()[0] == 4 * 8);  // 4 x W/8 grid cells
  Var<double> logits = w.classify(g, e);
  CHECK(logits.shape() == std::vector<int>{1, 3});
}

TEST_CASE("style image height must be 32") {
  Rng rng(8);
  WriterId<double> w;
  w.init(tiny_writerid(2), rng);
  Graph<double> g(false);
  Tensor<double> bad = Tensor<double>::randn({1, 16, 32}, rng);
  CHECK_THROWS_AS(w.embed_style(g, {Var<double>::constant(bad)}), DataError);
  CHECK_THROWS_AS(w.embed_style(g, {}), DataError);
}

TEST_SUITE_END();
