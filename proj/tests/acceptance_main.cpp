// Acceptance suite: runs every acceptance criterion end to end and prints one
// pass/fail line per criterion. Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "scrawl/dataio.hpp"
#include "scrawl/discriminator.hpp"
#include "scrawl/errors.hpp"
#include "scrawl/evaluate.hpp"
#include "scrawl/generator.hpp"
#include "scrawl/metrics.hpp"
#include "scrawl/recognizer.hpp"
#include "scrawl/training.hpp"
#include "scrawl/unicode.hpp"
#include "scrawl/writerid.hpp"

using namespace scrawl;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

const char* kFontPath = SCRAWL_SOURCE_DIR "/data/fonts/scrawl8x16.hex";
const char* kPaperScaleConfig = SCRAWL_SOURCE_DIR "/data/configs/paper_scale.json";
const char* kSmokeConfig = SCRAWL_SOURCE_DIR "/data/configs/smoke.json";

struct CriterionFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& msg) {
  if (!cond) throw CriterionFailure(msg);
}

template <class T>
std::string fmt(T v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

fs::path work_dir() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "scrawl_acceptance";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

// ---------------------------------------------------------------------------
// 1. glyph oracle: independent hex-nibble decoder, bit-exact agreement

struct OracleGlyph {
  bool bits[16][16] = {};
};

std::map<char32_t, OracleGlyph> oracle_parse_hex(const std::string& path) {
  std::ifstream f(path);
  require(bool(f), "oracle cannot open font file");
  std::map<char32_t, OracleGlyph> out;
  std::string line;
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
  };
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const size_t colon = line.find(':');
    char32_t cp = 0;
    for (size_t i = 0; i < colon; ++i) cp = cp * 16 + char32_t(nib(line[i]));
    const std::string payload = line.substr(colon + 1);
    OracleGlyph g;
    if (payload.size() == 32) {
      for (int y = 0; y < 16; ++y) {
        const int byte = nib(payload[size_t(2 * y)]) * 16 + nib(payload[size_t(2 * y + 1)]);
        for (int x = 0; x < 8; ++x)
          g.bits[y][x + 4] = ((byte >> (7 - x)) & 1) != 0;  // centered
      }
    } else {
      for (int y = 0; y < 16; ++y) {
        int row = 0;
        for (int k = 0; k < 4; ++k) row = row * 16 + nib(payload[size_t(4 * y + k)]);
        for (int x = 0; x < 16; ++x) g.bits[y][x] = ((row >> (15 - x)) & 1) != 0;
      }
    }
    out[cp] = g;
  }
  return out;
}

void criterion_glyph_oracle() {
  const GlyphTable table = load_hex_font(kFontPath);
  const auto oracle = oracle_parse_hex(kFontPath);
  require(oracle.size() == table.entries.size(), "entry count mismatch vs oracle");

  std::vector<char32_t> cps;
  for (const auto& [cp, e] : table.entries) cps.push_back(cp);
  Rng rng(424242);
  int checked = 0;
  for (int i = 0; i < 100; ++i) {
    const char32_t cp = cps[size_t(rng.next_index(cps.size()))];
    const Bitmap16 got = render_char(table, cp);
    const OracleGlyph& want = oracle.at(cp);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x)
        require(got.get(y, x) == want.bits[y][x],
                "bitmap mismatch at U+" + fmt(unsigned(cp)));
    ++checked;
  }
  require(checked == 100, "expected 100 sampled codepoints");
}

// ---------------------------------------------------------------------------
// 2. gradient suite (64-bit, eps 1e-4, max rel err < 1e-3, 5 seeds)

void criterion_gradient_suite() {
  const GlyphTable font = load_hex_font(kFontPath);
  const double eps = 1e-4, tol = 1e-3;
  BlockConfig tiny;
  tiny.d_model = 8;
  tiny.n_heads = 2;
  tiny.d_ff = 16;
  tiny.n_layers = 1;

  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);

    EncoderBlock<double> enc;
    enc.init(tiny, rng);
    Tensor<double> x = Tensor<double>::randn({4, 8}, rng);
    auto f_enc = [&](const Var<double>& v) {
      Graph<double> g(false);
      return sum(enc.apply(g, v));
    };
    require(finite_diff_check(f_enc, x, eps) < tol, "encoder_block seed " + fmt(seed));

    DecoderBlock<double> dec;
    dec.init(tiny, rng);
    Tensor<double> mem = Tensor<double>::randn({6, 8}, rng);
    auto f_dec = [&](const Var<double>& v) {
      Graph<double> g(false);
      return sum(dec.apply(g, v, Var<double>::constant(mem)));
    };
    require(finite_diff_check(f_dec, x, eps) < tol, "decoder_block seed " + fmt(seed));

    Cpe<double> cpe;
    cpe.init(8, rng);
    Tensor<double> tok = Tensor<double>::randn({3 * 4, 8}, rng);
    auto f_cpe = [&](const Var<double>& v) {
      Graph<double> g(false);
      return sum(cpe.apply(g, v, 3, 4));
    };
    require(finite_diff_check(f_cpe, tok, eps) < tol, "cpe seed " + fmt(seed));

    Discriminator<double> disc;
    DiscConfig dcfg;
    dcfg.base_channels = 4;
    disc.init(dcfg, rng);
    Tensor<double> img = Tensor<double>::randn({1, 32, 16}, rng, 0.4);
    auto f_disc = [&](const Var<double>& v) {
      Graph<double> g(false);
      return sum(disc.discriminate(g, v));
    };
    require(finite_diff_check(f_disc, img, eps) < tol, "discriminate seed " + fmt(seed));

    Tensor<double> logits = Tensor<double>::randn({5, 4}, rng);
    auto f_ctc = [&](const Var<double>& v) {
      return recognition_loss(v, std::vector<int>{2, 1});
    };
    require(finite_diff_check(f_ctc, logits, eps) < tol,
            "recognition_loss seed " + fmt(seed));

    // end-to-end generate w.r.t. a sampled subset of generator parameters
    WriterIdConfig wc;
    wc.block = tiny;
    wc.n_writers = 2;
    WriterId<double> wid;
    wid.init(wc, rng);
    GenConfig gc;
    gc.block = tiny;
    gc.fuse_layers = 1;
    gc.layers_per_scale = 1;
    Generator<double> gen;
    gen.init(gc, rng);
    const ContentSequence seq = render_text(font, "ab", 8);
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
    Tensor<double>* params[] = {&gen.content_proj.w, &gen.expand.w,
                                &gen.dec_stages[0].w, &gen.out_w};
    for (Tensor<double>* p : params) {
      const Tensor<double>* analytic = g.grad_for(*p);
      require(analytic != nullptr, "generate: missing gradient");
      std::vector<size_t> coords;
      for (size_t i = 0; i < p->size() && coords.size() < 6; i += 13) coords.push_back(i);
      require(finite_diff_check_param(forward_sum, *p, *analytic, coords, eps) < tol,
              "generate end-to-end seed " + fmt(seed));
    }
  }
}

// ---------------------------------------------------------------------------
// 3. CTC oracle, exhaustive over T <= 4, |charset| <= 3, |y| <= 2

double ctc_brute(const Tensor<double>& logits, const std::vector<int>& labels) {
  const int t_len = logits.rows(), n_classes = logits.cols();
  Tensor<double> probs({t_len, n_classes});
  for (int t = 0; t < t_len; ++t) {
    double mx = logits.at(t, 0);
    for (int c = 1; c < n_classes; ++c) mx = std::max(mx, logits.at(t, c));
    double z = 0;
    for (int c = 0; c < n_classes; ++c) z += std::exp(logits.at(t, c) - mx);
    for (int c = 0; c < n_classes; ++c)
      probs.at(t, c) = std::exp(logits.at(t, c) - mx) / z;
  }
  double total = 0;
  std::vector<int> path(size_t(t_len), 0);
  while (true) {
    double p = 1;
    for (int t = 0; t < t_len; ++t) p *= probs.at(t, path[size_t(t)]);
    std::vector<int> collapsed;
    int prev = -1;
    for (int t = 0; t < t_len; ++t) {
      if (path[size_t(t)] != prev && path[size_t(t)] != 0)
        collapsed.push_back(path[size_t(t)]);
      prev = path[size_t(t)];
    }
    if (collapsed == labels) total += p;
    int i = t_len - 1;
    while (i >= 0 && path[size_t(i)] == n_classes - 1) path[size_t(i--)] = 0;
    if (i < 0) break;
    ++path[size_t(i)];
  }
  return -std::log(total);
}

void criterion_ctc_oracle() {
  Rng rng(7);
  int instances = 0;
  for (int t_len = 1; t_len <= 4; ++t_len)
    for (int n_sym = 1; n_sym <= 3; ++n_sym) {
      std::vector<std::vector<int>> ys;
      for (int a = 1; a <= n_sym; ++a) {
        ys.push_back({a});
        for (int b = 1; b <= n_sym; ++b) ys.push_back({a, b});
      }
      for (const auto& y : ys) {
        if (min_timesteps(y) > t_len) continue;
        for (int rep = 0; rep < 4; ++rep) {
          Tensor<double> logits =
              rep == 0 ? Tensor<double>::zeros({t_len, n_sym + 1})
                       : Tensor<double>::randn({t_len, n_sym + 1}, rng, 2.0);
          const double got = recognition_loss(Var<double>::constant(logits), y).scalar();
          const double want = ctc_brute(logits, y);
          require(std::abs(got - want) < 1e-6,
                  "ctc mismatch: got " + fmt(got) + " want " + fmt(want));
          ++instances;
        }
      }
    }
  require(instances > 200, "too few CTC instances enumerated");
}

// ---------------------------------------------------------------------------
// 4. edit distance oracle, exhaustive length <= 6 over 3 symbols

int edit_oracle_memo(const std::string& a, const std::string& b,
                     std::vector<int>& memo) {
  const size_t cols = b.size() + 1;
  std::function<int(size_t, size_t)> rec = [&](size_t i, size_t j) -> int {
    if (i == a.size()) return int(b.size() - j);
    if (j == b.size()) return int(a.size() - i);
    int& slot = memo[i * cols + j];
    if (slot >= 0) return slot;
    int best = rec(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
    best = std::min(best, rec(i + 1, j) + 1);
    best = std::min(best, rec(i, j + 1) + 1);
    return slot = best;
  };
  return rec(0, 0);
}

void criterion_edit_distance_oracle() {
  std::vector<std::string> all;
  std::function<void(std::string, int)> gen_strings = [&](std::string cur, int left) {
    all.push_back(cur);
    if (left == 0) return;
    for (char c : {'a', 'b', 'c'}) gen_strings(cur + c, left - 1);
  };
  gen_strings("", 6);
  std::vector<int> memo;
  for (const auto& p : all)
    for (const auto& r : all) {
      memo.assign((p.size() + 1) * (r.size() + 1), -1);
      const int got =
          edit_distance(std::vector<char>(p.begin(), p.end()),
                        std::vector<char>(r.begin(), r.end()))
              .total();
      const int want = edit_oracle_memo(r, p, memo);
      require(got == want, "edit distance mismatch on '" + p + "' vs '" + r + "'");
    }

  require(edit_distance_utf8("sitting", "kitten").total() == 3, "kitten/sitting != 3");
  using Pairs = std::vector<std::pair<std::string, std::string>>;
  Pairs one = {{"ab", "ad"}};
  require(cer(one) == 50.0, "CER spot value");
  require(ned(one) == 50.0, "NED spot value");
  require(wer(one) == 100.0, "WER spot value");
}

// ---------------------------------------------------------------------------
// 5. FID analytics

void criterion_fid_analytics() {
  Rng rng(99);
  // identity
  FeatureSet a;
  a.features = Tensor<double>({300, 8});
  for (size_t i = 0; i < a.features.size(); ++i) a.features[i] = rng.next_gauss();
  require(fid(a, a) <= 1e-6, "fid(A,A) > 1e-6");

  // univariate: N(0,1) vs N(0,4) -> (1-2)^2 = 1
  const int n = 50000;
  FeatureSet u1, u2;
  u1.features = Tensor<double>({n, 1});
  u2.features = Tensor<double>({n, 1});
  for (int i = 0; i < n; ++i) {
    u1.features.at(i, 0) = rng.next_gauss();
    u2.features.at(i, 0) = 2.0 * rng.next_gauss();
  }
  const double f1 = fid(u1, u2);
  require(std::abs(f1 - 1.0) < 0.1, "univariate fid " + fmt(f1) + " not within 0.1 of 1");

  // d=4 shifted: ||mu||^2 = 1
  FeatureSet g1, g2;
  g1.features = Tensor<double>({n, 4});
  g2.features = Tensor<double>({n, 4});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 4; ++j) {
      g1.features.at(i, j) = rng.next_gauss();
      g2.features.at(i, j) = rng.next_gauss() + (j == 0 ? 1.0 : 0.0);
    }
  const double f2 = fid(g1, g2);
  require(std::abs(f2 - 1.0) < 0.05, "shifted fid " + fmt(f2) + " not within 0.05 of 1");
}

// ---------------------------------------------------------------------------
// 6. KID unbiasedness + hand oracle

void criterion_kid() {
  // 2x2 expanded-sum oracle
  FeatureSet a, b;
  a.features = Tensor<double>::from({2, 1}, {1.0, 3.0});
  b.features = Tensor<double>::from({2, 1}, {2.0, -1.0});
  auto k = [](double x, double y) {
    const double v = x * y + 1.0;
    return v * v * v;
  };
  const double expect = (k(1, 3) + k(3, 1)) / 2.0 + (k(2, -1) + k(-1, 2)) / 2.0 -
                        2.0 * (k(1, 2) + k(1, -1) + k(3, 2) + k(3, -1)) / 4.0;
  require(std::abs(kid(a, b, 2, 1, 5) - expect) < 1e-9, "kid 2x2 oracle");

  // unbiasedness: 200 seeds, identical distributions
  Rng rng(123);
  std::vector<double> estimates;
  for (int seed = 0; seed < 200; ++seed) {
    FeatureSet x, y;
    x.features = Tensor<double>({128, 8});
    y.features = Tensor<double>({128, 8});
    for (size_t i = 0; i < x.features.size(); ++i) x.features[i] = rng.next_gauss();
    for (size_t i = 0; i < y.features.size(); ++i) y.features[i] = rng.next_gauss();
    estimates.push_back(kid(x, y, 100, 10, uint64_t(seed)));
  }
  double mean = 0;
  for (double e : estimates) mean += e;
  mean /= double(estimates.size());
  double var = 0;
  for (double e : estimates) var += (e - mean) * (e - mean);
  var /= double(estimates.size() - 1);
  const double sem = std::sqrt(var / double(estimates.size()));
  require(std::abs(mean) <= 3.0 * sem,
          "kid mean " + fmt(mean) + " outside 3 SEM " + fmt(sem));
}

// ---------------------------------------------------------------------------
// 7. Eq-5 exactness on 100 fuzzed tensors

void criterion_balance_exactness() {
  Rng rng(321);
  BalanceConfig cfg;  // alpha = beta = 0.7
  for (int rep = 0; rep < 100; ++rep) {
    const int h = 2 + int(rng.next_index(6)), w = 2 + int(rng.next_index(40));
    Tensor<float> ga = Tensor<float>::randn({1, h, w}, rng, float(0.05 + rng.next_double() * 3));
    Tensor<float> gr = Tensor<float>::randn({1, h, w}, rng, float(0.05 + rng.next_double() * 3));
    Tensor<float> gw = Tensor<float>::randn({1, h, w}, rng, float(0.05 + rng.next_double() * 3));
    GradStats stats;
    balance_gradients(ga, gr, gw, cfg, &stats);

    Tensor<float> gr_scaled(gr.shape());
    const float sr = float(cfg.alpha * stats.sigma_d / stats.sigma_r);
    for (size_t i = 0; i < gr.size(); ++i) gr_scaled[i] = gr[i] * sr;
    Tensor<float> gw_scaled(gw.shape());
    const float sw = float(cfg.beta * stats.sigma_d / stats.sigma_w);
    for (size_t i = 0; i < gw.size(); ++i) gw_scaled[i] = gw[i] * sw;

    const double ratio_r = double(tensor_std(gr_scaled)) / stats.sigma_d;
    const double ratio_w = double(tensor_std(gw_scaled)) / stats.sigma_d;
    require(std::abs(ratio_r - 0.7) <= 1e-6, "std(g_R')/sigma_D = " + fmt(ratio_r));
    require(std::abs(ratio_w - 0.7) <= 1e-6, "std(g_W')/sigma_D = " + fmt(ratio_w));
  }
}

// ---------------------------------------------------------------------------
// shared tiny training fixture for criteria 8 and 10

RunConfig smoke_config(const std::string& corpus_dir, const std::string& out_dir) {
  RunConfig cfg = RunConfig::load(kSmokeConfig);
  cfg.font_path = kFontPath;
  cfg.manifest_path = corpus_dir + "/manifest.jsonl";
  cfg.split_path = corpus_dir + "/split.txt";
  cfg.out_dir = out_dir;
  cfg.raw = cfg.to_json();
  return cfg;
}

std::string smoke_corpus_dir() {
  static const std::string dir = [] {
    const fs::path p = work_dir() / "corpus";
    make_corpus(p.string(), load_hex_font(kFontPath), smoke_corpus_spec());
    return p.string();
  }();
  return dir;
}

std::map<std::string, Tensor<float>> snapshot(Networks& nets) {
  std::map<std::string, Tensor<float>> out;
  nets.visit_all(
      [&](const std::string& name, Tensor<float>& t) { out.emplace(name, t.clone()); });
  return out;
}

bool group_equal(const std::map<std::string, Tensor<float>>& a,
                 const std::map<std::string, Tensor<float>>& b,
                 const std::string& prefix) {
  for (const auto& [name, t] : a) {
    if (name.rfind(prefix, 0) != 0) continue;
    auto it = b.find(name);
    if (it == b.end() || !bit_equal(t, it->second)) return false;
  }
  return true;
}

// 8. phase isolation, bit-exact

void criterion_phase_isolation() {
  RunConfig cfg = smoke_config(smoke_corpus_dir(), (work_dir() / "phase").string());
  cfg.d_model = 16;
  cfg.d_ff = 32;
  cfg.disc_base_channels = 8;
  cfg.recog_c1 = 8;
  cfg.recog_c2 = 16;
  TrainState st = make_train_state(cfg);
  TrainBatch batch = sample_batch(st);

  auto before = snapshot(st.nets);
  generator_step(st, batch);
  auto after = snapshot(st.nets);
  require(!group_equal(before, after, "gen."), "generator phase did not move G");
  require(group_equal(before, after, "disc."), "generator phase moved D");
  require(group_equal(before, after, "recog."), "generator phase moved R");
  require(group_equal(before, after, "writerid."),
          "generator phase moved W (freeze contract)");

  before = snapshot(st.nets);
  critic_step(st, batch);
  after = snapshot(st.nets);
  require(group_equal(before, after, "gen."), "critic phase moved G");
  require(!group_equal(before, after, "disc."), "critic phase did not move D");
  require(!group_equal(before, after, "recog."), "critic phase did not move R");
  require(!group_equal(before, after, "writerid."), "critic phase did not move W");
}

// ---------------------------------------------------------------------------
// 9. geometry laws

void criterion_geometry() {
  const GlyphTable font = load_hex_font(kFontPath);
  Rng rng(11);
  BlockConfig tiny;
  tiny.d_model = 8;
  tiny.n_heads = 2;
  tiny.d_ff = 16;
  tiny.n_layers = 1;

  WriterIdConfig wc;
  wc.block = tiny;
  wc.n_writers = 2;
  WriterId<double> wid;
  wid.init(wc, rng);
  GenConfig gc;
  gc.block = tiny;
  gc.fuse_layers = 1;
  gc.layers_per_scale = 1;
  Generator<double> gen;
  gen.init(gc, rng);

  Graph<double> g(false);
  Tensor<double> style_img = Tensor<double>::randn({1, 32, 32}, rng, 0.3);
  StyleEmbedding<double> style = wid.embed_style(g, {g.constant(style_img)});
  std::string text;
  for (int l = 1; l <= 20; ++l) {
    text.push_back(char('a' + (l - 1) % 26));
    const ContentSequence seq = render_text(font, text, 8);
    Var<double> img = gen.synthesize(g, seq, style);
    require(img.shape() == std::vector<int>({1, 32, 16 * l}),
            "generated width != 16L at L=" + fmt(l));
  }

  // pad/truncate: idempotent, pads white
  Tensor<float> narrow = Tensor<float>::randn({1, 32, 100}, rng, 0.3f);
  Tensor<float> once = pad_or_truncate_eval(narrow);
  require(once.shape() == std::vector<int>({1, 32, 128}), "pad target shape");
  for (int y = 0; y < 32; ++y)
    for (int x = 100; x < 128; ++x)
      require(once.at3(0, y, x) == 1.0f, "padding is not white (+1)");
  require(bit_equal(pad_or_truncate_eval(once), once), "pad not idempotent");

  // recognizer timestep law
  RecognizerConfig rc;
  rc.block = tiny;
  rc.n_classes = 3;
  rc.stem_c1 = 4;
  rc.stem_c2 = 8;
  Recognizer<double> recog;
  recog.init(rc, rng);
  for (int w : {16, 48, 100, 128, 52}) {
    Tensor<double> img = Tensor<double>::randn({1, 32, w}, rng, 0.3);
    require(recog.recognize(g, g.constant(img)).shape() ==
                std::vector<int>({w / 4, 3}),
            "recognizer T != floor(W/4) at W=" + fmt(w));
  }

  // discriminator score-count law
  Discriminator<double> disc;
  DiscConfig dc;
  dc.base_channels = 4;
  disc.init(dc, rng);
  for (int w : {16, 32, 80, 128, 160}) {
    Tensor<double> img = Tensor<double>::randn({1, 32, w}, rng, 0.3);
    require(disc.discriminate(g, g.constant(img)).shape() ==
                std::vector<int>({1, 2 * (w / 16)}),
            "discriminator Np != 2*(W/16) at W=" + fmt(w));
  }
}

// ---------------------------------------------------------------------------
// 10. smoke training

void criterion_smoke_training() {
  const auto t0 = Clock::now();
  RunConfig cfg = smoke_config(smoke_corpus_dir(), (work_dir() / "smoke").string());
  TrainState st = make_train_state(cfg);
  std::ostringstream log;
  fit(st, &log);
  const double minutes =
      std::chrono::duration<double>(Clock::now() - t0).count() / 60.0;
  require(minutes < 30.0, "smoke training took " + fmt(minutes) + " min (>= 30)");

  // (a) d_hinge_loss decreasing trend: first vs last decile of the log
  std::vector<double> d_losses;
  {
    std::istringstream in(log.str());
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      d_losses.push_back(j.at("d_hinge").get<double>());
    }
  }
  require(d_losses.size() >= 20, "too few critic log entries");
  const size_t decile = d_losses.size() / 10;
  double head = 0, tail = 0;
  for (size_t i = 0; i < decile; ++i) head += d_losses[i];
  for (size_t i = d_losses.size() - decile; i < d_losses.size(); ++i)
    tail += d_losses[i];
  head /= double(decile);
  tail /= double(decile);
  require(tail < head, "d_hinge_loss did not decrease (first decile " + fmt(head) +
                           ", last decile " + fmt(tail) + ")");

  // (b) greedy-decoded CER on training words < 20%
  std::vector<std::pair<std::string, std::string>> pairs;
  for (int idx : st.train_samples) {
    const Sample& s = st.manifest.samples[size_t(idx)];
    Graph<float> g(false);
    Var<float> logits = st.nets.recog.recognize(g, g.constant(st.real_image(idx)));
    pairs.emplace_back(greedy_decode(logits.value(), st.charset), s.transcript);
  }
  const double train_cer = cer(pairs);
  require(train_cer < 20.0, "train CER " + fmt(train_cer) + "% >= 20%");

  // (c) the two writers produce visibly different generations
  double mad_sum = 0;
  int mad_n = 0;
  for (const std::string& word : {"an", "bat", "dot", "ice", "tan"}) {
    StyleSet s0 = sample_style_set(st.manifest, 0, cfg.p_style, 101);
    StyleSet s1 = sample_style_set(st.manifest, 1, cfg.p_style, 102);
    Tensor<float> img0 = generate_one(st, s0.images, word);
    Tensor<float> img1 = generate_one(st, s1.images, word);
    double mad = 0;
    for (size_t i = 0; i < img0.size(); ++i)
      mad += std::abs(double(img0[i]) - double(img1[i]));
    mad_sum += mad / double(img0.size());
    ++mad_n;
  }
  const double mean_mad = mad_sum / mad_n;
  require(mean_mad > 0.05,
          "mean |pixel| difference between writers " + fmt(mean_mad) + " <= 0.05");

  // (d) deterministic reproduction under the fixed seed (paired short runs)
  RunConfig da = cfg;
  da.steps = 200;
  da.out_dir = (work_dir() / "determinism_a").string();
  RunConfig db = da;
  db.out_dir = (work_dir() / "determinism_b").string();
  TrainState sa = make_train_state(da);
  TrainState sb = make_train_state(db);
  fit(sa, nullptr);
  fit(sb, nullptr);
  auto snap_a = snapshot(sa.nets), snap_b = snapshot(sb.nets);
  require(group_equal(snap_a, snap_b, ""), "equal seeds diverged over 200 steps");

  std::cout << "    [smoke detail] minutes=" << minutes << " d_loss " << head << "->"
            << tail << " cer=" << train_cer << "% writer_mad=" << mean_mad << "\n";

  // keep the checkpoint for the ablation/eval criteria sanity
  save_train_state(st, (work_dir() / "smoke_final.sckp").string());
}

// ---------------------------------------------------------------------------
// 11. ablation harness via the CLI

void criterion_ablation() {
  const fs::path cfg_path = work_dir() / "ablate_config.json";
  RunConfig cfg = smoke_config(smoke_corpus_dir(), (work_dir() / "ablate_runs").string());
  cfg.steps = 40;
  cfg.d_model = 32;
  cfg.d_ff = 64;
  cfg.disc_base_channels = 8;
  cfg.recog_c1 = 8;
  cfg.recog_c2 = 16;
  cfg.decoder_channels = {16, 8, 8};
  {
    std::ofstream f(cfg_path);
    f << cfg.to_json().dump(2);
  }
  const std::string out_dir = (work_dir() / "ablation_out").string();
  const std::string cmd = std::string(SCRAWL_CLI_BIN) + " ablate --config " +
                          cfg_path.string() + " --out-dir " + out_dir +
                          " --n-per-pool 8 > " + (work_dir() / "ablate.log").string() +
                          " 2>&1";
  const int rc = std::system(cmd.c_str());
  require(rc == 0, "scrawl ablate exited with " + fmt(rc));

  std::ifstream rf(out_dir + "/ablation.json");
  require(bool(rf), "ablation report missing");
  nlohmann::json report;
  rf >> report;
  const auto& rows = report.at("rows");
  require(rows.size() == 4, "expected 4 ablation variants, got " + fmt(rows.size()));
  const std::vector<std::string> expected = {
      "base-conv", "+vit_generator", "+multi_scale", "+vit_recognizer_writerid"};
  for (size_t i = 0; i < 4; ++i) {
    require(rows[i].at("variant") == expected[i],
            "ablation row " + fmt(i) + " out of order");
    require(rows[i].contains("config_hash"), "ablation row missing config hash");
    require(rows[i].at("seed") == rows[0].at("seed"),
            "ablation variants do not share the seed (data order differs)");
    if (!rows[i].at("fid_iv_s").is_null())
      require(std::isfinite(rows[i].at("fid_iv_s").get<double>()),
              "ablation fid not finite");
  }
}

// ---------------------------------------------------------------------------
// 12. size report on the paper-scale preset

void criterion_size_report() {
  // MB formula spot check: a 1M-parameter module is 3.81 MB
  const double mb_1m = 1e6 * 4.0 / (1024.0 * 1024.0);
  require(std::abs(mb_1m - 3.81) < 0.01, "MB formula spot check");

  RunConfig cfg = RunConfig::load(kPaperScaleConfig);
  Networks nets = build_networks(cfg, 340, 80);
  size_t gen = 0, enc = 0;
  nets.visit_all([&](const std::string& name, Tensor<float>& t) {
    if (name.rfind("gen.", 0) == 0) gen += t.size();
    else if (name.rfind("writerid.head.", 0) == 0) {
    } else if (name.rfind("writerid.", 0) == 0) enc += t.size();
  });
  const double total_mb = double(gen + enc) * 4.0 / (1024.0 * 1024.0);
  require(total_mb > 42.6 / 2.0 && total_mb < 42.6 * 2.0,
          "paper-scale Gen+Enc " + fmt(total_mb) + " MB outside 2x of 42.6");
  std::cout << "    [size detail] Gen=" << double(gen) * 4 / (1 << 20)
            << " MB Enc=" << double(enc) * 4 / (1 << 20) << " MB total=" << total_mb
            << " MB\n";
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<void()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "glyph oracle (independent hex-nibble decoder, 100 codepoints)",
       criterion_glyph_oracle},
      {2, "gradient suite (6 targets, 5 seeds, 64-bit, rel err < 1e-3)",
       criterion_gradient_suite},
      {3, "ctc oracle (exhaustive T<=4, |charset|<=3, |y|<=2, 1e-6)",
       criterion_ctc_oracle},
      {4, "edit-distance oracle (exhaustive length<=6 over 3 symbols)",
       criterion_edit_distance_oracle},
      {5, "fid analytics (identity, univariate closed form, shifted gaussian)",
       criterion_fid_analytics},
      {6, "kid (2x2 expanded-sum oracle, 200-seed unbiasedness)", criterion_kid},
      {7, "gradient balancing exactness (std ratios 0.7 +/- 1e-6, 100 tensors)",
       criterion_balance_exactness},
      {8, "phase isolation (bit-exact parameter diffs)", criterion_phase_isolation},
      {9, "geometry laws (16L width, pad idempotence, T and Np laws)",
       criterion_geometry},
      {10, "smoke training (2000 steps, d-loss trend, CER<20%, style gap, seed)",
       criterion_smoke_training},
      {11, "ablation harness (4 cumulative variants, no numeric failure)",
       criterion_ablation},
      {12, "size report (paper-scale preset within 2x of 42.6 MB)",
       criterion_size_report},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    std::string error;
    try {
      c.run();
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (error.empty()) {
      std::printf("[PASS] criterion %2d: %s (%.1fs)\n", c.id, c.name, secs);
    } else {
      std::printf("[FAIL] criterion %2d: %s (%.1fs)\n       %s\n", c.id, c.name, secs,
                  error.c_str());
      ++failures;
    }
    std::fflush(stdout);
  }
  if (failures) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all %zu acceptance criteria passed\n", criteria.size());
  return 0;
}
