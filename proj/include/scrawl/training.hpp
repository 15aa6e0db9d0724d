// Alternating optimization: a generator phase (G updated through gradients
// balanced at the generated-image interface; W frozen as a feature extractor)
// and a critic phase (D on hinge loss, R and W on real samples only).
// Training runs in float32; checkpoints are resumable bit-exactly.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "scrawl/checkpoint.hpp"
#include "scrawl/config.hpp"
#include "scrawl/dataio.hpp"
#include "scrawl/discriminator.hpp"
#include "scrawl/generator.hpp"
#include "scrawl/recognizer.hpp"
#include "scrawl/writerid.hpp"

namespace scrawl {

struct Networks {
  Generator<float> gen;
  Discriminator<float> disc;
  Recognizer<float> recog;
  WriterId<float> writer;

  void visit_all(const ParamVisitor<float>& fn) {
    gen.visit("gen", fn);
    disc.visit("disc", fn);
    recog.visit("recog", fn);
    writer.visit("writerid", fn);
  }
};

Networks build_networks(const RunConfig& cfg, int n_writers, int n_classes);

// ---------------------------------------------------------------------------
// optimizer

struct AdamConfig {
  double lr = 5e-5;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  explicit Adam(const AdamConfig& cfg) : cfg_(cfg) {}

  struct Entry {
    std::string name;
    Tensor<float>* param;
    const Tensor<float>* grad;  // may be null (param unused this step)
  };

  void step(const std::vector<Entry>& entries);

  int64_t t() const { return t_; }
  void set_t(int64_t t) { t_ = t; }
  std::map<std::string, std::pair<Tensor<float>, Tensor<float>>>& moments() {
    return moments_;
  }

 private:
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::map<std::string, std::pair<Tensor<float>, Tensor<float>>> moments_;  // m, v
};

// ---------------------------------------------------------------------------
// gradient balancing at the generated-image interface

struct BalanceConfig {
  double alpha = 0.7;
  double beta = 0.7;
};

struct GradStats {
  double sigma_d = 0, sigma_r = 0, sigma_w = 0;
};

// standard deviation over all elements of all tensors in the group
double group_std(const std::vector<Tensor<float>>& group);

// g_combined_i = g_adv_i + alpha*(sigma_D/sigma_R)*g_R_i + beta*(sigma_D/sigma_W)*g_W_i
// with sigmas taken over the whole batch; near-zero sigma_R/sigma_W passes the
// term through unscaled and records a warning
std::vector<Tensor<float>> balance_gradients(const std::vector<Tensor<float>>& g_adv,
                                             const std::vector<Tensor<float>>& g_r,
                                             const std::vector<Tensor<float>>& g_w,
                                             const BalanceConfig& cfg,
                                             GradStats* stats,
                                             std::vector<std::string>* warnings);

Tensor<float> balance_gradients(const Tensor<float>& g_adv, const Tensor<float>& g_r,
                                const Tensor<float>& g_w, const BalanceConfig& cfg,
                                GradStats* stats = nullptr,
                                std::vector<std::string>* warnings = nullptr);

// ---------------------------------------------------------------------------
// train state

struct BatchItem {
  int sample_idx = 0;            // real sample (critic phase)
  std::vector<int> style_idx;    // style exemplars, same writer
  std::string gen_text;          // target word (generator phase)
};

struct TrainBatch {
  std::vector<BatchItem> items;
};

struct TrainState {
  RunConfig cfg;
  GlyphTable font;
  Manifest manifest;
  SplitSpec split;
  std::vector<std::string> vocab;      // ordered training vocabulary
  std::vector<int> train_samples;     // indices with writer in train_writers
  Charset charset;
  Networks nets;
  Adam opt_gen, opt_critic;
  int64_t step = 0;
  Rng rng{1};

  std::unordered_map<int, Tensor<float>> image_cache;  // preprocessed reals
  const Tensor<float>& real_image(int sample_idx);
};

TrainState make_train_state(const RunConfig& cfg);

TrainBatch sample_batch(TrainState& st);

struct StepReport {
  std::string phase;
  double l_adv = 0, l_r = 0, l_w = 0;
  double total = 0;  // l_adv + l_r + l_w
  GradStats stats;
  std::vector<std::string> warnings;
};

// updates G only; throws NumericError on non-finite losses (state untouched)
StepReport generator_step(TrainState& st, const TrainBatch& batch);

// updates D, R, W only (R and W on real samples); fakes regenerated without
// generator gradients
StepReport critic_step(TrainState& st, const TrainBatch& batch);

void save_train_state(const TrainState& st, const std::string& path);
TrainState load_train_state(const std::string& path);

// checkpoint load without touching manifest/split; enough for generation,
// recognition, and size reporting
struct NetworkBundle {
  RunConfig cfg;
  Networks nets;
  Charset charset;
  std::vector<std::string> writer_tags;
  GlyphTable font;
  int64_t step = 0;
};

NetworkBundle load_networks(const std::string& path);

// alternates critic (even step) / generator (odd step) until cfg.steps;
// writes metrics JSON-lines and periodic checkpoints under cfg.out_dir
void fit(TrainState& st, std::ostream* metrics_log);

}  // namespace scrawl
