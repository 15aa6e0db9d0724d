// Evaluation pipeline: drives the generator over evaluation pools and
// assembles the FID/KID/CER/WER/NED report, including the four-way
// vocabulary x style protocol.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "scrawl/dataio.hpp"
#include "scrawl/metrics.hpp"
#include "scrawl/training.hpp"

namespace scrawl {

struct FourWayResult {
  std::optional<double> fid_value[4];  // IV-S, IV-U, OOV-S, OOV-U
  int n_real[4] = {0, 0, 0, 0};
  int n_generated[4] = {0, 0, 0, 0};
};

// For each pool: condition on the pool's own styles and words, generate
// n_per_pool images, compute FID against the pool's real images. Pools too
// small for a covariance fit are reported absent.
FourWayResult eval_four_way(const EvalGrid& grid, TrainState& st, int n_per_pool,
                            uint64_t seed);

struct TextDiff {
  std::string pred, ref;
  int substitutions = 0, insertions = 0, deletions = 0;
};

struct EvalReport {
  std::vector<TextDiff> diffs;  // one per generated image
  double fid_value = 0;
  double kid_value = 0;
  double cer_value = 0;
  double wer_value = 0;
  double ned_value = 0;
  FourWayResult four_way;
  std::string extractor_id;
  nlohmann::json to_json() const;
};

struct EvalOptions {
  int n_gen = 64;           // generated images for the overall fid/kid/cer
  int n_per_pool = 32;      // generated images per four-way cell
  int kid_subset_size = 100;
  int kid_subsets = 10;
  uint64_t seed = 1;
};

EvalReport evaluate_checkpoint(TrainState& st, const std::vector<Sample>& eval_samples,
                               const EvalGrid& grid, const EvalOptions& opt);

// generation helpers shared by the CLI
Tensor<float> generate_one(TrainState& st, const std::vector<Tensor<float>>& style,
                           const std::string& text);

}  // namespace scrawl
