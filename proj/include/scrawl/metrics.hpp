// Evaluation stack: Fréchet distance between Gaussian feature fits, unbiased
// kernel (MMD^2) distance, Levenshtein alignment counts, CER/WER/NED, and the
// fixed-seed feature extractor that stands in for a pretrained embedding
// network.
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scrawl/errors.hpp"
#include "scrawl/tensor.hpp"

namespace scrawl {

struct FeatureSet {
  Tensor<double> features;  // [N, d]
  std::string extractor_id;

  int n() const { return features.rows(); }
  int dim() const { return features.cols(); }
};

// ||mu_A - mu_B||^2 + Tr(S_A + S_B - 2 (S_A S_B)^(1/2)), unbiased covariances,
// matrix square root via symmetric eigendecomposition with negative
// eigenvalues clamped to zero; result clamped at zero
double fid(const FeatureSet& a, const FeatureSet& b);

// unbiased MMD^2 with kernel (x.y/d + 1)^3, averaged over n_subsets
// without-replacement draws of subset_size from each side
double kid(const FeatureSet& a, const FeatureSet& b, int subset_size, int n_subsets,
           uint64_t seed);

struct EditCounts {
  int substitutions = 0;
  int insertions = 0;  // symbols in pred with no ref counterpart
  int deletions = 0;   // ref symbols missing from pred
  int total() const { return substitutions + insertions + deletions; }
};

// minimal-cost alignment with unit costs; backtrace tie-break order:
// substitution, then deletion, then insertion
template <class Sym>
EditCounts edit_distance(const std::vector<Sym>& pred, const std::vector<Sym>& ref);

EditCounts edit_distance_utf8(const std::string& pred, const std::string& ref);

std::vector<std::string> whitespace_tokens(const std::string& s);

// percentages over a corpus of (prediction, reference) pairs
double cer(const std::vector<std::pair<std::string, std::string>>& pairs);
double wer(const std::vector<std::pair<std::string, std::string>>& pairs);
double ned(const std::vector<std::pair<std::string, std::string>>& pairs);

// fixed-seed random 4-stage conv net with global average pooling -> 256-d
// features; weights are derived from the seed and never trained. Images must
// be [1,32,128] in [-1,1].
FeatureSet default_feature_extractor(const std::vector<Tensor<float>>& images,
                                     uint64_t seed);

// ---------------------------------------------------------------------------

template <class Sym>
EditCounts edit_distance(const std::vector<Sym>& pred, const std::vector<Sym>& ref) {
  const int nr = int(ref.size()), np = int(pred.size());
  // dp[i][j] = min edits aligning ref[0..i) with pred[0..j)
  std::vector<int> dp(size_t(nr + 1) * size_t(np + 1));
  auto at = [&](int i, int j) -> int& { return dp[size_t(i) * size_t(np + 1) + size_t(j)]; };
  for (int i = 0; i <= nr; ++i) at(i, 0) = i;
  for (int j = 0; j <= np; ++j) at(0, j) = j;
  for (int i = 1; i <= nr; ++i)
    for (int j = 1; j <= np; ++j) {
      const int sub = at(i - 1, j - 1) + (ref[size_t(i - 1)] == pred[size_t(j - 1)] ? 0 : 1);
      const int del = at(i - 1, j) + 1;
      const int ins = at(i, j - 1) + 1;
      at(i, j) = std::min({sub, del, ins});
    }

  EditCounts counts;
  int i = nr, j = np;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        at(i, j) == at(i - 1, j - 1) + (ref[size_t(i - 1)] == pred[size_t(j - 1)] ? 0 : 1)) {
      if (ref[size_t(i - 1)] != pred[size_t(j - 1)]) ++counts.substitutions;
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++counts.deletions;
      --i;
    } else {
      ++counts.insertions;
      --j;
    }
  }
  return counts;
}

}  // namespace scrawl
