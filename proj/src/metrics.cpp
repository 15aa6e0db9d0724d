#include "scrawl/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "scrawl/rng.hpp"
#include "scrawl/unicode.hpp"

namespace scrawl {

namespace {

Eigen::VectorXd feature_mean(const FeatureSet& s) {
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(s.dim());
  for (int i = 0; i < s.n(); ++i)
    for (int j = 0; j < s.dim(); ++j) mu[j] += s.features.at(i, j);
  return mu / double(s.n());
}

Eigen::MatrixXd feature_cov(const FeatureSet& s, const Eigen::VectorXd& mu) {
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(s.dim(), s.dim());
  Eigen::VectorXd row(s.dim());
  for (int i = 0; i < s.n(); ++i) {
    for (int j = 0; j < s.dim(); ++j) row[j] = s.features.at(i, j) - mu[j];
    cov.noalias() += row * row.transpose();
  }
  return cov / double(s.n() - 1);  // unbiased
}

// symmetric PSD square root, negative eigenvalues clamped to zero
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (m + m.transpose()));
  Eigen::VectorXd lam = es.eigenvalues();
  for (int i = 0; i < lam.size(); ++i) lam[i] = std::sqrt(std::max(lam[i], 0.0));
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

void check_features(const FeatureSet& s, const char* side) {
  if (s.n() < 2)
    throw DataError(std::string("fid: need at least 2 samples on side ") + side);
  if (!s.features.all_finite())
    throw NumericError(std::string("fid: non-finite features on side ") + side);
}

}  // namespace

double fid(const FeatureSet& a, const FeatureSet& b) {
  check_features(a, "A");
  check_features(b, "B");
  if (a.dim() != b.dim()) throw DataError("fid: feature dimension mismatch");

  const Eigen::VectorXd mu_a = feature_mean(a), mu_b = feature_mean(b);
  const Eigen::MatrixXd cov_a = feature_cov(a, mu_a), cov_b = feature_cov(b, mu_b);

  const Eigen::MatrixXd a_half = psd_sqrt(cov_a);
  const Eigen::MatrixXd inner = a_half * cov_b * a_half;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()));
  double tr_sqrt = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    tr_sqrt += std::sqrt(std::max(es.eigenvalues()[i], 0.0));

  const double value = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() -
                       2.0 * tr_sqrt;
  return std::max(value, 0.0);
}

double kid(const FeatureSet& a, const FeatureSet& b, int subset_size, int n_subsets,
           uint64_t seed) {
  if (subset_size < 2) throw DataError("kid: subset_size must be >= 2");
  if (n_subsets < 1) throw DataError("kid: n_subsets must be >= 1");
  if (a.n() < subset_size || b.n() < subset_size)
    throw DataError("kid: subset_size exceeds a feature set");
  if (a.dim() != b.dim()) throw DataError("kid: feature dimension mismatch");
  const int d = a.dim();
  const int m = subset_size;

  auto kernel = [&](const FeatureSet& s1, int i, const FeatureSet& s2, int j) {
    double dot = 0;
    for (int k = 0; k < d; ++k) dot += s1.features.at(i, k) * s2.features.at(j, k);
    const double base = dot / double(d) + 1.0;
    return base * base * base;
  };

  Rng rng(seed);
  double acc = 0;
  for (int s = 0; s < n_subsets; ++s) {
    const auto ia = rng.sample_without_replacement(size_t(a.n()), size_t(m));
    const auto ib = rng.sample_without_replacement(size_t(b.n()), size_t(m));
    double kxx = 0, kyy = 0, kxy = 0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        if (i != j) {
          kxx += kernel(a, int(ia[size_t(i)]), a, int(ia[size_t(j)]));
          kyy += kernel(b, int(ib[size_t(i)]), b, int(ib[size_t(j)]));
        }
        kxy += kernel(a, int(ia[size_t(i)]), b, int(ib[size_t(j)]));
      }
    acc += kxx / double(m * (m - 1)) + kyy / double(m * (m - 1)) -
           2.0 * kxy / double(m) / double(m);
  }
  return acc / double(n_subsets);
}

EditCounts edit_distance_utf8(const std::string& pred, const std::string& ref) {
  return edit_distance(nfc_normalize(utf8_decode(pred)),
                       nfc_normalize(utf8_decode(ref)));
}

std::vector<std::string> whitespace_tokens(const std::string& s) {
  const auto cps = utf8_decode(s);
  auto is_space = [](char32_t c) {
    return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' ||
           c == U'\v' || c == 0x00A0 || (c >= 0x2000 && c <= 0x200A) || c == 0x3000;
  };
  std::vector<std::string> out;
  std::vector<char32_t> cur;
  for (char32_t c : cps) {
    if (is_space(c)) {
      if (!cur.empty()) {
        out.push_back(utf8_encode(cur));
        cur.clear();
      }
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(utf8_encode(cur));
  return out;
}

double cer(const std::vector<std::pair<std::string, std::string>>& pairs) {
  if (pairs.empty()) throw DataError("cer: no pairs");
  long long cost = 0, ref_len = 0;
  for (const auto& [pred, ref] : pairs) {
    const auto r = nfc_normalize(utf8_decode(ref));
    if (r.empty()) throw DataError("cer: empty reference");
    cost += edit_distance(nfc_normalize(utf8_decode(pred)), r).total();
    ref_len += (long long)r.size();
  }
  return 100.0 * double(cost) / double(ref_len);
}

double wer(const std::vector<std::pair<std::string, std::string>>& pairs) {
  if (pairs.empty()) throw DataError("wer: no pairs");
  long long cost = 0, ref_len = 0;
  for (const auto& [pred, ref] : pairs) {
    const auto r = whitespace_tokens(nfc_normalize_utf8(ref));
    if (r.empty()) throw DataError("wer: empty reference");
    cost += edit_distance(whitespace_tokens(nfc_normalize_utf8(pred)), r).total();
    ref_len += (long long)r.size();
  }
  return 100.0 * double(cost) / double(ref_len);
}

double ned(const std::vector<std::pair<std::string, std::string>>& pairs) {
  if (pairs.empty()) throw DataError("ned: no pairs");
  double acc = 0;
  for (const auto& [pred, ref] : pairs) {
    const auto p = nfc_normalize(utf8_decode(pred));
    const auto r = nfc_normalize(utf8_decode(ref));
    if (r.empty()) throw DataError("ned: empty reference");
    const double denom = double(std::max(p.size(), r.size()));
    acc += double(edit_distance(p, r).total()) / denom;
  }
  return 100.0 * acc / double(pairs.size());
}

// ---------------------------------------------------------------------------
// fixed-seed feature extractor

namespace {

struct ExtractorNet {
  // stage s: conv 4x4 stride 2 pad 1, channels kCh[s] -> kCh[s+1], tanh
  static constexpr int kCh[5] = {1, 16, 32, 64, 256};
  std::vector<std::vector<float>> w;  // per stage [co*ci*16]
  std::vector<std::vector<float>> b;

  explicit ExtractorNet(uint64_t seed) {
    Rng rng(seed ^ 0xfeedfacecafebeefULL);
    for (int s = 0; s < 4; ++s) {
      const int ci = kCh[s], co = kCh[s + 1];
      std::vector<float> ws(size_t(co) * size_t(ci) * 16);
      const double scale = std::sqrt(2.0 / double(ci * 16));
      for (auto& v : ws) v = float(rng.next_gauss() * scale);
      w.push_back(std::move(ws));
      b.push_back(std::vector<float>(size_t(co), 0.0f));
    }
  }

  std::vector<float> forward(const Tensor<float>& img) const {
    int h = 32, wd = 128;
    std::vector<float> cur(img.size());
    for (size_t i = 0; i < img.size(); ++i) cur[i] = img[i];
    int ci = 1;
    for (int s = 0; s < 4; ++s) {
      const int co = kCh[s + 1];
      const int ho = h / 2, wo = wd / 2;
      std::vector<float> next(size_t(co) * size_t(ho) * size_t(wo), 0.0f);
      for (int o = 0; o < co; ++o)
        for (int y = 0; y < ho; ++y)
          for (int x = 0; x < wo; ++x) {
            float acc = b[size_t(s)][size_t(o)];
            for (int c = 0; c < ci; ++c)
              for (int u = 0; u < 4; ++u) {
                const int iy = y * 2 + u - 1;
                if (iy < 0 || iy >= h) continue;
                for (int v = 0; v < 4; ++v) {
                  const int ix = x * 2 + v - 1;
                  if (ix < 0 || ix >= wd) continue;
                  acc += w[size_t(s)][((size_t(o) * ci + c) * 4 + u) * 4 + size_t(v)] *
                         cur[(size_t(c) * h + size_t(iy)) * size_t(wd) + size_t(ix)];
                }
              }
            next[(size_t(o) * ho + size_t(y)) * size_t(wo) + size_t(x)] =
                std::tanh(acc);
          }
      cur = std::move(next);
      ci = co;
      h = ho;
      wd = wo;
    }
    // global average pool over the 2x8 map
    std::vector<float> feat(256);
    for (int c = 0; c < 256; ++c) {
      float acc = 0;
      for (int i = 0; i < h * wd; ++i) acc += cur[size_t(c) * size_t(h * wd) + size_t(i)];
      feat[size_t(c)] = acc / float(h * wd);
    }
    return feat;
  }
};

}  // namespace

FeatureSet default_feature_extractor(const std::vector<Tensor<float>>& images,
                                     uint64_t seed) {
  if (images.empty()) throw DataError("feature extractor: no images");
  for (const auto& img : images)
    if (img.rank() != 3 || img.dim(0) != 1 || img.dim(1) != 32 || img.dim(2) != 128)
      throw DataError("feature extractor: images must be [1,32,128], got " +
                      img.shape_str());
  const ExtractorNet net(seed);
  FeatureSet out;
  out.extractor_id = "randconv4-gap256-seed" + std::to_string(seed);
  out.features = Tensor<double>({int(images.size()), 256});
  for (size_t i = 0; i < images.size(); ++i) {
    const auto f = net.forward(images[i]);
    for (int j = 0; j < 256; ++j) out.features.at(int(i), j) = double(f[size_t(j)]);
  }
  return out;
}

}  // namespace scrawl
