// Deterministic random number generation. std:: distributions are
// implementation-defined, so everything that must reproduce across
// platforms goes through this engine instead.
#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace scrawl {

class Rng {
 public:
  explicit Rng(uint64_t seed) { reseed(seed); }

  void reseed(uint64_t seed) {
    // splitmix64 expansion of the seed into xoshiro256** state
    uint64_t x = seed;
    for (auto& w : s_) {
      x += 0x9e3779b97f4a7c15ULL;
      uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      w = z ^ (z >> 31);
    }
    gauss_cached_ = false;
  }

  uint64_t next_u64() {
    auto rotl = [](uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform in [0, 1)
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n), rejection sampled
  uint64_t next_index(uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::next_index: n must be > 0");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  double next_gauss() {
    // Box-Muller with a cached spare
    if (gauss_cached_) {
      gauss_cached_ = false;
      return gauss_spare_;
    }
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    gauss_spare_ = r * std::sin(a);
    gauss_cached_ = true;
    return r * std::cos(a);
  }

  // k distinct indices from [0, n), order randomized
  std::vector<size_t> sample_without_replacement(size_t n, size_t k) {
    if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
    std::vector<size_t> pool(n);
    for (size_t i = 0; i < n; ++i) pool[i] = i;
    for (size_t i = 0; i < k; ++i) {
      const size_t j = i + size_t(next_index(n - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = size_t(next_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // state serialization for resumable training
  std::vector<uint64_t> state() const {
    return {s_[0], s_[1], s_[2], s_[3], gauss_cached_ ? 1ULL : 0ULL,
            std::bit_cast<uint64_t>(gauss_spare_)};
  }

  void restore(const std::vector<uint64_t>& st) {
    if (st.size() != 6) throw std::invalid_argument("Rng::restore: bad state");
    for (int i = 0; i < 4; ++i) s_[i] = st[size_t(i)];
    gauss_cached_ = st[4] != 0;
    gauss_spare_ = std::bit_cast<double>(st[5]);
  }

 private:
  uint64_t s_[4] = {};
  bool gauss_cached_ = false;
  double gauss_spare_ = 0.0;
};

}  // namespace scrawl
