#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace gsketch {

// Arithmetic modulo the Mersenne prime 2^61 - 1.
inline constexpr uint64_t kMersenne61 = (uint64_t{1} << 61) - 1;

inline uint64_t mod_mersenne(unsigned __int128 x) {
  uint64_t lo = static_cast<uint64_t>(x & kMersenne61);
  uint64_t hi = static_cast<uint64_t>(x >> 61);
  uint64_t r = lo + hi;
  if (r >= kMersenne61) r -= kMersenne61;
  return r;
}

inline uint64_t mulmod61(uint64_t a, uint64_t b) {
  return mod_mersenne(static_cast<unsigned __int128>(a) * b);
}

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic child seed from a parent seed and a path of tags.
inline uint64_t derive_seed(uint64_t seed, std::initializer_list<uint64_t> tags) {
  uint64_t s = seed ^ 0x6a09e667f3bcc909ULL;
  uint64_t out = splitmix64(s);
  for (uint64_t t : tags) {
    s = out ^ (t * 0xff51afd7ed558ccdULL + 0x2545f4914f6cdd1dULL);
    out = splitmix64(s);
  }
  return out;
}

// Degree K-1 polynomial over GF(2^61 - 1): a K-wise independent family.
template <int K>
class PolyHash {
 public:
  PolyHash() { coef_.fill(0); }
  explicit PolyHash(uint64_t seed) {
    uint64_t s = seed;
    for (auto& c : coef_) {
      do {
        c = splitmix64(s) & kMersenne61;
      } while (c >= kMersenne61);
    }
  }

  uint64_t operator()(uint64_t key) const {
    uint64_t x = mod_mersenne(key);
    uint64_t acc = coef_[K - 1];
    for (int i = K - 2; i >= 0; --i) {
      acc = mulmod61(acc, x) + coef_[i];
      if (acc >= kMersenne61) acc -= kMersenne61;
    }
    return acc;
  }

  const std::array<uint64_t, K>& coefficients() const { return coef_; }

 private:
  std::array<uint64_t, K> coef_;
};

// Bucket index in [0, range) from a 2-wise independent family.
class BucketHash {
 public:
  BucketHash() = default;
  BucketHash(uint64_t seed, uint64_t range) : h_(seed), range_(range) {}
  uint64_t operator()(uint64_t key) const { return h_(key) % range_; }
  uint64_t range() const { return range_; }

 private:
  PolyHash<2> h_;
  uint64_t range_ = 1;
};

// Random sign from a 4-wise independent family.
class SignHash {
 public:
  SignHash() = default;
  explicit SignHash(uint64_t seed) : h_(seed) {}
  double operator()(uint64_t key) const { return (h_(key) & 1) ? 1.0 : -1.0; }

 private:
  PolyHash<4> h_;
};

// Uniform value in [0, 1) from a 4-wise independent family; used for
// nested subsampling decisions.
class UnitHash {
 public:
  UnitHash() = default;
  explicit UnitHash(uint64_t seed) : h_(seed) {}
  double operator()(uint64_t key) const {
    return static_cast<double>(h_(key)) / static_cast<double>(kMersenne61);
  }
  uint64_t raw(uint64_t key) const { return h_(key); }

 private:
  PolyHash<4> h_;
};

}  // namespace gsketch
