#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "gsketch/hash.hpp"
#include "gsketch/measures.hpp"
#include "gsketch/sketch.hpp"

namespace gsketch {

struct GSamplerParams {
  Layout layout{1, 2};
  uint64_t n = 2;          // stream length bound; ids lie in [0, n)
  double T = 1;            // number of queries the failure rate is spread over
  double alpha = 0.125;

  double C_L = 2;          // substreams L = ceil(C_L log n)
  double C_K = 4;          // levels K = ceil(C_K log n / alpha)
  double C_rep = 3;        // repetitions ceil(C_rep log(nT)), forced odd
  double C_b = 8;          // buckets ceil(C_b / theta^2)
  double c_d = 1;          // dummy count constant
  // Subsampling depth is floor(log2(depth_scale * alpha^2 (1+alpha)^j / log n)).
  // A negative value selects alpha / 8.
  double depth_scale = -1;

  int reps_override = 0;
  uint64_t buckets_override = 0;
  int id_reps = 3;
  IdMode id_mode = IdMode::Bits;

  double log2n() const { return std::max(1.0, std::log2(static_cast<double>(n))); }
  int L() const { return std::max(1, static_cast<int>(std::ceil(C_L * log2n()))); }
  int K() const { return std::max(1, static_cast<int>(std::ceil(C_K * log2n() / alpha))); }
  // Detection threshold of the per-substream heavy-hitter sketches.
  double theta() const { return alpha * alpha * alpha / log2n(); }
  double depth_c() const { return depth_scale < 0 ? alpha / 8 : depth_scale; }

  uint64_t buckets() const {
    if (buckets_override) return buckets_override;
    double b = std::ceil(C_b / (theta() * theta()));
    return b > 1e18 ? uint64_t(1e18) : static_cast<uint64_t>(b);
  }
  int reps() const { return reps_override ? reps_override : odd_reps(C_rep, double(n) * T); }

  void validate() const {
    require(alpha > 0 && alpha < 1, "alpha must lie in (0,1)");
    require(n >= 1 && T >= 1, "n and T must be positive");
    require(C_L > 0 && C_K > 0 && C_rep > 0 && C_b > 0 && c_d > 0, "constants must be positive");
  }

  SketchParams sketch(uint64_t seed) const {
    SketchParams P;
    P.layout = layout;
    P.n = n;
    P.buckets = buckets();
    P.reps = reps();
    P.id_reps = id_reps;
    P.id_mode = id_mode;
    P.seed = seed;
    return P;
  }
};

// Randomized geometric level boundaries. Level j (1 <= j <= K) is
// [B(j+1), B(j)) with B(j) = 8 gamma M / (1+alpha)^j. Level 0 collects
// anything at or above B(1). The oracle and the sampler both classify
// through this class so boundary rounding is identical.
class LevelGrid {
 public:
  LevelGrid(double alpha, double gamma, double M_hat, int K)
      : alpha_(alpha), gamma_(gamma), M_(M_hat), K_(K), lr_(std::log1p(alpha)) {}

  double boundary(int j) const { return 8 * gamma_ * M_ / std::pow(1 + alpha_, j); }
  double lower(int j) const { return boundary(j + 1); }
  double upper(int j) const { return j == 0 ? INFINITY : boundary(j); }
  int K() const { return K_; }

  // Level index of a positive value, or K+1 when it is below level K.
  int level_of(double v) const {
    if (!(v > 0)) return K_ + 1;
    if (v >= boundary(1)) return 0;
    if (v < boundary(K_ + 1)) return K_ + 1;
    int j = static_cast<int>(std::floor(std::log(8 * gamma_ * M_ / v) / lr_));
    j = std::clamp(j, 1, K_);
    while (j > 1 && v >= boundary(j)) --j;
    while (j < K_ && v < boundary(j + 1)) ++j;
    return j;
  }

 private:
  double alpha_, gamma_, M_;
  int K_;
  double lr_;
};

// Substream schedule: level j reads substream s(j), whose rows were kept with
// probability 2^-(s(j)-1); contributions are scaled by the inverse.
struct DepthSchedule {
  double alpha;
  double log2n;
  double depth_c;
  int L;

  explicit DepthSchedule(const GSamplerParams& P)
      : alpha(P.alpha), log2n(P.log2n()), depth_c(P.depth_c()), L(P.L()) {}

  int depth(int j) const {
    if (j <= 0) return 1;
    double e = std::log2(depth_c * alpha * alpha / log2n) + j * std::log2(1 + alpha);
    if (e < 1) return 1;
    return static_cast<int>(std::min(std::floor(e), 1e6));
  }
  int substream(int j) const {
    int Lj = depth(j);
    return Lj == 1 ? 1 : std::min(L, Lj + 1);
  }
  double scale(int j) const { return std::ldexp(1.0, substream(j) - 1); }
};

// Virtual dummy rows. Levels above log_{1+alpha}(log^2 n / alpha^3) get
// ceil(c_d (1+alpha)^j alpha^3 / log n) dummies of weight
// c_w M / ((1+alpha)^j alpha^2); c_w is fixed so the total is M/2.
class DummySpec {
 public:
  DummySpec() = default;
  explicit DummySpec(const GSamplerParams& P) : alpha_(P.alpha), K_(P.K()) {
    double ln = P.log2n();
    first_ = static_cast<int>(std::floor(std::log(ln * ln / std::pow(alpha_, 3)) / std::log1p(alpha_))) + 1;
    first_ = std::max(first_, 1);
    double s = 0;
    counts_.assign(K_ + 1, 0.0);
    for (int j = first_; j <= K_; ++j) {
      counts_[j] = std::ceil(P.c_d * std::pow(1 + alpha_, j) * std::pow(alpha_, 3) / ln);
      s += counts_[j] / (std::pow(1 + alpha_, j) * alpha_ * alpha_);
    }
    // Shaved by a few ulps so the floating-point total stays at or below M/2.
    c_w_ = s > 0 ? 0.5 / s * (1 - 1e-12) : 0.0;
  }

  int first_level() const { return first_; }
  int K() const { return K_; }
  double c_w() const { return c_w_; }
  double count(int j) const { return (j >= first_ && j <= K_) ? counts_[j] : 0.0; }
  double weight(int j, double M_hat) const {
    return c_w_ * M_hat / (std::pow(1 + alpha_, j) * alpha_ * alpha_);
  }
  double total_mass(double M_hat) const {
    double t = 0;
    for (int j = first_; j <= K_; ++j) t += counts_[j] * weight(j, M_hat);
    return t;
  }

 private:
  double alpha_ = 0.5;
  int K_ = 0;
  int first_ = 1;
  double c_w_ = 0;
  std::vector<double> counts_;
};

}  // namespace gsketch
