#pragma once

#include <gtest/gtest.h>

#include "gsketch/gsketch.hpp"

namespace gsketch::testing {

// Small random instance source for property tests. Each case draws from its
// own derived seed so a failure names a reproducible case index.
struct Gen {
  Rng g;
  explicit Gen(uint64_t seed) : g(seed) {}

  double unif(double lo = 0, double hi = 1) { return lo + (hi - lo) * uniform01(g); }
  int integer(int lo, int hi) { return lo + static_cast<int>(uniform01(g) * (hi - lo + 1)) % (hi - lo + 1); }
  double normal() { return std::normal_distribution<double>()(g); }
  Vec vec(int d) { return gaussian_vec(d, g); }

  // Rows with log-uniform scales over [e^-s, e^s].
  Mat rows(int n, int d, double s = 1) {
    Mat A(n, d);
    for (int i = 0; i < n; ++i) A.row(i) = vec(d).transpose() * std::exp(unif(-s, s));
    return A;
  }
  Vec labels(int n) {
    Vec b(n);
    for (int i = 0; i < n; ++i) b[i] = normal();
    return b;
  }
};

template <class F>
void for_cases(uint64_t seed, int cases, F&& f) {
  for (int c = 0; c < cases; ++c) {
    SCOPED_TRACE("case " + std::to_string(c));
    Gen g(derive_seed(seed, {uint64_t(c)}));
    f(g);
  }
}

inline MeasureSpec spec(MeasureKind k, double tau = 1, double lambda = 0) {
  MeasureSpec m;
  m.kind = k;
  m.tau = tau;
  m.lambda = lambda;
  return m;
}

inline GSamplerParams sampler(int d, uint64_t n, double alpha = 0.125, int p = 2) {
  GSamplerParams P;
  P.layout = Layout(d, p);
  P.n = n;
  P.alpha = alpha;
  return P;
}

}  // namespace gsketch::testing
