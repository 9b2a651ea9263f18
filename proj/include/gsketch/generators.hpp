#pragma once

#include <cmath>
#include <random>

#include "gsketch/gsampler.hpp"

namespace gsketch {

struct Generated {
  Mat A;
  Vec b;
  Vec x;       // query point the instance is built around
  Vec x_true;  // planted model, when there is one
};

inline Vec gaussian_vec(int d, Rng& g) {
  std::normal_distribution<double> N;
  Vec v(d);
  for (int k = 0; k < d; ++k) v[k] = N(g);
  return v;
}

// Exactly one nonzero row (row 0).
inline Generated gen_example1(int n, int d, uint64_t seed) {
  Rng g(derive_seed(seed, {101}));
  Generated G;
  G.A = Mat::Zero(n, d);
  G.b = Vec::Zero(n);
  G.A.row(0) = gaussian_vec(d, g).transpose();
  G.b[0] = std::normal_distribution<double>()(g);
  G.x = gaussian_vec(d, g);
  G.x_true = Vec::Zero(d);
  return G;
}

// Every row is large, but x is nearly orthogonal to all rows except row 0.
inline Generated gen_example2(int n, int d, uint64_t seed, double leak = 1e-3) {
  require(d >= 2, "example 2 needs d >= 2");
  Rng g(derive_seed(seed, {102}));
  Generated G;
  G.A = Mat::Zero(n, d);
  G.b = Vec::Zero(n);
  G.x = Vec::Zero(d);
  G.x[0] = 1;
  G.A(0, 0) = 10;
  for (int i = 1; i < n; ++i) {
    Vec v = gaussian_vec(d, g);
    v[0] = 0;
    v *= 10 / std::max(v.norm(), 1e-12);
    v[0] = leak * std::normal_distribution<double>()(g);
    G.A.row(i) = v.transpose();
  }
  G.x_true = Vec::Zero(d);
  return G;
}

// A nu fraction of rows is scaled by sqrt(n), so their squared-loss gradients
// are O(n) while the rest stay O(poly d).
inline Generated gen_example3(int n, int d, double nu, uint64_t seed, double noise = 0.5) {
  Rng g(derive_seed(seed, {103}));
  std::normal_distribution<double> N;
  Generated G;
  G.A = Mat::Zero(n, d);
  G.b = Vec::Zero(n);
  G.x_true = gaussian_vec(d, g);
  int big = static_cast<int>(std::round(nu * n));
  double s_big = std::sqrt(static_cast<double>(n));
  for (int i = 0; i < n; ++i) {
    double s = i < big ? s_big : 1.0;
    Vec a = s * gaussian_vec(d, g);
    G.A.row(i) = a.transpose();
    G.b[i] = a.dot(G.x_true) + noise * s * N(g);
  }
  G.x = Vec::Zero(d);
  return G;
}

inline Generated gen_gaussian(int n, int d, uint64_t seed) {
  Rng g(derive_seed(seed, {104}));
  Generated G;
  G.A.resize(n, d);
  G.b.resize(n);
  std::normal_distribution<double> N;
  for (int i = 0; i < n; ++i) {
    G.A.row(i) = gaussian_vec(d, g).transpose();
    G.b[i] = N(g);
  }
  G.x = gaussian_vec(d, g);
  G.x_true = Vec::Zero(d);
  return G;
}

inline Generated gen_lstsq(int n, int d, uint64_t seed, double noise = 0.5) {
  Rng g(derive_seed(seed, {105}));
  Generated G;
  G.A.resize(n, d);
  G.b.resize(n);
  std::normal_distribution<double> N;
  G.x_true = gaussian_vec(d, g);
  for (int i = 0; i < n; ++i) {
    Vec a = gaussian_vec(d, g);
    G.A.row(i) = a.transpose();
    G.b[i] = a.dot(G.x_true) + noise * N(g);
  }
  G.x = Vec::Zero(d);
  return G;
}

}  // namespace gsketch
