#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gsketch/levels.hpp"
#include "gsketch/measures.hpp"

namespace gsketch {

// Dense instance for brute-force reference computations.
struct ExactInstance {
  Mat A;
  Vec b;
  MeasureSpec measure;

  ExactInstance() = default;
  ExactInstance(Mat A_, Vec b_, MeasureSpec m) : A(std::move(A_)), b(std::move(b_)), measure(std::move(m)) {
    require(A.rows() == b.size(), "dimension mismatch");
    require(A.rows() <= 10000 && A.cols() <= 64, "instance exceeds the oracle size guard");
    validate(measure, static_cast<int>(A.cols()));
  }

  int n() const { return static_cast<int>(A.rows()); }
  int d() const { return static_cast<int>(A.cols()); }
  Vec row(int i) const { return A.row(i).transpose(); }
};

inline Vec data_gradient(const ExactInstance& I, int i, const Vec& x) {
  return sampling_gradient(I.measure, I.row(i), I.b[i], x);
}

inline std::vector<double> gradient_norms(const ExactInstance& I, const Vec& x) {
  std::vector<double> out(I.n());
  for (int i = 0; i < I.n(); ++i) out[i] = data_gradient(I, i, x).norm();
  return out;
}

inline std::vector<double> hessian_norms(const ExactInstance& I, const Vec& x) {
  std::vector<double> out(I.n());
  for (int i = 0; i < I.n(); ++i) {
    Vec a = I.row(i);
    out[i] = std::abs(hessian_scalar(I.measure, residual(a, I.b[i], x))) * a.squaredNorm();
  }
  return out;
}

inline std::vector<double> normalize(const std::vector<double>& w) {
  double s = 0;
  for (double v : w) s += v;
  if (!(s > 0)) throw std::domain_error("zero total mass: distribution undefined");
  std::vector<double> p(w.size());
  for (size_t i = 0; i < w.size(); ++i) p[i] = w[i] / s;
  return p;
}

inline std::vector<double> exact_importance_distribution(const ExactInstance& I, const Vec& x) {
  return normalize(gradient_norms(I, x));
}

inline double objective(const ExactInstance& I, const Vec& x) {
  double s = 0;
  for (int i = 0; i < I.n(); ++i) s += loss(I.measure, I.row(i), I.b[i], x) - regularizer(I.measure, x);
  return s / I.n() + regularizer(I.measure, x);
}

inline Vec full_gradient(const ExactInstance& I, const Vec& x) {
  Vec g = Vec::Zero(I.d());
  for (int i = 0; i < I.n(); ++i) g += data_gradient(I, i, x);
  return g / I.n() + regularizer_gradient(I.measure, x);
}

inline Mat full_hessian(const ExactInstance& I, const Vec& x) {
  Mat H = Mat::Zero(I.d(), I.d());
  for (int i = 0; i < I.n(); ++i) H += data_hessian(I.measure, I.row(i), I.b[i], x);
  return H / I.n() + regularizer_hessian(I.measure, I.d());
}

// Both variance formulas over the data-term gradients, plus the uncentered
// second moments E|v|^2 of the two estimators (1/(n p_i)) g_i.
struct Variances {
  double sigma2_opt = 0;
  double sigma2_uni = 0;
  double m2_opt = 0;
  double m2_uni = 0;
  double mean_norm2 = 0;  // |(1/n) sum g_i|^2
};

inline Variances exact_variances(const ExactInstance& I, const Vec& x) {
  const double n = I.n();
  double s1 = 0, s2 = 0;
  Vec mean = Vec::Zero(I.d());
  for (int i = 0; i < I.n(); ++i) {
    Vec g = data_gradient(I, i, x);
    double nn = g.norm();
    s1 += nn;
    s2 += nn * nn;
    mean += g;
  }
  mean /= n;
  Variances V;
  V.mean_norm2 = mean.squaredNorm();
  V.sigma2_opt = (s1 * s1 - n * n * V.mean_norm2) / (n * n);
  V.sigma2_uni = (n * s2 - n * n * V.mean_norm2) / (n * n);
  V.m2_opt = s1 * s1 / (n * n);
  V.m2_uni = s2 / n;
  return V;
}

struct ExactLevels {
  std::vector<int> level;     // per row; K+1 when below the last level or zero
  std::vector<double> mass;   // index j in [0, K]
  std::vector<int> count;
};

inline ExactLevels exact_level_sets(const std::vector<double>& norms, double gamma, double alpha, double M_hat,
                                    int K) {
  LevelGrid grid(alpha, gamma, M_hat, K);
  ExactLevels L;
  L.mass.assign(K + 1, 0.0);
  L.count.assign(K + 1, 0);
  for (double v : norms) {
    int j = grid.level_of(v);
    L.level.push_back(j);
    if (j <= K) {
      L.mass[j] += v;
      L.count[j]++;
    }
  }
  return L;
}

inline ExactLevels exact_level_sets(const ExactInstance& I, const Vec& x, double gamma, double alpha, double M_hat,
                                    int K) {
  return exact_level_sets(gradient_norms(I, x), gamma, alpha, M_hat, K);
}

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  require(p.size() == q.size(), "size mismatch");
  double s = 0;
  for (size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return s / 2;
}

// Minimizer of the mean squared loss (plus ridge term when present).
inline Vec least_squares_solution(const ExactInstance& I) {
  require(I.measure.kind == MeasureKind::L2 || I.measure.kind == MeasureKind::Ridge,
          "closed form needs a squared loss");
  Mat G = I.A.transpose() * I.A;
  if (I.measure.kind == MeasureKind::Ridge) G += I.n() * I.measure.lambda * Mat::Identity(I.d(), I.d());
  return G.completeOrthogonalDecomposition().solve(I.A.transpose() * I.b);
}

}  // namespace gsketch
