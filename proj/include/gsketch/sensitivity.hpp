#pragma once

#include <Eigen/Eigenvalues>
#include <cmath>
#include <map>
#include <vector>

#include "gsketch/gsampler.hpp"
#include "gsketch/lp.hpp"

namespace gsketch {

inline Vec augment(const Vec& a, double b) {
  Vec t(a.size() + 1);
  t.head(a.size()) = a;
  t[a.size()] = b;
  return t;
}

// L1 sensitivity of rows[i] against `rows`:
//   max_x |<r_i, x>| / sum_j |<r_j, x>|.
// Solved through its dual, max lambda s.t. sum_j y_j r_j = lambda r_i with
// |y_j| <= 1, whose optimum is the reciprocal of the sensitivity.
inline double l1_sensitivity(const std::vector<Vec>& rows, size_t i) {
  require(i < rows.size(), "row index out of range");
  if (rows[i].squaredNorm() == 0) return 0.0;
  if (rows.size() == 1) return 1.0;
  const int m = static_cast<int>(rows[i].size());
  const int n = static_cast<int>(rows.size());
  Mat A(m, 2 * n + 1);
  Vec c = Vec::Zero(2 * n + 1), lb = Vec::Zero(2 * n + 1), ub = Vec::Ones(2 * n + 1);
  for (int j = 0; j < n; ++j) {
    A.col(2 * j) = rows[j];
    A.col(2 * j + 1) = -rows[j];
  }
  A.col(2 * n) = -rows[i];
  c[2 * n] = 1;
  ub[2 * n] = BoundedSimplex::kInf;
  BoundedSimplex lp;
  LPResult r = lp.solve(A, Vec::Zero(m), c, lb, ub);
  require(r.status == LPResult::Optimal && r.value >= 1 - 1e-9, "sensitivity lp failed");
  return std::min(1.0, 1.0 / r.value);
}

// Class-wise sensitivity of row i of (A, b): the L1 sensitivity of the
// augmented row (a_i, b_i) among the rows of its norm class.
inline double exact_sensitivity(const Mat& A, const Vec& b, int i) {
  double ni = A.row(i).norm();
  if (ni == 0) return 0.0;
  int k = norm_class(ni);
  std::vector<Vec> rows;
  size_t self = 0;
  for (int j = 0; j < A.rows(); ++j) {
    double nj = A.row(j).norm();
    if (nj == 0 || norm_class(nj) != k) continue;
    if (j == i) self = rows.size();
    rows.push_back(augment(A.row(j).transpose(), b[j]));
  }
  return l1_sensitivity(rows, self);
}

// Decides s_i >= thr exactly. Any direction z certifies
// s_i >= |<r_i, z>| / sum_j |<r_j, z>|, so the LP only runs when neither the
// row itself nor its leverage direction already clears the threshold.
inline bool sensitivity_at_least(const Mat& A, const Vec& b, int i, double thr) {
  double ni = A.row(i).norm();
  if (ni == 0) return thr <= 0;
  int k = norm_class(ni);
  std::vector<Vec> rows;
  size_t self = 0;
  for (int j = 0; j < A.rows(); ++j) {
    double nj = A.row(j).norm();
    if (nj == 0 || norm_class(nj) != k) continue;
    if (j == i) self = rows.size();
    rows.push_back(augment(A.row(j).transpose(), b[j]));
  }
  const Vec& r = rows[self];
  Mat G = Mat::Zero(r.size(), r.size());
  for (const auto& v : rows) G.noalias() += v * v.transpose();
  Vec zs[2] = {r, G.completeOrthogonalDecomposition().solve(r)};
  for (const Vec& z : zs) {
    double num = std::abs(r.dot(z)), den = 0;
    for (const auto& v : rows) den += std::abs(v.dot(z));
    if (den > 0 && num / den >= thr) return true;
  }
  return l1_sensitivity(rows, self) >= thr;
}

inline std::vector<double> exact_sensitivities(const Mat& A, const Vec& b) {
  std::vector<double> s(A.rows());
  for (int i = 0; i < A.rows(); ++i) s[i] = exact_sensitivity(A, b, i);
  return s;
}

// sqrt of the leverage of r in the Gram matrix G, an upper bound on its L1
// sensitivity against any row set whose Gram matrix is G.
inline double sqrt_leverage(const Mat& G, const Vec& r) {
  Eigen::SelfAdjointEigenSolver<Mat> es(G);
  const Vec& ev = es.eigenvalues();
  double top = ev.cwiseAbs().maxCoeff();
  Vec proj = es.eigenvectors().transpose() * r;
  double lev = 0;
  for (int k = 0; k < ev.size(); ++k)
    if (ev[k] > 1e-12 * top) lev += proj[k] * proj[k] / ev[k];
  return std::min(1.0, std::sqrt(std::max(0.0, lev)));
}

struct SensitivityRecord {
  uint64_t id = 0;
  Vec a;
  double b = 0;
  double upper_bound = 1;
  bool active = true;
};

struct SensitivityConfig {
  double T = 1;
  int d = 1;
  double C = 200;          // threshold 1/(C T d)
  int batch = 64;          // arrivals between LP re-checks
  double threshold_override = 0;

  double threshold() const { return threshold_override > 0 ? threshold_override : 1.0 / (C * T * d); }
};

struct Observation {
  bool retained = false;
  std::vector<SensitivityRecord> demoted;
};

// Policy deciding which rows are stored explicitly instead of sketched.
class Retention {
 public:
  virtual ~Retention() = default;
  virtual double threshold() const = 0;
  virtual Observation observe(uint64_t id, const Vec& a, double b) = 0;
  virtual std::vector<SensitivityRecord> finalize() = 0;
  virtual std::vector<SensitivityRecord> retained() const = 0;
};

// One-pass retention of rows whose class-wise sensitivity may exceed the
// threshold. Bounds only ever decrease; rows whose bound drops below the
// threshold are demoted and handed back to the caller. With weight_power q,
// rows are scaled by |a|^q first (q = 2 for Hessians growing like |r| a a^T).
class StreamingSensitivity : public Retention {
 public:
  explicit StreamingSensitivity(SensitivityConfig cfg, int weight_power = 0) : cfg_(cfg), q_(weight_power) {}

  double threshold() const override { return cfg_.threshold(); }

  Observation observe(uint64_t id, const Vec& a, double b) override {
    Observation out;
    double na = a.norm();
    if (na > 0) {
      Vec r = std::pow(na, q_) * augment(a, b);
      auto& C = classes_[norm_class(na)];
      if (C.gram.size() == 0) C.gram = Mat::Zero(r.size(), r.size());
      C.gram.noalias() += r * r.transpose();
      double bound = sqrt_leverage(C.gram, r);
      if (bound >= threshold()) {
        C.kept.push_back(SensitivityRecord{id, a, b, bound, true});
        C.aug.push_back(r);
        out.retained = true;
      }
    }
    if (++arrivals_ % cfg_.batch == 0) recheck(out.demoted);
    return out;
  }

  std::vector<SensitivityRecord> finalize() override {
    std::vector<SensitivityRecord> demoted;
    recheck(demoted);
    return demoted;
  }

  std::vector<SensitivityRecord> retained() const override {
    std::vector<SensitivityRecord> out;
    for (const auto& kv : classes_)
      for (const auto& r : kv.second.kept) out.push_back(r);
    return out;
  }

  size_t retained_count() const {
    size_t s = 0;
    for (const auto& kv : classes_) s += kv.second.kept.size();
    return s;
  }

 private:
  struct ClassState {
    Mat gram;
    std::vector<SensitivityRecord> kept;
    std::vector<Vec> aug;
  };

  void recheck(std::vector<SensitivityRecord>& demoted) {
    const double thr = threshold();
    for (auto& kv : classes_) {
      ClassState& C = kv.second;
      double mass = 0;
      for (const auto& r : C.aug) mass += r.norm();
      for (size_t i = 0; i < C.kept.size(); ++i) {
        auto& rec = C.kept[i];
        rec.upper_bound = std::min(rec.upper_bound, sqrt_leverage(C.gram, C.aug[i]));
        // Taking x along the row itself shows the bound cannot drop below this.
        if (rec.upper_bound >= thr && C.aug[i].norm() / mass < thr)
          rec.upper_bound = std::min(rec.upper_bound, l1_sensitivity(C.aug, i));
      }
      std::vector<SensitivityRecord> kept;
      std::vector<Vec> aug;
      for (size_t i = 0; i < C.kept.size(); ++i) {
        if (C.kept[i].upper_bound >= thr) {
          kept.push_back(std::move(C.kept[i]));
          aug.push_back(std::move(C.aug[i]));
        } else {
          C.kept[i].active = false;
          demoted.push_back(std::move(C.kept[i]));
        }
      }
      C.kept.swap(kept);
      C.aug.swap(aug);
    }
  }

  SensitivityConfig cfg_;
  int q_ = 0;
  std::map<int, ClassState> classes_;
  uint64_t arrivals_ = 0;
};

// Frobenius sensitivity when the Hessian weight f(r) is constant: the share
// |a_i|^2 / sum_j |a_j|^2, exact and monotone over prefixes.
class FrobeniusShareRetention : public Retention {
 public:
  explicit FrobeniusShareRetention(SensitivityConfig cfg) : cfg_(cfg) {}

  double threshold() const override { return cfg_.threshold(); }

  Observation observe(uint64_t id, const Vec& a, double b) override {
    Observation out;
    double w = a.squaredNorm();
    total_ += w;
    if (w > 0 && w / total_ >= threshold()) {
      kept_.push_back(SensitivityRecord{id, a, b, w / total_, true});
      out.retained = true;
    }
    if (++arrivals_ % cfg_.batch == 0) recheck(out.demoted);
    return out;
  }

  std::vector<SensitivityRecord> finalize() override {
    std::vector<SensitivityRecord> demoted;
    recheck(demoted);
    return demoted;
  }

  std::vector<SensitivityRecord> retained() const override { return kept_; }

 private:
  void recheck(std::vector<SensitivityRecord>& demoted) {
    std::vector<SensitivityRecord> kept;
    for (auto& r : kept_) {
      r.upper_bound = std::min(r.upper_bound, r.a.squaredNorm() / total_);
      if (r.upper_bound >= threshold()) {
        kept.push_back(std::move(r));
      } else {
        r.active = false;
        demoted.push_back(std::move(r));
      }
    }
    kept_.swap(kept);
  }

  SensitivityConfig cfg_;
  double total_ = 0;
  std::vector<SensitivityRecord> kept_;
  uint64_t arrivals_ = 0;
};

// Keeps every nonzero row; used when no useful sensitivity bound exists.
class RetainAll : public Retention {
 public:
  double threshold() const override { return 0; }
  Observation observe(uint64_t id, const Vec& a, double b) override {
    Observation out;
    if (a.squaredNorm() > 0) {
      kept_.push_back(SensitivityRecord{id, a, b, 1.0, true});
      out.retained = true;
    }
    return out;
  }
  std::vector<SensitivityRecord> finalize() override { return {}; }
  std::vector<SensitivityRecord> retained() const override { return kept_; }

 private:
  std::vector<SensitivityRecord> kept_;
};

}  // namespace gsketch
